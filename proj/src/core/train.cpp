#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/error.hpp"
#include "core/log.hpp"
#include "core/loss.hpp"
#include "core/optimizer.hpp"
#include "core/ops.hpp"

namespace agman {

namespace {

void clamp_loss_weights(ParamStore& params) {
  for (const char* name : {"loss.w0", "loss.w1"}) {
    double& w = params.get(name)[0];
    w = std::clamp(w, -kLossWeightClamp, kLossWeightClamp);
  }
}

void require_finite(const Var& v, long epoch, long batch, const char* component) {
  if (!v->val().all_finite()) {
    throw StateError("training aborted: " + std::string(component) + " is non-finite at epoch " +
                     std::to_string(epoch) + ", batch " + std::to_string(batch));
  }
}

}  // namespace

std::vector<EpochStats> train_model(Model& model, const DatasetSplit& split) {
  const RunConfig& cfg = model.config();
  const TrainConfig& tc = cfg.train;
  const int n_attr = cfg.space.n();
  const long batches_per_epoch = std::max<long>(1, (tc.triplets_per_epoch + tc.batch_size - 1) / tc.batch_size);

  Tensor class_weights({static_cast<long>(n_attr)});
  for (int a = 0; a < n_attr; ++a) {
    class_weights[a] = tc.class_weights.empty() ? 1.0 : tc.class_weights[static_cast<size_t>(a)];
  }

  Optimizer opt(model.params(), tc.optimizer);
  std::vector<EpochStats> history;
  history.reserve(static_cast<size_t>(tc.epochs));

  for (long epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = scheduled_lr(tc.learning_rate, tc.lr_gamma, tc.lr_step, epoch);

    // Per-attribute triplet pools for this epoch, resampled with an
    // epoch-derived seed and consumed round-robin by the batches.
    const long batches_of_attr = (batches_per_epoch + n_attr - 1) / n_attr;
    std::vector<std::vector<Triplet>> pools(static_cast<size_t>(n_attr));
    for (int a = 0; a < n_attr; ++a) {
      pools[static_cast<size_t>(a)] =
          sample_triplets(split, cfg.space, a, batches_of_attr * tc.batch_size,
                          Rng::mix(tc.seed, 0x6570u, static_cast<uint64_t>(epoch)));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    std::vector<size_t> consumed(static_cast<size_t>(n_attr), 0);

    for (long b = 0; b < batches_per_epoch; ++b) {
      const int attr = static_cast<int>(b % n_attr);
      auto& pool = pools[static_cast<size_t>(attr)];
      size_t& used = consumed[static_cast<size_t>(attr)];

      Tape tape(true);
      Binder bind(tape, model.params());
      const Tensor attr_vec = encode_attribute(attr, cfg.space);
      Tensor target({static_cast<long>(n_attr)});
      target[attr] = 1.0;

      Var triplet_sum, class_sum;
      for (long i = 0; i < tc.batch_size; ++i) {
        const Triplet& trip = pool[used++];
        auto anchor = model.embed_graph(tape, bind, load_pixels(split.require(trip.anchor), cfg.space, 0), attr_vec);
        auto pos = model.embed_graph(tape, bind, load_pixels(split.require(trip.positive), cfg.space, 0), attr_vec);
        auto neg = model.embed_graph(tape, bind, load_pixels(split.require(trip.negative), cfg.space, 0), attr_vec);
        Var lt = triplet_loss_graph(tape, anchor.embedding, pos.embedding, neg.embedding, tc.margin, tc.triplet_mode);
        triplet_sum = triplet_sum ? ops::add(tape, triplet_sum, lt) : lt;
        if (tc.enable_classification_loss) {
          Var logits = model.classify_from_f23(tape, bind, anchor.f23);
          Var lc = classification_loss_graph(tape, logits, target, class_weights);
          class_sum = class_sum ? ops::add(tape, class_sum, lc) : lc;
        }
      }
      const double inv_batch = 1.0 / static_cast<double>(tc.batch_size);
      Var loss_triplet = ops::scale(tape, triplet_sum, inv_batch);
      Var loss_class = tc.enable_classification_loss ? ops::scale(tape, class_sum, inv_batch)
                                                     : tape.constant(Tensor::scalar(0.0));
      Var total = combined_loss_graph(tape, loss_class, loss_triplet, bind("loss.w0"), bind("loss.w1"),
                                      tc.enable_classification_loss);
      require_finite(loss_triplet, epoch, b, "triplet loss");
      require_finite(loss_class, epoch, b, "classification loss");
      require_finite(total, epoch, b, "total loss");

      tape.backward(total);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, var] : bind.bound()) {
        if (var->requires_grad && var->has_grad()) grads.emplace(name, var->grad);
      }
      opt.step(grads, lr);
      clamp_loss_weights(model.params());

      stats.loss_class += loss_class->val()[0];
      stats.loss_triplet += loss_triplet->val()[0];
      stats.loss_total += total->val()[0];
      stats.w0 += model.params().get("loss.w0")[0];
      stats.w1 += model.params().get("loss.w1")[0];
    }

    const double inv = 1.0 / static_cast<double>(batches_per_epoch);
    stats.loss_class *= inv;
    stats.loss_triplet *= inv;
    stats.loss_total *= inv;
    stats.w0 *= inv;
    stats.w1 *= inv;
    history.push_back(stats);
    log_info("epoch " + std::to_string(epoch) + ": total=" + std::to_string(stats.loss_total) +
             " triplet=" + std::to_string(stats.loss_triplet) + " class=" + std::to_string(stats.loss_class) +
             " lr=" + std::to_string(lr));
  }
  return history;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write history file: " + path);
  out << "epoch,L_c,L_triplet,total,w0,w1,lr\n";
  char buf[256];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.loss_class, e.loss_triplet,
                  e.loss_total, e.w0, e.w1, e.lr);
    out << buf;
  }
  if (!out) throw IoError("short write to history file: " + path);
}

}  // namespace agman
