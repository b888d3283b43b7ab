#include "core/commands.hpp"

#include <cstdio>
#include <filesystem>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/eval.hpp"
#include "core/log.hpp"
#include "core/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace agman {

namespace {

std::string require_manifest(const std::string& explicit_path, const RunConfig& cfg) {
  if (!explicit_path.empty()) return explicit_path;
  if (!cfg.data.val_manifest.empty()) return cfg.data.val_manifest;
  if (!cfg.data.manifest.empty()) return cfg.data.manifest;
  throw ConfigError("no manifest given: pass --manifest or set data.manifest / data.val_manifest");
}

struct LoadedModel {
  Model model;
  RunConfig eval_cfg;  // checkpoint config with overrides applied
};

LoadedModel load_model_with_overrides(const std::string& checkpoint_dir, const Overrides& overrides) {
  Model model = load_checkpoint(checkpoint_dir);
  RunConfig cfg = model.config();
  for (const auto& [key, value] : overrides) cfg.apply_override(key, value);
  // Structural keys stay pinned by the checkpoint.
  if (!(cfg.space == model.config().space) || !(cfg.backbone == model.config().backbone) ||
      !(cfg.model == model.config().model)) {
    throw ValidationError("overrides would change the model structure recorded in the checkpoint (attributes, "
                          "backbone, or model sections); retrain instead");
  }
  return {std::move(model), std::move(cfg)};
}

std::vector<std::pair<std::string, int>> map_eval_pairs(const std::map<int, EvalPartition>& pools) {
  std::vector<std::pair<std::string, int>> pairs;
  for (const auto& [attr, pool] : pools) {
    for (const auto& id : pool.query_ids) pairs.emplace_back(id, attr);
    for (const auto& id : pool.candidate_ids) pairs.emplace_back(id, attr);
  }
  return pairs;
}

std::string report_string(const EvalReport& report) { return report.to_json().dump(2) + "\n"; }

}  // namespace

TrainArtifacts cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.data.manifest.empty()) throw ConfigError("missing required config key: data.manifest");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + " (" + ec.message() + ")");

  const DatasetSplit split = load_manifest(cfg.data.manifest, cfg.space);
  Model model(cfg);
  const std::vector<EpochStats> history = train_model(model, split);

  TrainArtifacts art;
  art.history_path = (fs::path(out_dir) / "history.csv").string();
  write_history_csv(art.history_path, history);

  json metrics = json::object();
  if (!history.empty()) {
    const EpochStats& last = history.back();
    metrics["final"] = {{"epoch", last.epoch},          {"L_c", last.loss_class}, {"L_triplet", last.loss_triplet},
                        {"total", last.loss_total},     {"w0", last.w0},          {"w1", last.w1},
                        {"lr", last.lr}};
  }
  art.checkpoint_dir = (fs::path(out_dir) / "checkpoint").string();
  save_checkpoint(art.checkpoint_dir, model, cfg.train.epochs, metrics);
  return art;
}

std::string cmd_synth_data(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const DatasetSplit split = generate_synthetic(cfg.space, cfg.synth.per_subclass, cfg.synth.image_size,
                                                cfg.synth.seed);
  log_info("synthesized " + std::to_string(split.records.size()) + " records");
  return save_manifest(split, cfg.space, out_dir);
}

std::string cmd_eval_map(const std::string& checkpoint_dir, const std::string& manifest_path,
                         const Overrides& overrides) {
  auto [model, cfg] = load_model_with_overrides(checkpoint_dir, overrides);
  DatasetSplit split = load_manifest(require_manifest(manifest_path, cfg), cfg.space);
  split.eval_pools = make_eval_partition(split, cfg.space, cfg.eval.query_fraction, cfg.eval.seed);

  CachingEmbedder cache(model, split);
  cache.precompute(map_eval_pairs(split.eval_pools), cfg.workers);
  EvalReport report = evaluate_map(cache.as_embedder(), split, cfg.space, split.eval_pools);
  return report_string(report);
}

std::string cmd_eval_triplets(const std::string& checkpoint_dir, const std::string& manifest_path,
                              const std::string& triplet_file, const Overrides& overrides) {
  auto [model, cfg] = load_model_with_overrides(checkpoint_dir, overrides);
  DatasetSplit split = load_manifest(require_manifest(manifest_path, cfg), cfg.space);

  std::vector<Triplet> triplets;
  if (!triplet_file.empty()) {
    triplets = load_triplets(triplet_file, cfg.space);
    for (const Triplet& t : triplets) {
      split.require(t.anchor);
      split.require(t.positive);
      split.require(t.negative);
    }
  } else {
    const long per_attr = std::max<long>(1, cfg.eval.triplet_count / cfg.space.n());
    for (int a = 0; a < cfg.space.n(); ++a) {
      auto sampled = sample_triplets(split, cfg.space, a, per_attr, cfg.eval.seed);
      triplets.insert(triplets.end(), sampled.begin(), sampled.end());
    }
  }
  if (triplets.empty()) throw ValidationError("no triplets to evaluate");

  CachingEmbedder cache(model, split);
  std::vector<std::pair<std::string, int>> pairs;
  for (const Triplet& t : triplets) {
    pairs.emplace_back(t.anchor, t.attribute);
    pairs.emplace_back(t.positive, t.attribute);
    pairs.emplace_back(t.negative, t.attribute);
  }
  cache.precompute(pairs, cfg.workers);
  auto [accuracy, avg_loss] = evaluate_triplets(cache.as_embedder(), triplets, cfg.train.margin,
                                                cfg.train.triplet_mode);
  EvalReport report;
  report.triplet_accuracy = accuracy;
  report.triplet_avg_loss = avg_loss;
  report.counts.triplets = static_cast<long>(triplets.size());
  return report_string(report);
}

RetrievalOutput cmd_retrieve(const std::string& checkpoint_dir, const std::string& manifest_path,
                             const std::string& query_id, const std::string& attribute_name, long k,
                             const Overrides& overrides) {
  auto [model, cfg] = load_model_with_overrides(checkpoint_dir, overrides);
  const int attr = cfg.space.index_of(attribute_name);
  if (attr < 0) {
    std::string valid;
    for (const auto& n : cfg.space.names) valid += (valid.empty() ? "" : ", ") + n;
    throw ArgumentError("unknown attribute '" + attribute_name + "'; valid names: " + valid);
  }
  DatasetSplit split = load_manifest(require_manifest(manifest_path, cfg), cfg.space);
  split.eval_pools = make_eval_partition(split, cfg.space, cfg.eval.query_fraction, cfg.eval.seed);

  CachingEmbedder cache(model, split);
  RankingResult result = retrieve(cache.as_embedder(), split, cfg.space, query_id, attr, k, split.eval_pools);
  return {ranking_to_csv(result), result.truncated_request};
}

AttentionExport cmd_export_attention(const std::string& checkpoint_dir, const std::string& manifest_path,
                                     const std::string& image_id, const std::string& attribute_name,
                                     const Overrides& overrides) {
  auto [model, cfg] = load_model_with_overrides(checkpoint_dir, overrides);
  if (!cfg.model.enable_asa) {
    throw StateError("this checkpoint was trained with the ASA stage disabled; no spatial attention map exists");
  }
  const int attr = cfg.space.index_of(attribute_name);
  if (attr < 0) {
    std::string valid;
    for (const auto& n : cfg.space.names) valid += (valid.empty() ? "" : ", ") + n;
    throw ArgumentError("unknown attribute '" + attribute_name + "'; valid names: " + valid);
  }
  DatasetSplit split = load_manifest(require_manifest(manifest_path, cfg), cfg.space);
  const ImageRecord& rec = split.require(image_id);

  AttentionTrace trace;
  model.embed(load_pixels(rec, cfg.space, cfg.backbone.input_size), attr, &trace);
  const Tensor& sm = *trace.spatial_softmax;

  std::string csv;
  char buf[64];
  for (long y = 0; y < sm.dim(0); ++y) {
    for (long x = 0; x < sm.dim(1); ++x) {
      std::snprintf(buf, sizeof(buf), "%.17g", sm.at(y, x));
      csv += buf;
      csv += (x + 1 < sm.dim(1)) ? "," : "\n";
    }
  }
  json sidecar{{"image_id", image_id}, {"attribute", attribute_name}, {"h", sm.dim(0)}, {"w", sm.dim(1)}};
  return {csv, sidecar.dump(2) + "\n"};
}

}  // namespace agman
