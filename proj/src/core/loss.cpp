#include "core/loss.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/ops.hpp"

namespace agman {

double classification_loss(std::span<const double> logits, std::span<const double> targets,
                           std::span<const double> weights) {
  if (logits.size() != targets.size() || logits.size() != weights.size() || logits.empty()) {
    throw ArgumentError("classification_loss: logits/targets/weights must share a non-zero length");
  }
  auto softplus = [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); };
  double total = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    total += weights[i] * (softplus(-logits[i]) + (1.0 - targets[i]) * logits[i]);
  }
  return total / static_cast<double>(logits.size());
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size() || u.empty()) throw ArgumentError("cosine_similarity: length mismatch");
  double uu = 0, vv = 0, uv = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm input");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double triplet_loss(std::span<const double> anchor, std::span<const double> positive, std::span<const double> negative,
                    double margin, TripletMode mode) {
  const double sp = cosine_similarity(anchor, positive);
  const double sn = cosine_similarity(anchor, negative);
  const double z = mode == TripletMode::similarity_corrected ? margin - sp + sn : margin + sp - sn;
  return z > 0 ? z : 0.0;
}

double combined_loss(double loss_class, double loss_triplet, double w0, double w1) {
  const double c0 = std::clamp(w0, -kLossWeightClamp, kLossWeightClamp);
  const double c1 = std::clamp(w1, -kLossWeightClamp, kLossWeightClamp);
  return 0.5 * std::exp(c0) * loss_class + c0 + 0.5 * std::exp(c1) * loss_triplet + c1;
}

Var classification_loss_graph(Tape& t, const Var& logits, const Tensor& targets, const Tensor& weights) {
  return ops::bce_with_logits_mean(t, logits, targets, weights);
}

Var cosine_similarity_graph(Tape& t, const Var& u, const Var& v) {
  Var uu = ops::dot(t, u, u);
  Var vv = ops::dot(t, v, v);
  if (uu->val()[0] == 0.0 || vv->val()[0] == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero-norm input");
  }
  Var denom = ops::mul(t, ops::sqrt_op(t, uu), ops::sqrt_op(t, vv));
  return ops::div(t, ops::dot(t, u, v), denom);
}

Var triplet_loss_graph(Tape& t, const Var& anchor, const Var& positive, const Var& negative, double margin,
                       TripletMode mode) {
  Var sp = cosine_similarity_graph(t, anchor, positive);
  Var sn = cosine_similarity_graph(t, anchor, negative);
  Var z = mode == TripletMode::similarity_corrected ? ops::sub(t, sn, sp) : ops::sub(t, sp, sn);
  return ops::relu(t, ops::add_const(t, z, margin));
}

Var combined_loss_graph(Tape& t, const Var& loss_class, const Var& loss_triplet, const Var& w0, const Var& w1,
                        bool include_classification) {
  Var c1 = ops::clamp(t, w1, -kLossWeightClamp, kLossWeightClamp);
  Var total = ops::add(t, ops::scale(t, ops::mul(t, ops::exp_op(t, c1), loss_triplet), 0.5), c1);
  if (include_classification) {
    Var c0 = ops::clamp(t, w0, -kLossWeightClamp, kLossWeightClamp);
    Var class_term = ops::add(t, ops::scale(t, ops::mul(t, ops::exp_op(t, c0), loss_class), 0.5), c0);
    total = ops::add(t, total, class_term);
  }
  return total;
}

}  // namespace agman
