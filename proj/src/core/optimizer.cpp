#include "core/optimizer.hpp"

#include <cmath>

#include "core/error.hpp"

namespace agman {

Optimizer::Optimizer(ParamStore& store, std::string kind, double beta1, double beta2, double eps)
    : store_(store), kind_(std::move(kind)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (kind_ != "adam" && kind_ != "sgd") throw ConfigError("unknown optimizer: " + kind_);
}

void Optimizer::step(const std::map<std::string, Tensor>& grads, double lr) {
  for (const auto& [name, grad] : grads) {
    auto it = store_.entries().find(name);
    if (it == store_.entries().end()) throw ArgumentError("gradient for unknown parameter: " + name);
    if (!it->second.trainable) continue;
    Tensor& value = it->second.value;
    if (!value.same_shape(grad)) throw ArgumentError("gradient shape mismatch for parameter: " + name);

    if (kind_ == "sgd") {
      for (long i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
      continue;
    }
    AdamState& st = state_[name];
    if (st.t == 0) {
      st.m = Tensor::zeros(value.shape());
      st.v = Tensor::zeros(value.shape());
    }
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.t));
    for (long i = 0; i < value.size(); ++i) {
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * grad[i];
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      value[i] -= lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps_);
    }
  }
}

double scheduled_lr(double base_lr, double gamma, long step, long epoch) {
  if (step < 1) throw ConfigError("lr_step must be >= 1");
  return base_lr * std::pow(gamma, static_cast<double>(epoch / step));
}

}  // namespace agman
