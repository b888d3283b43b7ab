#pragma once

#include <map>
#include <string>

#include "core/param_store.hpp"

namespace agman {

// Adam (default) or plain SGD over the trainable ParamStore entries. Only
// parameters present in the gradient map are updated; each keeps its own step
// count for bias correction.
class Optimizer {
 public:
  Optimizer(ParamStore& store, std::string kind, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(const std::map<std::string, Tensor>& grads, double lr);

 private:
  struct AdamState {
    Tensor m, v;
    long t = 0;
  };
  ParamStore& store_;
  std::string kind_;
  double beta1_, beta2_, eps_;
  std::map<std::string, AdamState> state_;
};

// Step-decay schedule: lr * gamma^floor(epoch / step), epoch counted from 0.
double scheduled_lr(double base_lr, double gamma, long step, long epoch);

}  // namespace agman
