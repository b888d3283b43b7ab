#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

namespace agman {

class Tape;

// One value in a dynamically built computation graph. Leaves either own their
// value or view an external tensor (model parameters stay in the ParamStore
// and are never copied into the graph).
struct Node {
  Tensor value;
  const Tensor* external = nullptr;
  Tensor grad;
  bool requires_grad = false;
  std::function<void()> backward;

  const Tensor& val() const { return external ? *external : value; }
  // Gradient accumulator, allocated on first use.
  Tensor& grad_acc() {
    if (grad.empty()) grad = Tensor::zeros(val().shape());
    return grad;
  }
  bool has_grad() const { return !grad.empty(); }
};

using Var = std::shared_ptr<Node>;

// Records nodes in construction order; backward() replays the tape in reverse.
// A tape with gradients disabled evaluates forward only and records nothing.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(const Tensor& external_value, bool requires_grad);
  Var constant(Tensor value);

  // New node computed from parents. `backward` reads node->grad and adds into
  // the parents' grad accumulators; it is dropped when gradients are off.
  Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

  void backward(const Var& root);

 private:
  bool grad_enabled_;
  std::vector<Var> order_;
};

}  // namespace agman
