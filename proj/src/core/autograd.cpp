#include "core/autograd.hpp"

#include "core/error.hpp"

namespace agman {

Var Tape::leaf(const Tensor& external_value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->external = &external_value;
  n->requires_grad = grad_enabled_ && requires_grad;
  if (n->requires_grad) order_.push_back(n);
  return n;
}

Var Tape::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  return n;
}

Var Tape::make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool need = false;
  if (grad_enabled_) {
    for (const auto& p : parents) need = need || p->requires_grad;
  }
  n->requires_grad = need;
  if (need) {
    Node* raw = n.get();
    // Parents are kept alive by the closure for the lifetime of the tape.
    n->backward = [raw, fn = std::move(backward_fn), ps = std::move(parents)]() { fn(*raw); };
    order_.push_back(n);
  }
  return n;
}

void Tape::backward(const Var& root) {
  if (!grad_enabled_) throw StateError("backward() on a gradient-disabled tape");
  if (root->val().size() != 1) throw ArgumentError("backward() root must be scalar");
  root->grad_acc()[0] = 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node& n = **it;
    if (n.has_grad() && n.backward) n.backward();
  }
}

}  // namespace agman
