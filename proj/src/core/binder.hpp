#pragma once

#include <map>
#include <string>

#include "core/autograd.hpp"
#include "core/error.hpp"
#include "core/param_store.hpp"

namespace agman {

// Binds named parameters into a graph as leaf nodes, one leaf per name, so
// gradients accumulate correctly when a parameter is used multiple times.
class Binder {
 public:
  Binder(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    auto se = store_.entries().find(name);
    if (se == store_.entries().end()) throw ArgumentError("unknown parameter: " + name);
    Var v = tape_.leaf(se->second.value, se->second.trainable);
    cache_.emplace(name, v);
    return v;
  }

  const Tensor& raw(const std::string& name) const { return store_.get(name); }
  const std::map<std::string, Var>& bound() const { return cache_; }

 private:
  Tape& tape_;
  const ParamStore& store_;
  std::map<std::string, Var> cache_;
};

}  // namespace agman
