#pragma once

#include <map>
#include <string>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace agman {

// Named model parameters. std::map keeps iteration order deterministic, which
// the optimizer and checkpoint writer rely on.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor init, bool trainable = true);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  size_t size() const { return entries_.size(); }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

// Fan-in scaled uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)). The RNG
// stream is derived from (seed, name) so initialization does not depend on
// parameter registration order.
Tensor uniform_init(std::vector<long> shape, long fan_in, uint64_t seed, const std::string& name);

}  // namespace agman
