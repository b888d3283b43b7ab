#include "core/param_store.hpp"

#include <cmath>

#include "core/error.hpp"

namespace agman {

Tensor& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(init), trainable});
  if (!inserted) throw ArgumentError("duplicate parameter name: " + name);
  return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ArgumentError("unknown parameter: " + name);
  return it->second.value;
}

Tensor uniform_init(std::vector<long> shape, long fan_in, uint64_t seed, const std::string& name) {
  Tensor t(std::move(shape));
  Rng rng(Rng::mix(seed, Rng::hash_string(name)));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform_real(-bound, bound);
  return t;
}

}  // namespace agman
