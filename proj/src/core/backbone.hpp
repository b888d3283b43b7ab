#pragma once

#include <memory>
#include <utility>

#include "core/binder.hpp"
#include "core/config.hpp"

namespace agman {

struct StageDims {
  long channels = 0;
  long height = 0;
  long width = 0;

  bool operator==(const StageDims&) const = default;
};

// Four-stage convolutional backbone contract: stages 1..3 feed the embedding
// path (F2, F3), block 4 serves the attribute classification branch.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual StageDims f2_dims() const = 0;
  virtual StageDims f3_dims() const = 0;
  virtual StageDims f4_dims() const = 0;

  virtual void register_params(ParamStore& store, uint64_t seed) const = 0;

  // image is an already normalized [3,S,S] leaf/constant.
  virtual std::pair<Var, Var> stages(Tape& t, Binder& bind, const Var& image) const = 0;  // (F2, F3)
  virtual Var block4(Tape& t, Binder& bind, const Var& x) const = 0;

  static std::unique_ptr<Backbone> create(const BackboneConfig& cfg);
};

}  // namespace agman
