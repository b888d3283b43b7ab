#pragma once

#include <optional>

#include "core/backbone.hpp"
#include "core/config.hpp"

namespace agman {

// Gate maps recorded during an embedding pass; stages disabled by the
// configuration leave their field unset.
struct AttentionTrace {
  std::optional<Tensor> spatial_softmax;  // [h,w], sums to 1
  std::optional<Tensor> sa_gate;          // [h,w], in (0,1)
  std::optional<Tensor> aca_gate;         // [c], in (0,1)
  std::optional<Tensor> ca_gate;          // [c], in (0,1)
};

// Attribute-conditioned embedding model: backbone stages, hierarchical fusion,
// input projection, the four attention stages, classification branch, and the
// two loss weights. Parameters live in a ParamStore; forward passes build
// autograd graphs over them.
class Model {
 public:
  explicit Model(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Backbone& backbone() const { return *backbone_; }

  // Channel/spatial dims of the map entering the attention stack.
  StageDims attention_dims() const;
  long embedding_size() const { return cfg_.model.embedding_size; }

  struct TraceVars {
    Var spatial_softmax, sa_gate, aca_gate, ca_gate;
  };
  struct EmbedVars {
    Var embedding;  // [embedding_size]
    Var f23;        // classification-branch input
    TraceVars trace;
  };

  // image: raw [3,S,S] pixels (normalization applied inside).
  EmbedVars embed_graph(Tape& t, Binder& bind, const Tensor& image, const Tensor& attr_onehot,
                        bool want_trace = false) const;
  Var classify_from_f23(Tape& t, Binder& bind, const Var& f23) const;

  // Attention stages on explicit inputs (shape checked against the stage's own
  // weights). Used by embed_graph and directly testable.
  Var asa_graph(Tape& t, Binder& bind, const Var& f, const Tensor& attr_onehot, Var* softmax_map) const;
  Var sa_graph(Tape& t, Binder& bind, const Var& f, Var* gate) const;
  Var aca_graph(Tape& t, Binder& bind, const Var& f, const Tensor& attr_onehot, Var* gate) const;
  Var ca_graph(Tape& t, Binder& bind, const Var& f, Var* gate) const;

  // Gradient-free convenience wrappers.
  Tensor embed(const Tensor& image, int attribute, AttentionTrace* trace = nullptr) const;
  Tensor classify(const Tensor& image) const;
  std::pair<Tensor, Tensor> extract_stages(const Tensor& image) const;                    // (F2, F3)
  std::pair<Tensor, Tensor> fuse_hierarchical(const Tensor& f2, const Tensor& f3) const;  // (F23, fused)
  Tensor classify_attributes(const Tensor& f23) const;                                    // n logits
  std::pair<Tensor, Tensor> attribute_spatial_attention(const Tensor& f, int attribute) const;
  std::pair<Tensor, Tensor> spatial_attention(const Tensor& f) const;
  std::pair<Tensor, Tensor> attribute_channel_attention(const Tensor& f, int attribute) const;
  std::pair<Tensor, Tensor> channel_attention(const Tensor& f) const;

 private:
  Var fuse_graph(Tape& t, Binder& bind, const Var& f2, const Var& f3) const;  // F23
  Var input_image_var(Tape& t, const Tensor& image) const;

  RunConfig cfg_;
  std::unique_ptr<Backbone> backbone_;
  ParamStore params_;
};

// One-hot validation shared by the attribute-conditioned stages.
void require_one_hot(const Tensor& a);

}  // namespace agman
