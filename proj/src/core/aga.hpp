#pragma once

#include "core/autograd.hpp"

namespace agman {

// The four attention stages as graph builders over explicit weights. Spatial
// and channel dims are taken from the inputs; weight shapes are checked by the
// underlying ops. The Model binds its named parameters into these structs.

struct AsaWeights {
  Var conv_weight;   // [c',c,1,1]
  Var conv_bias;     // [c']
  Var attr_weight;   // [c',n]
  Var spatial_gain;  // [h,w]
};

struct SaWeights {
  Var conv_weight;  // [1,2,1,1]
  Var conv_bias;    // [1]
};

struct AcaWeights {
  Var attr_weight;   // [c,n]
  Var fc1_weight;    // [hidden,2c]
  Var fc2_weight;    // [c,hidden]
  Var channel_gain;  // [c]
};

struct CaWeights {
  Var reduce_weight;  // [c/r,c]
  Var expand_weight;  // [c,c/r]
};

// tanh-transformed image map against the gated attribute vector, softmax over
// positions, learned spatial gain, broadcast back onto f.
Var attribute_spatial_attention_stage(Tape& t, const Var& f, const Tensor& attr_onehot, const AsaWeights& w,
                                      Var* softmax_map);

// channel-wise mean/max maps, 2->1 convolution, sigmoid gate.
Var spatial_attention_stage(Tape& t, const Var& f, const SaWeights& w, Var* gate);

// gated attribute vector concatenated with the pooled map, two dense layers,
// sigmoid gate scaled by the learned channel gain.
Var attribute_channel_attention_stage(Tape& t, const Var& f, const Tensor& attr_onehot, const AcaWeights& w,
                                      Var* gate);

// squeeze (c -> c/r) and expand (c/r -> c) on the pooled map, sigmoid gate.
Var channel_attention_stage(Tape& t, const Var& f, const CaWeights& w, Var* gate);

}  // namespace agman
