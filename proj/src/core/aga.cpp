#include "core/aga.hpp"

#include "core/error.hpp"
#include "core/model.hpp"
#include "core/ops.hpp"

namespace agman {

Var attribute_spatial_attention_stage(Tape& t, const Var& f, const Tensor& attr_onehot, const AsaWeights& w,
                                      Var* softmax_map) {
  require_one_hot(attr_onehot);
  const long h = f->val().dim(1), width = f->val().dim(2);
  Var p_img = ops::tanh_op(t, ops::conv2d(t, f, w.conv_weight, w.conv_bias, 1, 0));
  Var wa = ops::linear(t, t.constant(attr_onehot), w.attr_weight);
  Var p_attr = ops::mul(t, ops::sigmoid(t, wa), wa);
  Var inner = ops::channel_sum_map(t, ops::mul_channel(t, p_img, p_attr));
  Var sm = ops::reshape(t, ops::softmax_flat(t, inner), {h, width});
  if (softmax_map) *softmax_map = sm;
  Var weighted = ops::mul(t, sm, w.spatial_gain);
  return ops::mul_spatial(t, f, weighted);
}

Var spatial_attention_stage(Tape& t, const Var& f, const SaWeights& w, Var* gate) {
  const long h = f->val().dim(1), width = f->val().dim(2);
  Var cat = ops::concat_channels(t, ops::channel_mean_map(t, f), ops::channel_max_map(t, f));
  Var g = ops::sigmoid(t, ops::conv2d(t, cat, w.conv_weight, w.conv_bias, 1, 0));
  g = ops::reshape(t, g, {h, width});
  if (gate) *gate = g;
  return ops::mul_spatial(t, f, g);
}

Var attribute_channel_attention_stage(Tape& t, const Var& f, const Tensor& attr_onehot, const AcaWeights& w,
                                      Var* gate) {
  require_one_hot(attr_onehot);
  Var wa = ops::linear(t, t.constant(attr_onehot), w.attr_weight);
  Var q_attr = ops::mul(t, ops::sigmoid(t, wa), wa);
  Var pooled = ops::global_avg_pool(t, f);
  Var z = ops::relu(t, ops::linear(t, ops::concat_vec(t, q_attr, pooled), w.fc1_weight));
  Var g = ops::sigmoid(t, ops::linear(t, z, w.fc2_weight));
  if (gate) *gate = g;
  return ops::mul_channel(t, f, ops::mul(t, w.channel_gain, g));
}

Var channel_attention_stage(Tape& t, const Var& f, const CaWeights& w, Var* gate) {
  Var pooled = ops::global_avg_pool(t, f);
  Var z = ops::relu(t, ops::linear(t, pooled, w.reduce_weight));
  Var g = ops::sigmoid(t, ops::linear(t, z, w.expand_weight));
  if (gate) *gate = g;
  return ops::mul_channel(t, f, g);
}

}  // namespace agman
