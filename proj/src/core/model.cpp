#include "core/model.hpp"

#include "core/aga.hpp"
#include "core/checkpoint.hpp"
#include "core/image.hpp"
#include "core/ops.hpp"

namespace agman {

void require_one_hot(const Tensor& a) {
  if (a.ndim() != 1) throw ArgumentError("attribute vector must be rank 1");
  long ones = 0;
  for (long i = 0; i < a.size(); ++i) {
    if (a[i] == 1.0)
      ++ones;
    else if (a[i] != 0.0)
      throw ArgumentError("attribute vector must be one-hot; entry " + std::to_string(i) + " is neither 0 nor 1");
  }
  if (ones != 1) throw ArgumentError("attribute vector must contain exactly one 1, found " + std::to_string(ones));
}

Model::Model(RunConfig cfg) : cfg_(std::move(cfg)), backbone_(Backbone::create(cfg_.backbone)) {
  cfg_.validate();
  const uint64_t seed = cfg_.train.seed;
  backbone_->register_params(params_, seed);

  const StageDims d2 = backbone_->f2_dims();
  const StageDims d3 = backbone_->f3_dims();
  const StageDims d4 = backbone_->f4_dims();
  const long c = cfg_.model.embedding_size;
  const long cp = cfg_.model.asa_channels;
  const long n = cfg_.space.n();

  if (cfg_.model.enable_fusion) {
    params_.add("fusion.proj.weight",
                uniform_init({d3.channels, d2.channels, 1, 1}, d2.channels, seed, "fusion.proj.weight"));
    params_.add("fusion.proj.bias", Tensor({d3.channels}));
  }

  const long proj_in = cfg_.model.enable_fusion ? 2 * d3.channels : d3.channels;
  params_.add("aga.projection.weight", uniform_init({c, proj_in, 1, 1}, proj_in, seed, "aga.projection.weight"));
  params_.add("aga.projection.bias", Tensor({c}));

  if (cfg_.model.enable_asa) {
    params_.add("aga.asa.conv.weight", uniform_init({cp, c, 1, 1}, c, seed, "aga.asa.conv.weight"));
    params_.add("aga.asa.conv.bias", Tensor({cp}));
    params_.add("aga.asa.attr.weight", uniform_init({cp, n}, n, seed, "aga.asa.attr.weight"));
    params_.add("aga.asa.spatial_gain", Tensor::full({d3.height, d3.width}, 1.0));
  }
  if (cfg_.model.enable_sa) {
    params_.add("aga.sa.conv.weight", uniform_init({1, 2, 1, 1}, 2, seed, "aga.sa.conv.weight"));
    params_.add("aga.sa.conv.bias", Tensor({1}));
  }
  if (cfg_.model.enable_aca) {
    params_.add("aga.aca.attr.weight", uniform_init({c, n}, n, seed, "aga.aca.attr.weight"));
    params_.add("aga.aca.fc1.weight", uniform_init({cfg_.model.aca_hidden, 2 * c}, 2 * c, seed, "aga.aca.fc1.weight"));
    params_.add("aga.aca.fc2.weight",
                uniform_init({c, cfg_.model.aca_hidden}, cfg_.model.aca_hidden, seed, "aga.aca.fc2.weight"));
    params_.add("aga.aca.channel_gain", Tensor::full({c}, 1.0));
  }
  if (cfg_.model.enable_ca) {
    const long cr = c / cfg_.model.ca_reduction;
    params_.add("aga.ca.reduce.weight", uniform_init({cr, c}, c, seed, "aga.ca.reduce.weight"));
    params_.add("aga.ca.expand.weight", uniform_init({c, cr}, cr, seed, "aga.ca.expand.weight"));
  }

  params_.add("head.fc.weight", uniform_init({n, d4.channels}, d4.channels, seed, "head.fc.weight"));
  params_.add("head.fc.bias", Tensor({n}));

  params_.add("loss.w0", Tensor({1}));
  params_.add("loss.w1", Tensor({1}));

  if (!cfg_.backbone.pretrained.empty()) {
    overlay_params(params_, cfg_.backbone.pretrained, "backbone.");
  }
}

StageDims Model::attention_dims() const {
  const StageDims d3 = backbone_->f3_dims();
  return {cfg_.model.embedding_size, d3.height, d3.width};
}

Var Model::input_image_var(Tape& t, const Tensor& image) const {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.backbone.input_size ||
      image.dim(2) != cfg_.backbone.input_size) {
    throw ArgumentError("image must be [3," + std::to_string(cfg_.backbone.input_size) + "," +
                        std::to_string(cfg_.backbone.input_size) + "], got " + Tensor::shape_str(image.shape()));
  }
  if (!image.all_finite()) throw ArgumentError("image contains non-finite pixels");
  return t.constant(normalize_image(image, cfg_.backbone.norm_mean, cfg_.backbone.norm_std));
}

Var Model::fuse_graph(Tape& t, Binder& bind, const Var& f2, const Var& f3) const {
  Var proj = ops::conv2d(t, f2, bind("fusion.proj.weight"), bind("fusion.proj.bias"), 1, 0);
  proj = ops::avg_pool2d(t, proj, 2, 2);
  return ops::add(t, proj, f3);
}

Var Model::asa_graph(Tape& t, Binder& bind, const Var& f, const Tensor& attr_onehot, Var* softmax_map) const {
  const AsaWeights w{bind("aga.asa.conv.weight"), bind("aga.asa.conv.bias"), bind("aga.asa.attr.weight"),
                     bind("aga.asa.spatial_gain")};
  return attribute_spatial_attention_stage(t, f, attr_onehot, w, softmax_map);
}

Var Model::sa_graph(Tape& t, Binder& bind, const Var& f, Var* gate) const {
  const SaWeights w{bind("aga.sa.conv.weight"), bind("aga.sa.conv.bias")};
  return spatial_attention_stage(t, f, w, gate);
}

Var Model::aca_graph(Tape& t, Binder& bind, const Var& f, const Tensor& attr_onehot, Var* gate) const {
  const AcaWeights w{bind("aga.aca.attr.weight"), bind("aga.aca.fc1.weight"), bind("aga.aca.fc2.weight"),
                     bind("aga.aca.channel_gain")};
  return attribute_channel_attention_stage(t, f, attr_onehot, w, gate);
}

Var Model::ca_graph(Tape& t, Binder& bind, const Var& f, Var* gate) const {
  const CaWeights w{bind("aga.ca.reduce.weight"), bind("aga.ca.expand.weight")};
  return channel_attention_stage(t, f, w, gate);
}

Model::EmbedVars Model::embed_graph(Tape& t, Binder& bind, const Tensor& image, const Tensor& attr_onehot,
                                    bool want_trace) const {
  require_one_hot(attr_onehot);
  if (attr_onehot.size() != cfg_.space.n()) {
    throw ArgumentError("attribute vector length " + std::to_string(attr_onehot.size()) + " != attribute count " +
                        std::to_string(cfg_.space.n()));
  }
  Var img = input_image_var(t, image);
  auto [f2, f3] = backbone_->stages(t, bind, img);

  EmbedVars out;
  Var fused_in;
  if (cfg_.model.enable_fusion) {
    out.f23 = fuse_graph(t, bind, f2, f3);
    fused_in = ops::concat_channels(t, out.f23, f3);
  } else {
    out.f23 = f3;
    fused_in = f3;
  }

  Var x = ops::conv2d(t, fused_in, bind("aga.projection.weight"), bind("aga.projection.bias"), 1, 0);
  if (cfg_.model.enable_asa) x = asa_graph(t, bind, x, attr_onehot, want_trace ? &out.trace.spatial_softmax : nullptr);
  if (cfg_.model.enable_sa) x = sa_graph(t, bind, x, want_trace ? &out.trace.sa_gate : nullptr);
  if (cfg_.model.enable_aca) x = aca_graph(t, bind, x, attr_onehot, want_trace ? &out.trace.aca_gate : nullptr);
  if (cfg_.model.enable_ca) x = ca_graph(t, bind, x, want_trace ? &out.trace.ca_gate : nullptr);
  out.embedding = ops::global_avg_pool(t, x);
  return out;
}

Var Model::classify_from_f23(Tape& t, Binder& bind, const Var& f23) const {
  const StageDims d3 = backbone_->f3_dims();
  if (f23->val().dim(0) != d3.channels) {
    throw ArgumentError("classification branch expects " + std::to_string(d3.channels) + " channels, got " +
                        std::to_string(f23->val().dim(0)));
  }
  Var b4 = backbone_->block4(t, bind, f23);
  Var pooled = ops::global_avg_pool(t, b4);
  return ops::linear(t, pooled, bind("head.fc.weight"), bind("head.fc.bias"));
}

Tensor Model::embed(const Tensor& image, int attribute, AttentionTrace* trace) const {
  Tape t(false);
  Binder bind(t, params_);
  EmbedVars ev = embed_graph(t, bind, image, encode_attribute(attribute, cfg_.space), trace != nullptr);
  if (trace) {
    if (ev.trace.spatial_softmax) trace->spatial_softmax = ev.trace.spatial_softmax->val();
    if (ev.trace.sa_gate) trace->sa_gate = ev.trace.sa_gate->val();
    if (ev.trace.aca_gate) trace->aca_gate = ev.trace.aca_gate->val();
    if (ev.trace.ca_gate) trace->ca_gate = ev.trace.ca_gate->val();
  }
  return ev.embedding->val();
}

Tensor Model::classify(const Tensor& image) const {
  Tape t(false);
  Binder bind(t, params_);
  Var img = input_image_var(t, image);
  auto [f2, f3] = backbone_->stages(t, bind, img);
  Var f23 = cfg_.model.enable_fusion ? fuse_graph(t, bind, f2, f3) : f3;
  return classify_from_f23(t, bind, f23)->val();
}

std::pair<Tensor, Tensor> Model::extract_stages(const Tensor& image) const {
  Tape t(false);
  Binder bind(t, params_);
  auto [f2, f3] = backbone_->stages(t, bind, input_image_var(t, image));
  return {f2->val(), f3->val()};
}

std::pair<Tensor, Tensor> Model::fuse_hierarchical(const Tensor& f2, const Tensor& f3) const {
  const StageDims d2 = backbone_->f2_dims();
  const StageDims d3 = backbone_->f3_dims();
  if (f2.shape() != std::vector<long>{d2.channels, d2.height, d2.width} ||
      f3.shape() != std::vector<long>{d3.channels, d3.height, d3.width}) {
    throw ArgumentError("fuse_hierarchical: stage maps do not match the backbone profile (F2 " +
                        Tensor::shape_str(f2.shape()) + ", F3 " + Tensor::shape_str(f3.shape()) + ")");
  }
  if (!cfg_.model.enable_fusion) throw StateError("hierarchical fusion is disabled in this configuration");
  Tape t(false);
  Binder bind(t, params_);
  Var f23 = fuse_graph(t, bind, t.constant(f2), t.constant(f3));
  Var fused = ops::concat_channels(t, f23, t.constant(f3));
  return {f23->val(), fused->val()};
}

Tensor Model::classify_attributes(const Tensor& f23) const {
  Tape t(false);
  Binder bind(t, params_);
  return classify_from_f23(t, bind, t.constant(f23))->val();
}

std::pair<Tensor, Tensor> Model::attribute_spatial_attention(const Tensor& f, int attribute) const {
  Tape t(false);
  Binder bind(t, params_);
  Var sm;
  Var out = asa_graph(t, bind, t.constant(f), encode_attribute(attribute, cfg_.space), &sm);
  return {out->val(), sm->val()};
}

std::pair<Tensor, Tensor> Model::spatial_attention(const Tensor& f) const {
  Tape t(false);
  Binder bind(t, params_);
  Var gate;
  Var out = sa_graph(t, bind, t.constant(f), &gate);
  return {out->val(), gate->val()};
}

std::pair<Tensor, Tensor> Model::attribute_channel_attention(const Tensor& f, int attribute) const {
  Tape t(false);
  Binder bind(t, params_);
  Var gate;
  Var out = aca_graph(t, bind, t.constant(f), encode_attribute(attribute, cfg_.space), &gate);
  return {out->val(), gate->val()};
}

std::pair<Tensor, Tensor> Model::channel_attention(const Tensor& f) const {
  Tape t(false);
  Binder bind(t, params_);
  Var gate;
  Var out = ca_graph(t, bind, t.constant(f), &gate);
  return {out->val(), gate->val()};
}

}  // namespace agman
