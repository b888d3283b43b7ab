#include "core/backbone.hpp"

#include "core/ops.hpp"

namespace agman {

namespace {

// conv 3x3 (pad 1) + bias + ReLU + 2x2 average pool per stage.
class TinyNet final : public Backbone {
 public:
  explicit TinyNet(const BackboneConfig& cfg) : channels_(cfg.channels), input_(cfg.input_size) {}

  StageDims f2_dims() const override { return stage_dims(2); }
  StageDims f3_dims() const override { return stage_dims(3); }
  StageDims f4_dims() const override { return stage_dims(4); }

  void register_params(ParamStore& store, uint64_t seed) const override {
    long cin = 3;
    for (int s = 1; s <= 4; ++s) {
      const long cout = channels_[static_cast<size_t>(s - 1)];
      const std::string base = "backbone.stage" + std::to_string(s) + ".conv.";
      store.add(base + "weight", uniform_init({cout, cin, 3, 3}, cin * 9, seed, base + "weight"));
      store.add(base + "bias", Tensor({cout}));
      cin = cout;
    }
  }

  std::pair<Var, Var> stages(Tape& t, Binder& bind, const Var& image) const override {
    Var x = image;
    Var f2;
    for (int s = 1; s <= 3; ++s) {
      x = stage(t, bind, x, s);
      if (s == 2) f2 = x;
    }
    return {f2, x};
  }

  Var block4(Tape& t, Binder& bind, const Var& x) const override { return stage(t, bind, x, 4); }

 private:
  Var stage(Tape& t, Binder& bind, const Var& x, int s) const {
    const std::string base = "backbone.stage" + std::to_string(s) + ".conv.";
    Var y = ops::conv2d(t, x, bind(base + "weight"), bind(base + "bias"), 1, 1);
    y = ops::relu(t, y);
    return ops::avg_pool2d(t, y, 2, 2);
  }

  StageDims stage_dims(int s) const {
    return {channels_[static_cast<size_t>(s - 1)], input_ >> s, input_ >> s};
  }

  std::vector<long> channels_;
  long input_;
};

// Standard 50-layer bottleneck residual network with frozen batch-norm
// statistics (running mean/var held constant; scale/shift trainable).
class ResNet50 final : public Backbone {
 public:
  explicit ResNet50(const BackboneConfig& cfg) : input_(cfg.input_size) {}

  StageDims f2_dims() const override { return {512, input_ / 8, input_ / 8}; }
  StageDims f3_dims() const override { return {1024, input_ / 16, input_ / 16}; }
  StageDims f4_dims() const override { return {2048, input_ / 32, input_ / 32}; }

  void register_params(ParamStore& store, uint64_t seed) const override {
    add_conv(store, seed, "backbone.conv1.weight", 64, 3, 7);
    add_bn(store, "backbone.bn1", 64);
    long cin = 64;
    for (int l = 1; l <= 4; ++l) {
      const long width = 64L << (l - 1);
      const long cout = width * 4;
      for (int b = 0; b < kBlocks[l - 1]; ++b) {
        const std::string base = "backbone.layer" + std::to_string(l) + "." + std::to_string(b) + ".";
        add_conv(store, seed, base + "conv1.weight", width, cin, 1);
        add_bn(store, base + "bn1", width);
        add_conv(store, seed, base + "conv2.weight", width, width, 3);
        add_bn(store, base + "bn2", width);
        add_conv(store, seed, base + "conv3.weight", cout, width, 1);
        add_bn(store, base + "bn3", cout);
        if (b == 0) {
          add_conv(store, seed, base + "downsample.conv.weight", cout, cin, 1);
          add_bn(store, base + "downsample.bn", cout);
        }
        cin = cout;
      }
    }
  }

  std::pair<Var, Var> stages(Tape& t, Binder& bind, const Var& image) const override {
    Var x = ops::conv2d(t, image, bind("backbone.conv1.weight"), nullptr, 2, 3);
    x = bn(t, bind, x, "backbone.bn1");
    x = ops::relu(t, x);
    x = ops::max_pool2d(t, x, 3, 2, 1);
    x = layer(t, bind, x, 1);
    Var f2 = layer(t, bind, x, 2);
    Var f3 = layer(t, bind, f2, 3);
    return {f2, f3};
  }

  Var block4(Tape& t, Binder& bind, const Var& x) const override { return layer(t, bind, x, 4); }

 private:
  static constexpr int kBlocks[4] = {3, 4, 6, 3};

  static void add_conv(ParamStore& store, uint64_t seed, const std::string& name, long cout, long cin, long k) {
    store.add(name, uniform_init({cout, cin, k, k}, cin * k * k, seed, name));
  }

  static void add_bn(ParamStore& store, const std::string& base, long c) {
    store.add(base + ".weight", Tensor::full({c}, 1.0));
    store.add(base + ".bias", Tensor({c}));
    store.add(base + ".running_mean", Tensor({c}), /*trainable=*/false);
    store.add(base + ".running_var", Tensor::full({c}, 1.0), /*trainable=*/false);
  }

  static Var bn(Tape& t, Binder& bind, const Var& x, const std::string& base) {
    return ops::bn_frozen(t, x, bind(base + ".weight"), bind(base + ".bias"), bind.raw(base + ".running_mean"),
                          bind.raw(base + ".running_var"));
  }

  Var layer(Tape& t, Binder& bind, Var x, int l) const {
    for (int b = 0; b < kBlocks[l - 1]; ++b) {
      const std::string base = "backbone.layer" + std::to_string(l) + "." + std::to_string(b) + ".";
      const long stride = (b == 0 && l > 1) ? 2 : 1;
      Var shortcut = x;
      if (b == 0) {
        shortcut = ops::conv2d(t, x, bind(base + "downsample.conv.weight"), nullptr, stride, 0);
        shortcut = bn(t, bind, shortcut, base + "downsample.bn");
      }
      Var y = ops::conv2d(t, x, bind(base + "conv1.weight"), nullptr, 1, 0);
      y = ops::relu(t, bn(t, bind, y, base + "bn1"));
      y = ops::conv2d(t, y, bind(base + "conv2.weight"), nullptr, stride, 1);
      y = ops::relu(t, bn(t, bind, y, base + "bn2"));
      y = ops::conv2d(t, y, bind(base + "conv3.weight"), nullptr, 1, 0);
      y = bn(t, bind, y, base + "bn3");
      x = ops::relu(t, ops::add(t, y, shortcut));
    }
    return x;
  }

  long input_;
};

}  // namespace

std::unique_ptr<Backbone> Backbone::create(const BackboneConfig& cfg) {
  if (cfg.profile == "tinynet") return std::make_unique<TinyNet>(cfg);
  if (cfg.profile == "resnet50") return std::make_unique<ResNet50>(cfg);
  throw ConfigError("unknown backbone profile: " + cfg.profile);
}

}  // namespace agman
