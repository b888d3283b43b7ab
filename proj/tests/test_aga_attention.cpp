#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "core/aga.hpp"
#include "core/error.hpp"
#include "core/model.hpp"
#include "core/ops.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace agman;

namespace {

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor one_hot(int idx, long n) {
  Tensor t({n});
  t[idx] = 1.0;
  return t;
}

// root of w*sigmoid(w) = 1, solved to machine precision
double solve_unit_gate() {
  double w = 1.5;
  for (int i = 0; i < 64; ++i) {
    const double s = sigma(w);
    const double g = w * s - 1.0;
    const double gp = s * (1.0 + w * (1.0 - s));
    w -= g / gp;
  }
  return w;
}

}  // namespace

TEST_CASE("ASA: zero attribute column gives the uniform softmax") {
  RunConfig cfg = testutil::micro_config();  // c=4, c'=2, h=w=2, n=2
  Model model(cfg);
  model.params().get("aga.asa.attr.weight").fill(0.0);  // W_a a = 0 for every attribute
  // spatial gain is ones at init

  const Tensor f = testutil::random_tensor({4, 2, 2}, 31);
  const auto [f_s, softmax_map] = model.attribute_spatial_attention(f, 0);
  CHECK(f_s.shape() == f.shape());
  for (long i = 0; i < softmax_map.size(); ++i) CHECK(softmax_map[i] == doctest::Approx(0.25).epsilon(1e-12));
  for (long i = 0; i < f.size(); ++i) CHECK(f_s[i] == doctest::Approx(f[i] / 4.0).epsilon(1e-12));
}

TEST_CASE("ASA: single-position map reduces to identity") {
  // standalone stage on a 1x1 grid: softmax over one position is [1]
  Tape t(false);
  const Tensor f = testutil::random_tensor({2, 1, 1}, 32);
  AsaWeights w{t.constant(testutil::random_tensor({1, 2, 1, 1}, 33)), t.constant(Tensor({1})),
               t.constant(testutil::random_tensor({1, 3}, 34)), t.constant(Tensor::full({1, 1}, 1.0))};
  Var sm;
  Var out = attribute_spatial_attention_stage(t, t.constant(f), one_hot(1, 3), w, &sm);
  CHECK(sm->val().size() == 1);
  CHECK(sm->val()[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (long i = 0; i < f.size(); ++i) CHECK(out->val()[i] == doctest::Approx(f[i]).epsilon(1e-15));
}

TEST_CASE("ASA: hand-set weights reproduce the softmax of (0, ln2, 0, 0)") {
  // c=2, c'=1, h=w=2. conv selects channel 0; the attribute gate is solved so
  // sigmoid(w)*w = 1; channel 0 carries atanh(ln 2) at position 1.
  const double wa_value = solve_unit_gate();
  const double ln2 = std::log(2.0);

  Tape t(false);
  Tensor f({2, 2, 2});
  f.at(0, 0, 1) = std::atanh(ln2);
  f.at(1, 0, 0) = 0.9;  // ignored by the conv weights
  f.at(1, 1, 1) = -0.4;

  Tensor conv_w({1, 2, 1, 1}, {1.0, 0.0});
  Tensor attr_w({1, 2}, {wa_value, 0.0});
  AsaWeights w{t.constant(conv_w), t.constant(Tensor({1})), t.constant(attr_w), t.constant(Tensor::full({2, 2}, 1.0))};
  Var sm;
  attribute_spatial_attention_stage(t, t.constant(f), one_hot(0, 2), w, &sm);

  // inner products (0, ln2, 0, 0) -> softmax (1/5, 2/5, 1/5, 1/5)
  CHECK(sm->val()[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sm->val()[1] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(sm->val()[2] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sm->val()[3] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("ASA rejects a non-one-hot attribute vector") {
  Tape t(false);
  AsaWeights w{t.constant(testutil::random_tensor({1, 2, 1, 1}, 35)), t.constant(Tensor({1})),
               t.constant(testutil::random_tensor({1, 2}, 36)), t.constant(Tensor::full({1, 1}, 1.0))};
  const Tensor f = testutil::random_tensor({2, 1, 1}, 37);
  Tensor bad({2}, {0.5, 0.5});
  CHECK_THROWS_AS(attribute_spatial_attention_stage(t, t.constant(f), bad, w, nullptr), ArgumentError);
  Tensor two_hot({2}, {1.0, 1.0});
  CHECK_THROWS_AS(attribute_spatial_attention_stage(t, t.constant(f), two_hot, w, nullptr), ArgumentError);
}

TEST_CASE("SA: zero convolution gives the 0.5 gate") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  model.params().get("aga.sa.conv.weight").fill(0.0);
  model.params().get("aga.sa.conv.bias").fill(0.0);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 41);
  const auto [out, gate] = model.spatial_attention(f);
  for (long i = 0; i < gate.size(); ++i) CHECK(gate[i] == 0.5);
  for (long i = 0; i < f.size(); ++i) CHECK(out[i] == doctest::Approx(0.5 * f[i]).epsilon(1e-15));
}

TEST_CASE("SA: single-channel map cancels under (1,-1) weights") {
  Tape t(false);
  SaWeights w{t.constant(Tensor({1, 2, 1, 1}, {1.0, -1.0})), t.constant(Tensor({1}))};
  const Tensor f = testutil::random_tensor({1, 2, 3}, 42);  // avg map == max map == the channel
  Var gate;
  spatial_attention_stage(t, t.constant(f), w, &gate);
  for (long i = 0; i < gate->val().size(); ++i) CHECK(gate->val()[i] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("SA: hand-computed average map on a 1x2 grid") {
  // channels (1,3) and (5,7): position-wise avg (3,5), max (5,7); the conv
  // picks the average map only.
  Tape t(false);
  Tensor f({2, 1, 2}, {1.0, 3.0, 5.0, 7.0});
  SaWeights w{t.constant(Tensor({1, 2, 1, 1}, {1.0, 0.0})), t.constant(Tensor({1}))};
  Var gate;
  Var out = spatial_attention_stage(t, t.constant(f), w, &gate);
  CHECK(gate->val()[0] == doctest::Approx(sigma(3.0)).epsilon(1e-12));
  CHECK(gate->val()[1] == doctest::Approx(sigma(5.0)).epsilon(1e-12));
  CHECK(out->val().at(0, 0, 0) == doctest::Approx(1.0 * sigma(3.0)).epsilon(1e-12));
  CHECK(out->val().at(1, 0, 1) == doctest::Approx(7.0 * sigma(5.0)).epsilon(1e-12));
}

TEST_CASE("ACA: zero bottleneck gives the 0.5 gate") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  model.params().get("aga.aca.fc1.weight").fill(0.0);
  model.params().get("aga.aca.fc2.weight").fill(0.0);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 51);
  const auto [out, gate] = model.attribute_channel_attention(f, 1);
  for (long i = 0; i < gate.size(); ++i) CHECK(gate[i] == 0.5);
  for (long i = 0; i < f.size(); ++i) CHECK(out[i] == doctest::Approx(0.5 * f[i]).epsilon(1e-15));
}

TEST_CASE("ACA: zero attribute column leaves the gate image-driven only") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  model.params().get("aga.aca.attr.weight").fill(0.0);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 52);
  const auto [out0, gate0] = model.attribute_channel_attention(f, 0);
  const auto [out1, gate1] = model.attribute_channel_attention(f, 1);
  for (long i = 0; i < gate0.size(); ++i) CHECK(gate0[i] == gate1[i]);
}

TEST_CASE("ACA: identity-extended bottleneck on a pooled (1,0) map") {
  Tape t(false);
  // c=2 map with pooled vector (1,0)
  Tensor f({2, 1, 2}, {2.0, 0.0, 0.0, 0.0});
  Tensor fc1({2, 4}, {0, 0, 1, 0, 0, 0, 0, 1});  // identity on the pooled half
  Tensor fc2({2, 2}, {1, 0, 0, 1});
  AcaWeights w{t.constant(Tensor({2, 3})),  // zero attribute transform -> q(a) = 0
               t.constant(fc1), t.constant(fc2), t.constant(Tensor::full({2}, 1.0))};
  Var gate;
  attribute_channel_attention_stage(t, t.constant(f), one_hot(2, 3), w, &gate);
  CHECK(gate->val()[0] == doctest::Approx(0.7310585786300049).epsilon(1e-9));
  CHECK(gate->val()[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("CA: zero weights give the 0.5 gate and zero input stays zero") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  model.params().get("aga.ca.reduce.weight").fill(0.0);
  model.params().get("aga.ca.expand.weight").fill(0.0);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 61);
  const auto [out, gate] = model.channel_attention(f);
  for (long i = 0; i < gate.size(); ++i) CHECK(gate[i] == 0.5);
  for (long i = 0; i < f.size(); ++i) CHECK(out[i] == doctest::Approx(0.5 * f[i]).epsilon(1e-15));

  Model fresh(testutil::micro_config());
  const auto [zout, zgate] = fresh.channel_attention(Tensor({4, 2, 2}));
  for (long i = 0; i < zgate.size(); ++i) CHECK(zgate[i] == 0.5);  // pooled zeros -> sigmoid(0)
  for (long i = 0; i < zout.size(); ++i) CHECK(zout[i] == 0.0);
}

TEST_CASE("CA: identity-block reduction on a constant-channel map") {
  Tape t(false);
  // c=4, r=2: reduce keeps channels 1..2, expand writes them back
  Tensor reduce({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
  Tensor expand({4, 2}, {1, 0, 0, 1, 0, 0, 0, 0});
  Tensor f({4, 1, 2});
  const double pooled[4] = {0.5, -0.25, 3.0, 4.0};
  for (long c = 0; c < 4; ++c) {
    f.at(c, 0, 0) = pooled[c];
    f.at(c, 0, 1) = pooled[c];
  }
  CaWeights w{t.constant(reduce), t.constant(expand)};
  Var gate;
  channel_attention_stage(t, t.constant(f), w, &gate);
  CHECK(gate->val()[0] == doctest::Approx(sigma(0.5)).epsilon(1e-12));   // relu passes 0.5
  CHECK(gate->val()[1] == doctest::Approx(sigma(0.0)).epsilon(1e-12));   // relu clips -0.25
  CHECK(gate->val()[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gate->val()[3] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("embed: width, purity, and attribute selectivity") {
  RunConfig cfg = testutil::tiny_config({"band_a", "band_b", "band_c"}, {4, 3, 2}, 13);
  Model model(cfg);
  const Tensor img = testutil::random_tensor({3, 64, 64}, 71, 0.0, 1.0);

  const Tensor e0 = model.embed(img, 0);
  CHECK(e0.shape() == std::vector<long>{128});  // tinynet profile width
  CHECK(e0.all_finite());

  const Tensor e0_again = model.embed(img, 0);
  bool identical = true;
  for (long i = 0; i < e0.size(); ++i) identical = identical && e0[i] == e0_again[i];
  CHECK(identical);

  const Tensor e1 = model.embed(img, 1);
  bool any_diff = false;
  for (long i = 0; i < e0.size(); ++i) any_diff = any_diff || e0[i] != e1[i];
  CHECK(any_diff);
}

TEST_CASE("attention invariants over random draws") {
  RunConfig cfg = testutil::micro_config();
  for (int trial = 0; trial < 25; ++trial) {
    cfg.train.seed = 1000 + static_cast<uint64_t>(trial);
    Model model(cfg);
    const Tensor img = testutil::random_tensor({3, 16, 16}, 5000 + trial, 0.0, 1.0);
    const int attr = trial % 2;
    AttentionTrace trace;
    const Tensor emb = model.embed(img, attr, &trace);
    CHECK(emb.size() == 4);

    REQUIRE(trace.spatial_softmax.has_value());
    REQUIRE(trace.sa_gate.has_value());
    REQUIRE(trace.aca_gate.has_value());
    REQUIRE(trace.ca_gate.has_value());
    CHECK(trace.spatial_softmax->shape() == std::vector<long>{2, 2});
    CHECK(trace.sa_gate->shape() == std::vector<long>{2, 2});
    CHECK(trace.aca_gate->shape() == std::vector<long>{4});
    CHECK(trace.ca_gate->shape() == std::vector<long>{4});

    double sum = 0;
    for (long i = 0; i < trace.spatial_softmax->size(); ++i) {
      CHECK((*trace.spatial_softmax)[i] >= 0.0);
      sum += (*trace.spatial_softmax)[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);
    for (const auto* gate : {&*trace.sa_gate, &*trace.aca_gate, &*trace.ca_gate}) {
      for (long i = 0; i < gate->size(); ++i) {
        CHECK((*gate)[i] > 0.0);
        CHECK((*gate)[i] < 1.0);
      }
    }
  }
}

TEST_CASE("every attention stage preserves feature map shape") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 81);
  CHECK(model.attribute_spatial_attention(f, 0).first.shape() == f.shape());
  CHECK(model.spatial_attention(f).first.shape() == f.shape());
  CHECK(model.attribute_channel_attention(f, 1).first.shape() == f.shape());
  CHECK(model.channel_attention(f).first.shape() == f.shape());
}

TEST_CASE("attribute transform: equal columns collapse, distinct columns separate") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 91);

  // equal columns -> identical maps, bitwise
  Tensor& wa = model.params().get("aga.asa.attr.weight");  // [2,2]
  wa.at(0, 1) = wa.at(0, 0);
  wa.at(1, 1) = wa.at(1, 0);
  const auto [s0, m0] = model.attribute_spatial_attention(f, 0);
  const auto [s1, m1] = model.attribute_spatial_attention(f, 1);
  bool same = true;
  for (long i = 0; i < m0.size(); ++i) same = same && m0[i] == m1[i];
  CHECK(same);

  // random distinct columns -> maps differ
  Model model2(testutil::micro_config());
  const auto [t0, n0] = model2.attribute_spatial_attention(f, 0);
  const auto [t1, n1] = model2.attribute_spatial_attention(f, 1);
  bool any_diff = false;
  for (long i = 0; i < n0.size(); ++i) any_diff = any_diff || n0[i] != n1[i];
  CHECK(any_diff);
}

TEST_CASE("ASA positional equivariance under spatial permutation") {
  RunConfig cfg = testutil::micro_config();
  Model model(cfg);
  const Tensor f = testutil::random_tensor({4, 2, 2}, 95);

  // permutation of the 4 positions
  const long perm[4] = {2, 0, 3, 1};
  Tensor fp({4, 2, 2});
  for (long c = 0; c < 4; ++c)
    for (long p = 0; p < 4; ++p) fp[c * 4 + perm[p]] = f[c * 4 + p];

  const auto [o1, m] = model.attribute_spatial_attention(f, 0);
  const auto [o2, mp] = model.attribute_spatial_attention(fp, 0);
  for (long p = 0; p < 4; ++p) CHECK(mp[perm[p]] == doctest::Approx(m[p]).epsilon(1e-12));
}

TEST_CASE("AGA stack gradients match central finite differences") {
  // tiny configuration: c=4, c'=2, h=w=2, n=2
  ParamStore store;
  const uint64_t seed = 9;
  store.add("asa.conv.weight", uniform_init({2, 4, 1, 1}, 4, seed, "asa.conv.weight"));
  store.add("asa.conv.bias", testutil::random_tensor({2}, 96, -0.2, 0.2));
  store.add("asa.attr.weight", uniform_init({2, 2}, 2, seed, "asa.attr.weight"));
  store.add("asa.spatial_gain", testutil::random_tensor({2, 2}, 97, 0.5, 1.5));
  store.add("sa.conv.weight", uniform_init({1, 2, 1, 1}, 2, seed, "sa.conv.weight"));
  store.add("sa.conv.bias", testutil::random_tensor({1}, 98, -0.2, 0.2));
  store.add("aca.attr.weight", uniform_init({4, 2}, 2, seed, "aca.attr.weight"));
  store.add("aca.fc1.weight", uniform_init({2, 8}, 8, seed, "aca.fc1.weight"));
  store.add("aca.fc2.weight", uniform_init({4, 2}, 2, seed, "aca.fc2.weight"));
  store.add("aca.channel_gain", testutil::random_tensor({4}, 99, 0.8, 1.2));
  store.add("ca.reduce.weight", uniform_init({2, 4}, 4, seed, "ca.reduce.weight"));
  store.add("ca.expand.weight", uniform_init({4, 2}, 2, seed, "ca.expand.weight"));
  store.add("input", testutil::random_tensor({4, 2, 2}, 100));

  const Tensor attr = one_hot(1, 2);
  const Tensor readout = testutil::random_tensor({4}, 101);

  auto build = [&](Tape& t, Binder& bind) {
    AsaWeights asa{bind("asa.conv.weight"), bind("asa.conv.bias"), bind("asa.attr.weight"), bind("asa.spatial_gain")};
    SaWeights sa{bind("sa.conv.weight"), bind("sa.conv.bias")};
    AcaWeights aca{bind("aca.attr.weight"), bind("aca.fc1.weight"), bind("aca.fc2.weight"), bind("aca.channel_gain")};
    CaWeights ca{bind("ca.reduce.weight"), bind("ca.expand.weight")};
    Var x = bind("input");
    x = attribute_spatial_attention_stage(t, x, attr, asa, nullptr);
    x = spatial_attention_stage(t, x, sa, nullptr);
    x = attribute_channel_attention_stage(t, x, attr, aca, nullptr);
    x = channel_attention_stage(t, x, ca, nullptr);
    return ops::dot(t, ops::global_avg_pool(t, x), t.constant(readout));
  };

  auto grads = testutil::analytic_gradients(store, build);
  CHECK(grads.size() == store.size());  // every group receives gradient
  auto objective = [&] {
    Tape t(false);
    Binder bind(t, store);
    return build(t, bind)->val()[0];
  };
  const auto r = testutil::check_param_gradients(store, grads, objective, 1e-5);
  MESSAGE("checked ", r.checked, " entries; worst rel err ", r.worst_rel, " at ", r.worst_param);
  CHECK(r.worst_rel < 1e-4);
}

TEST_CASE("disabling all four stages reduces embed to pooled projected fusion") {
  RunConfig cfg = testutil::tiny_config({"u", "v"}, {2, 2}, 17);
  cfg.backbone.input_size = 16;
  cfg.backbone.channels = {2, 3, 4, 8};
  cfg.model.embedding_size = 4;
  cfg.model.asa_channels = 2;
  cfg.model.aca_hidden = 4;
  cfg.model.ca_reduction = 2;
  cfg.model.enable_asa = cfg.model.enable_sa = cfg.model.enable_aca = cfg.model.enable_ca = false;
  cfg.synth.image_size = 16;
  cfg.validate();
  Model model(cfg);

  const Tensor img = testutil::random_tensor({3, 16, 16}, 103, 0.0, 1.0);
  const Tensor emb = model.embed(img, 0);

  // identity-chain expectation: GAP(conv1x1(concat(F23, F3)))
  const auto [f2, f3] = model.extract_stages(img);
  const auto [f23, fused] = model.fuse_hierarchical(f2, f3);
  Tape t(false);
  Var proj = ops::conv2d(t, t.constant(fused), t.constant(model.params().get("aga.projection.weight")),
                         t.constant(model.params().get("aga.projection.bias")), 1, 0);
  Var pooled = ops::global_avg_pool(t, proj);
  REQUIRE(emb.size() == pooled->val().size());
  for (long i = 0; i < emb.size(); ++i) CHECK(emb[i] == doctest::Approx(pooled->val()[i]).epsilon(1e-14));

  AttentionTrace trace;
  model.embed(img, 0, &trace);
  CHECK(!trace.spatial_softmax.has_value());
  CHECK(!trace.sa_gate.has_value());
  CHECK(!trace.aca_gate.has_value());
  CHECK(!trace.ca_gate.has_value());
}
