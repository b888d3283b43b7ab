#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <set>

#include "core/data.hpp"
#include "core/error.hpp"
#include "core/image.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace agman;

namespace {

AttributeSpace demo_space() {
  AttributeSpace s;
  s.names = {"band_a", "band_b", "band_c"};
  s.sub_class_counts = {4, 3, 2};
  return s;
}

}  // namespace

TEST_CASE("encode_attribute") {
  AttributeSpace s8;
  s8.names = {"a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7"};
  s8.sub_class_counts = std::vector<int>(8, 2);
  const Tensor v = encode_attribute(3, s8);
  CHECK(v.shape() == std::vector<long>{8});
  for (long i = 0; i < 8; ++i) CHECK(v[i] == (i == 3 ? 1.0 : 0.0));

  AttributeSpace s1;
  s1.names = {"only"};
  s1.sub_class_counts = {2};
  const Tensor w = encode_attribute(0, s1);
  CHECK(w.size() == 1);
  CHECK(w[0] == 1.0);

  CHECK_THROWS_AS(encode_attribute(8, s8), ArgumentError);
  CHECK_THROWS_AS(encode_attribute(-1, s8), ArgumentError);

  // one-hot property over all indices
  for (int a = 0; a < 8; ++a) {
    const Tensor t = encode_attribute(a, s8);
    double sum = 0;
    for (long i = 0; i < t.size(); ++i) {
      CHECK((t[i] == 0.0 || t[i] == 1.0));
      sum += t[i];
    }
    CHECK(sum == 1.0);
  }
}

TEST_CASE("attribute space validation") {
  AttributeSpace bad;
  bad.names = {"x"};
  bad.sub_class_counts = {1};  // one sub-class admits no negative
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.sub_class_counts = {2};
  CHECK_NOTHROW(bad.validate());
  AttributeSpace dup;
  dup.names = {"x", "x"};
  dup.sub_class_counts = {2, 2};
  CHECK_THROWS_AS(dup.validate(), ValidationError);
}

TEST_CASE("manifest loading") {
  testutil::TempDir dir("manifest");
  const AttributeSpace space = demo_space();
  const std::string path = (dir.path() / "m.jsonl").string();

  SUBCASE("well-formed three lines keep file order") {
    std::ofstream out(path);
    out << R"({"id":"b","path":"b.ppm","labels":{"band_a":1}})" << "\n";
    out << R"({"id":"a","path":"a.ppm","labels":{"band_b":2,"band_c":0}})" << "\n";
    out << R"({"id":"c","path":"c.ppm","labels":{}})" << "\n";
    out.close();
    const DatasetSplit split = load_manifest(path, space);
    REQUIRE(split.records.size() == 3);
    CHECK(split.records[0].id == "b");
    CHECK(split.records[1].id == "a");
    CHECK(split.records[2].id == "c");
    CHECK(split.records[0].labels.at(0) == 1);
    CHECK(split.records[1].labels.at(1) == 2);
    CHECK(split.records[1].labels.at(2) == 0);
    CHECK(split.records[2].labels.empty());
  }

  SUBCASE("out-of-range sub-class names the line") {
    std::ofstream out(path);
    out << R"({"id":"a","path":"a.ppm","labels":{"band_b":1}})" << "\n";
    out << R"({"id":"bad","path":"b.ppm","labels":{"band_b":11}})" << "\n";
    out.close();
    try {
      load_manifest(path, space);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("bad") != std::string::npos);
    }
  }

  SUBCASE("empty file yields empty split") {
    std::ofstream(path).close();
    CHECK(load_manifest(path, space).records.empty());
  }

  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(load_manifest((dir.path() / "nope.jsonl").string(), space), IoError);
  }

  SUBCASE("malformed line is a parse error with the line number") {
    std::ofstream out(path);
    out << R"({"id":"a","path":"a.ppm","labels":{}})" << "\n";
    out << "{not json\n";
    out.close();
    try {
      load_manifest(path, space);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("duplicate ids rejected") {
    std::ofstream out(path);
    out << R"({"id":"a","path":"a.ppm","labels":{}})" << "\n";
    out << R"({"id":"a","path":"b.ppm","labels":{}})" << "\n";
    out.close();
    CHECK_THROWS_AS(load_manifest(path, space), ValidationError);
  }
}

TEST_CASE("synthetic generator counting and determinism") {
  const AttributeSpace space = demo_space();  // lcm(4,3,2) = 12

  SUBCASE("record count and per-cell floor") {
    CHECK(synthetic_record_count(space, 1) == 12);
    CHECK(synthetic_record_count(space, 4) == 48);
    const DatasetSplit split = generate_synthetic(space, 4, 16, 9);
    CHECK(split.records.size() == 48);
    // exact per-cell counts: N / counts[i]
    for (int a = 0; a < space.n(); ++a) {
      std::map<int, int> cell;
      for (const auto& rec : split.records) {
        CHECK(rec.labeled_for(a));
        cell[rec.labels.at(a)]++;
      }
      CHECK(static_cast<int>(cell.size()) == space.sub_class_counts[a]);
      for (const auto& [sub, count] : cell) CHECK(count == 48 / space.sub_class_counts[a]);
    }
  }

  SUBCASE("same seed reproduces pixels bit-for-bit; different seed differs") {
    const DatasetSplit s1 = generate_synthetic(space, 2, 16, 123);
    const DatasetSplit s2 = generate_synthetic(space, 2, 16, 123);
    const DatasetSplit s3 = generate_synthetic(space, 2, 16, 124);
    REQUIRE(s1.records.size() == s2.records.size());
    bool any_diff_seed124 = false;
    for (size_t i = 0; i < s1.records.size(); ++i) {
      const Tensor p1 = load_pixels(s1.records[i], space, 16);
      const Tensor p2 = load_pixels(s2.records[i], space, 16);
      REQUIRE(p1.size() == p2.size());
      bool equal_12 = true;
      for (long j = 0; j < p1.size(); ++j) equal_12 = equal_12 && p1[j] == p2[j];
      CHECK(equal_12);
      const Tensor p3 = load_pixels(s3.records[i], space, 16);
      for (long j = 0; j < p1.size(); ++j) {
        if (p1[j] != p3[j]) {
          any_diff_seed124 = true;
          break;
        }
      }
    }
    CHECK(any_diff_seed124);
  }

  SUBCASE("preconditions") {
    CHECK_THROWS_AS(generate_synthetic(space, 0, 16, 1), ArgumentError);
    CHECK_THROWS_AS(generate_synthetic(space, 1, 15, 1), ArgumentError);
  }
}

TEST_CASE("synthetic round-trips through manifest + PPM") {
  testutil::TempDir dir("roundtrip");
  const AttributeSpace space = demo_space();
  const DatasetSplit split = generate_synthetic(space, 1, 16, 77);
  const std::string manifest = save_manifest(split, space, dir.str());
  const DatasetSplit loaded = load_manifest(manifest, space);

  REQUIRE(loaded.records.size() == split.records.size());
  for (size_t i = 0; i < split.records.size(); ++i) {
    CHECK(loaded.records[i].id == split.records[i].id);
    CHECK(loaded.records[i].labels == split.records[i].labels);
    const Tensor a = load_pixels(split.records[i], space, 16);
    const Tensor b = load_pixels(loaded.records[i], space, 16);
    REQUIRE(a.size() == b.size());
    bool equal = true;
    for (long j = 0; j < a.size(); ++j) equal = equal && a[j] == b[j];  // 8-bit grid is PPM-exact
    CHECK(equal);
  }
}

TEST_CASE("ppm io round trip") {
  testutil::TempDir dir("ppm");
  Tensor img({3, 4, 6});
  Rng rng(5);
  for (long i = 0; i < img.size(); ++i) img[i] = static_cast<double>(rng.uniform_below(256)) / 255.0;
  const std::string path = (dir.path() / "x.ppm").string();
  write_ppm(path, img);
  const Tensor back = read_ppm(path);
  REQUIRE(back.shape() == img.shape());
  for (long i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);
}

TEST_CASE("triplet sampling") {
  const AttributeSpace space = demo_space();

  SUBCASE("forced structure: two-member positive class and one negative") {
    AttributeSpace s;
    s.names = {"attr"};
    s.sub_class_counts = {2};
    DatasetSplit split;
    for (int i = 0; i < 3; ++i) {
      ImageRecord r;
      r.id = "img" + std::to_string(i + 1);
      r.source = SyntheticSource{0, i, 16};
      r.labels[0] = i < 2 ? 0 : 1;
      split.records.push_back(r);
    }
    split.rebuild_index();
    const auto trips = sample_triplets(split, s, 0, 1, 0);
    REQUIRE(trips.size() == 1);
    const Triplet& t = trips[0];
    CHECK(((t.anchor == "img1" && t.positive == "img2") || (t.anchor == "img2" && t.positive == "img1")));
    CHECK(t.negative == "img3");
    CHECK(t.attribute == 0);
  }

  SUBCASE("determinism: same seed gives identical lists") {
    const DatasetSplit split = generate_synthetic(space, 2, 16, 3);
    const auto t1 = sample_triplets(split, space, 1, 40, 7);
    const auto t2 = sample_triplets(split, space, 1, 40, 7);
    REQUIRE(t1.size() == t2.size());
    for (size_t i = 0; i < t1.size(); ++i) {
      CHECK(t1[i].anchor == t2[i].anchor);
      CHECK(t1[i].positive == t2[i].positive);
      CHECK(t1[i].negative == t2[i].negative);
      CHECK(t1[i].attribute == t2[i].attribute);
    }
  }

  SUBCASE("triplet invariants hold on every sample") {
    const DatasetSplit split = generate_synthetic(space, 3, 16, 11);
    for (int a = 0; a < space.n(); ++a) {
      for (const Triplet& t : sample_triplets(split, space, a, 60, 13)) {
        const auto& ra = split.require(t.anchor);
        const auto& rp = split.require(t.positive);
        const auto& rn = split.require(t.negative);
        CHECK(t.anchor != t.positive);
        CHECK(ra.labels.at(a) == rp.labels.at(a));
        CHECK(ra.labels.at(a) != rn.labels.at(a));
      }
    }
  }

  SUBCASE("single-sub-class pool cannot sample") {
    AttributeSpace s;
    s.names = {"attr"};
    s.sub_class_counts = {3};
    DatasetSplit split;
    for (int i = 0; i < 4; ++i) {
      ImageRecord r;
      r.id = "r" + std::to_string(i);
      r.source = SyntheticSource{0, i, 16};
      r.labels[0] = 1;  // everyone in one sub-class
      split.records.push_back(r);
    }
    split.rebuild_index();
    try {
      sample_triplets(split, s, 0, 1, 0);
      FAIL("expected SamplingError");
    } catch (const SamplingError& e) {
      CHECK(std::string(e.what()).find("attr") != std::string::npos);
    }
  }
}

TEST_CASE("triplet cache file round trip") {
  testutil::TempDir dir("tcache");
  const AttributeSpace space = demo_space();
  const DatasetSplit split = generate_synthetic(space, 2, 16, 3);
  const auto trips = sample_triplets(split, space, 2, 25, 99);
  const std::string path = (dir.path() / "triplets.jsonl").string();
  save_triplets(path, trips, space);
  const auto loaded = load_triplets(path, space);
  REQUIRE(loaded.size() == trips.size());
  for (size_t i = 0; i < trips.size(); ++i) {
    CHECK(loaded[i].anchor == trips[i].anchor);
    CHECK(loaded[i].positive == trips[i].positive);
    CHECK(loaded[i].negative == trips[i].negative);
    CHECK(loaded[i].attribute == trips[i].attribute);
  }
}

TEST_CASE("nearest-centroid on raw pixels beats chance for every attribute") {
  const AttributeSpace space = demo_space();
  const DatasetSplit split = generate_synthetic(space, 4, 32, 21);

  for (int a = 0; a < space.n(); ++a) {
    const int n_sub = space.sub_class_counts[a];
    std::vector<Tensor> centroid(n_sub);
    std::vector<long> count(n_sub, 0);
    for (const auto& rec : split.records) {
      const Tensor px = load_pixels(rec, space, 32);
      const int k = rec.labels.at(a);
      if (count[k] == 0) centroid[k] = Tensor::zeros(px.shape());
      for (long i = 0; i < px.size(); ++i) centroid[k][i] += px[i];
      count[k]++;
    }
    for (int k = 0; k < n_sub; ++k)
      for (long i = 0; i < centroid[k].size(); ++i) centroid[k][i] /= static_cast<double>(count[k]);

    long correct = 0;
    for (const auto& rec : split.records) {
      const Tensor px = load_pixels(rec, space, 32);
      int best = -1;
      double best_d = 0;
      for (int k = 0; k < n_sub; ++k) {
        double d = 0;
        for (long i = 0; i < px.size(); ++i) d += (px[i] - centroid[k][i]) * (px[i] - centroid[k][i]);
        if (best < 0 || d < best_d) {
          best = k;
          best_d = d;
        }
      }
      if (best == rec.labels.at(a)) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(split.records.size());
    const double chance = 1.0 / n_sub;
    INFO("attribute ", space.names[a], " accuracy ", accuracy);
    CHECK(accuracy > chance + 0.2);
  }
}

TEST_CASE("eval partition is disjoint, deterministic, and seed-sensitive") {
  const AttributeSpace space = demo_space();
  const DatasetSplit split = generate_synthetic(space, 2, 16, 5);
  const auto p1 = make_eval_partition(split, space, 0.25, 31);
  const auto p2 = make_eval_partition(split, space, 0.25, 31);
  const auto p3 = make_eval_partition(split, space, 0.25, 32);

  REQUIRE(p1.size() == static_cast<size_t>(space.n()));
  for (const auto& [attr, pool] : p1) {
    std::set<std::string> q(pool.query_ids.begin(), pool.query_ids.end());
    std::set<std::string> c(pool.candidate_ids.begin(), pool.candidate_ids.end());
    CHECK(!q.empty());
    CHECK(!c.empty());
    for (const auto& id : q) CHECK(c.count(id) == 0);
    CHECK(q.size() + c.size() == split.records.size());  // fully labeled dataset
    CHECK(pool.query_ids == p2.at(attr).query_ids);
    CHECK(pool.candidate_ids == p2.at(attr).candidate_ids);
  }
  bool seed_changes_something = false;
  for (const auto& [attr, pool] : p1) {
    if (pool.query_ids != p3.at(attr).query_ids) seed_changes_something = true;
  }
  CHECK(seed_changes_something);
}
