#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "agman/agman.h"
#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMicroConfig = R"({
  "attributes": [
    {"name": "alpha", "sub_classes": 3},
    {"name": "beta", "sub_classes": 2}
  ],
  "backbone": {"profile": "tinynet", "input_size": 16, "channels": [2, 3, 4, 8]},
  "model": {"embedding_size": 4, "asa_channels": 2, "aca_hidden": 4, "ca_reduction": 2},
  "train": {"epochs": 1, "batch_size": 4, "triplets_per_epoch": 8, "seed": 3},
  "synth": {"per_subclass": 2, "image_size": 16, "seed": 11},
  "eval": {"query_fraction": 0.25, "seed": 9, "triplet_count": 12}
})";

struct Config {
  agman_config* ptr = nullptr;
  ~Config() { agman_config_free(ptr); }
};

struct Str {
  char* ptr = nullptr;
  ~Str() { agman_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

}  // namespace

TEST_CASE("config lifecycle through the C API") {
  Config cfg;
  REQUIRE(agman_config_parse(kMicroConfig, &cfg.ptr) == AGMAN_OK);

  Str js;
  REQUIRE(agman_config_to_json(cfg.ptr, &js.ptr) == AGMAN_OK);
  const json parsed = json::parse(js.str());
  CHECK(parsed["model"]["embedding_size"] == 4);
  CHECK(parsed["train"]["learning_rate"] == 1e-4);

  CHECK(agman_config_set(cfg.ptr, "train.epochs", "2") == AGMAN_OK);
  Str js2;
  REQUIRE(agman_config_to_json(cfg.ptr, &js2.ptr) == AGMAN_OK);
  CHECK(json::parse(js2.str())["train"]["epochs"] == 2);

  SUBCASE("bad values surface as config errors with a message") {
    CHECK(agman_config_set(cfg.ptr, "train.lr_step", "0") == AGMAN_ERR_CONFIG);
    CHECK(std::strlen(agman_last_error()) > 0);
    CHECK(agman_config_set(cfg.ptr, "train.unknown_key", "1") == AGMAN_ERR_CONFIG);
  }
  SUBCASE("null arguments are argument errors") {
    CHECK(agman_config_parse(nullptr, &cfg.ptr) == AGMAN_ERR_ARGUMENT);
    CHECK(agman_config_to_json(cfg.ptr, nullptr) == AGMAN_ERR_ARGUMENT);
    CHECK(agman_config_load("", &cfg.ptr) == AGMAN_ERR_ARGUMENT);
  }
  SUBCASE("invalid json is a config error") {
    agman_config* out = nullptr;
    CHECK(agman_config_parse("{nope", &out) == AGMAN_ERR_CONFIG);
  }
  SUBCASE("missing file is an io error") {
    agman_config* out = nullptr;
    CHECK(agman_config_load("/definitely/not/here.json", &out) == AGMAN_ERR_IO);
  }
}

TEST_CASE("end-to-end flow through the C API") {
  testutil::TempDir dir("capi");
  const std::string data_dir = (dir.path() / "data").string();
  const std::string run_dir = (dir.path() / "run").string();

  Config cfg;
  REQUIRE(agman_config_parse(kMicroConfig, &cfg.ptr) == AGMAN_OK);

  // synthesize data
  Str manifest;
  REQUIRE(agman_synth_data(cfg.ptr, data_dir.c_str(), &manifest.ptr) == AGMAN_OK);
  CHECK(fs::exists(manifest.str()));

  // train on it
  REQUIRE(agman_config_set(cfg.ptr, "data.manifest", manifest.str().c_str()) == AGMAN_OK);
  REQUIRE(agman_train(cfg.ptr, run_dir.c_str()) == AGMAN_OK);
  const std::string ckpt = (fs::path(run_dir) / "checkpoint").string();
  CHECK(fs::exists(fs::path(ckpt) / "params.bin"));
  CHECK(fs::exists(fs::path(ckpt) / "meta.json"));
  CHECK(fs::exists(fs::path(run_dir) / "history.csv"));

  // retrieval MAP report
  Str report;
  REQUIRE(agman_eval_map(ckpt.c_str(), manifest.str().c_str(), nullptr, nullptr, 0, &report.ptr) == AGMAN_OK);
  const json rj = json::parse(report.str());
  CHECK(rj.contains("per_attribute"));
  CHECK(rj.contains("overall_map"));
  CHECK(rj["counts"]["queries"].get<long>() > 0);
  CHECK(rj["triplet_accuracy"].is_null());

  // triplet report
  Str treport;
  REQUIRE(agman_eval_triplets(ckpt.c_str(), manifest.str().c_str(), nullptr, nullptr, nullptr, 0, &treport.ptr) ==
          AGMAN_OK);
  const json tj = json::parse(treport.str());
  CHECK(tj["counts"]["triplets"].get<long>() == 12);
  CHECK(tj["triplet_accuracy"].is_number());
  CHECK(tj["triplet_avg_loss"].is_number());

  // retrieval for the first record id
  Str csv;
  int truncated = -1;
  REQUIRE(agman_retrieve(ckpt.c_str(), manifest.str().c_str(), "synth-00", "alpha", 3, nullptr, nullptr, 0, &csv.ptr,
                         &truncated) == AGMAN_OK);
  CHECK(csv.str().rfind("query_id,rank,candidate_id,score,relevant\n", 0) == 0);

  // attention export
  Str grid, sidecar;
  REQUIRE(agman_export_attention(ckpt.c_str(), manifest.str().c_str(), "synth-00", "beta", nullptr, nullptr, 0,
                                 &grid.ptr, &sidecar.ptr) == AGMAN_OK);
  const json sj = json::parse(sidecar.str());
  CHECK(sj["image_id"] == "synth-00");
  CHECK(sj["attribute"] == "beta");
  CHECK(sj["h"] == 2);
  CHECK(sj["w"] == 2);
  // the grid sums to 1
  double sum = 0;
  {
    std::string s = grid.str();
    for (char& ch : s)
      if (ch == ',' || ch == '\n') ch = ' ';
    std::istringstream is(s);
    double v;
    while (is >> v) sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  SUBCASE("overrides reach the evaluation config") {
    const char* keys[] = {"eval.seed"};
    const char* values[] = {"33"};
    Str r2;
    REQUIRE(agman_eval_map(ckpt.c_str(), manifest.str().c_str(), keys, values, 1, &r2.ptr) == AGMAN_OK);
    CHECK(r2.str() != report.str());  // different partition
  }
  SUBCASE("structural overrides are rejected") {
    const char* keys[] = {"model.enable_asa"};
    const char* values[] = {"false"};
    Str r2;
    CHECK(agman_eval_map(ckpt.c_str(), manifest.str().c_str(), keys, values, 1, &r2.ptr) == AGMAN_ERR_VALIDATION);
  }
  SUBCASE("unknown attribute and unknown query are argument errors") {
    Str r2;
    int tr = 0;
    CHECK(agman_retrieve(ckpt.c_str(), manifest.str().c_str(), "synth-00", "gamma", 3, nullptr, nullptr, 0, &r2.ptr,
                         &tr) == AGMAN_ERR_ARGUMENT);
    CHECK(std::string(agman_last_error()).find("alpha") != std::string::npos);  // lists valid names
    Str r3;
    CHECK(agman_retrieve(ckpt.c_str(), manifest.str().c_str(), "ghost", "alpha", 3, nullptr, nullptr, 0, &r3.ptr,
                         &tr) == AGMAN_ERR_ARGUMENT);
  }
  SUBCASE("missing checkpoint is an io error") {
    Str r2;
    CHECK(agman_eval_map((dir.path() / "nothing").string().c_str(), manifest.str().c_str(), nullptr, nullptr, 0,
                         &r2.ptr) == AGMAN_ERR_IO);
  }
}
