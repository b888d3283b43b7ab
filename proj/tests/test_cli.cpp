#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI binary with stdout/stderr captured to files.
RunResult run_cli(const testutil::TempDir& dir, const std::string& args) {
  static int counter = 0;
  const std::string out_file = (dir.path() / ("stdout_" + std::to_string(counter) + ".txt")).string();
  const std::string err_file = (dir.path() / ("stderr_" + std::to_string(counter) + ".txt")).string();
  ++counter;
  const std::string cmd = std::string(AGMAN_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

void write_micro_config(const std::string& path, const std::string& manifest = "") {
  json j = {
      {"attributes", json::array({{{"name", "alpha"}, {"sub_classes", 3}}, {{"name", "beta"}, {"sub_classes", 2}}})},
      {"backbone", {{"profile", "tinynet"}, {"input_size", 16}, {"channels", {2, 3, 4, 8}}}},
      {"model", {{"embedding_size", 4}, {"asa_channels", 2}, {"aca_hidden", 4}, {"ca_reduction", 2}}},
      {"train", {{"epochs", 1}, {"batch_size", 4}, {"triplets_per_epoch", 8}, {"seed", 3}}},
      {"synth", {{"per_subclass", 2}, {"image_size", 16}, {"seed", 11}}},
      {"eval", {{"query_fraction", 0.25}, {"seed", 9}, {"triplet_count", 10}}}};
  if (!manifest.empty()) j["data"] = {{"manifest", manifest}};
  std::ofstream(path) << j.dump(2);
}

}  // namespace

TEST_CASE("cli end-to-end and exit-code contract") {
  testutil::TempDir dir("cli");
  const std::string cfg_path = (dir.path() / "config.json").string();
  const std::string data_dir = (dir.path() / "data").string();
  const std::string run_dir = (dir.path() / "run").string();
  write_micro_config(cfg_path);

  SUBCASE("missing required flags and bad configs exit 2") {
    CHECK(run_cli(dir, "train").exit_code == 2);  // no --config
    CHECK(run_cli(dir, "synth-data --config " + cfg_path + " --out " + data_dir + " --set synth.per_subclass=0")
              .exit_code == 2);
    CHECK(run_cli(dir, "train --config " + cfg_path + " --out " + run_dir + " --set train.lr_step=0").exit_code == 2);
    // config without data.manifest: names the missing key on stderr
    const RunResult r = run_cli(dir, "train --config " + cfg_path + " --out " + run_dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("data.manifest") != std::string::npos);
  }

  // synth-data
  const RunResult synth = run_cli(dir, "synth-data --config " + cfg_path + " --out " + data_dir);
  REQUIRE(synth.exit_code == 0);
  const std::string manifest = (fs::path(data_dir) / "manifest.jsonl").string();
  CHECK(fs::exists(manifest));

  // same seed twice: identical manifests and identical image bytes
  const std::string data_dir2 = (dir.path() / "data2").string();
  REQUIRE(run_cli(dir, "synth-data --config " + cfg_path + " --out " + data_dir2).exit_code == 0);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  CHECK(slurp(manifest) == slurp((fs::path(data_dir2) / "manifest.jsonl").string()));
  CHECK(slurp((fs::path(data_dir) / "images" / "synth-00.ppm").string()) ==
        slurp((fs::path(data_dir2) / "images" / "synth-00.ppm").string()));

  // train
  write_micro_config(cfg_path, manifest);
  const RunResult train = run_cli(dir, "train --config " + cfg_path + " --out " + run_dir);
  REQUIRE(train.exit_code == 0);
  const std::string ckpt = (fs::path(run_dir) / "checkpoint").string();
  CHECK(fs::exists(fs::path(ckpt) / "meta.json"));
  CHECK(fs::exists(fs::path(run_dir) / "history.csv"));

  // meta.json carries a config that parses back to an equal RunConfig
  {
    std::ifstream meta_in((fs::path(ckpt) / "meta.json").string());
    const json meta = json::parse(meta_in);
    const agman::RunConfig a = agman::RunConfig::from_json(meta.at("config"));
    const agman::RunConfig b = agman::RunConfig::from_json(a.to_json());
    CHECK(a == b);
  }

  SUBCASE("eval-map writes identical bytes on repeat runs") {
    const std::string eval_dir = (dir.path() / "eval1").string();
    const RunResult e1 = run_cli(dir, "eval-map --checkpoint " + ckpt + " --manifest " + manifest + " --out " +
                                          eval_dir);
    REQUIRE(e1.exit_code == 0);
    const json report = json::parse(e1.out);
    CHECK(report.contains("overall_map"));
    const RunResult e2 = run_cli(dir, "eval-map --checkpoint " + ckpt + " --manifest " + manifest + " --out " +
                                          (dir.path() / "eval2").string());
    REQUIRE(e2.exit_code == 0);
    CHECK(e1.out == e2.out);
    CHECK(slurp((fs::path(eval_dir) / "eval_map.json").string()) == e1.out);
  }

  SUBCASE("eval-triplet consumes a triplet cache file") {
    // build a small cache file: reuse ids from the manifest with labels known
    const std::string tfile = (dir.path() / "trips.jsonl").string();
    std::ofstream tf(tfile);
    tf << R"({"anchor":"synth-00","positive":"synth-01","negative":"synth-02","attribute":"alpha"})" << "\n";
    tf.close();
    const RunResult e = run_cli(dir, "eval-triplet --checkpoint " + ckpt + " --manifest " + manifest + " --triplets " +
                                         tfile + " --out " + (dir.path() / "evalt").string());
    REQUIRE(e.exit_code == 0);
    const json report = json::parse(e.out);
    CHECK(report["counts"]["triplets"] == 1);
  }

  SUBCASE("retrieve: contract and usage errors") {
    const RunResult ok = run_cli(dir, "retrieve --checkpoint " + ckpt + " --manifest " + manifest +
                                          " --query synth-00 --attribute alpha -k 3 --out " +
                                          (dir.path() / "ret").string());
    REQUIRE(ok.exit_code == 0);
    CHECK(ok.out.rfind("query_id,rank,candidate_id,score,relevant\n", 0) == 0);

    const RunResult bad_attr = run_cli(dir, "retrieve --checkpoint " + ckpt + " --manifest " + manifest +
                                                " --query synth-00 --attribute nope -k 3");
    CHECK(bad_attr.exit_code == 2);
    CHECK(bad_attr.err.find("alpha") != std::string::npos);  // lists valid names

    const RunResult bad_query = run_cli(dir, "retrieve --checkpoint " + ckpt + " --manifest " + manifest +
                                                 " --query ghost --attribute alpha -k 3");
    CHECK(bad_query.exit_code == 2);

    // k beyond the pool: full ranking plus a stderr note
    const RunResult trunc = run_cli(dir, "retrieve --checkpoint " + ckpt + " --manifest " + manifest +
                                             " --query synth-00 --attribute alpha -k 500 --out " +
                                             (dir.path() / "ret2").string());
    CHECK(trunc.exit_code == 0);
    CHECK(trunc.err.find("full ranking") != std::string::npos);
  }

  SUBCASE("export-attention emits a normalized grid") {
    const std::string attn_dir = (dir.path() / "attn").string();
    const RunResult e = run_cli(dir, "export-attention --checkpoint " + ckpt + " --manifest " + manifest +
                                         " --image synth-01 --attribute beta --out " + attn_dir);
    REQUIRE(e.exit_code == 0);
    double sum = 0;
    std::string grid = e.out;
    for (char& ch : grid)
      if (ch == ',') ch = ' ';
    std::istringstream is(grid);
    double v;
    while (is >> v) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fs::exists(fs::path(attn_dir) / "attention_synth-01_beta.csv"));
    CHECK(fs::exists(fs::path(attn_dir) / "attention_synth-01_beta.json"));
  }

  SUBCASE("export-attention on an ASA-disabled checkpoint exits 1") {
    const std::string run2 = (dir.path() / "run_noasa").string();
    REQUIRE(run_cli(dir, "train --config " + cfg_path + " --out " + run2 + " --set model.enable_asa=false")
                .exit_code == 0);
    const RunResult e = run_cli(dir, "export-attention --checkpoint " + (fs::path(run2) / "checkpoint").string() +
                                         " --manifest " + manifest + " --image synth-01 --attribute beta");
    CHECK(e.exit_code == 1);
    CHECK(e.err.find("ASA") != std::string::npos);
  }

  SUBCASE("corrupted checkpoint exits 1") {
    const std::string broken = (dir.path() / "broken").string();
    fs::create_directories(broken);
    fs::copy((fs::path(ckpt) / "meta.json").string(), (fs::path(broken) / "meta.json").string());
    std::ofstream((fs::path(broken) / "params.bin").string(), std::ios::binary) << "junk";
    const RunResult e = run_cli(dir, "eval-map --checkpoint " + broken + " --manifest " + manifest);
    CHECK(e.exit_code == 1);
  }

  SUBCASE("help exits 0") { CHECK(run_cli(dir, "--help").exit_code == 0); }
  SUBCASE("unknown subcommand exits 2") { CHECK(run_cli(dir, "frobnicate").exit_code == 2); }
}
