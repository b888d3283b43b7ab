// agman command-line tool. Talks to the library exclusively through the
// public C API (include/agman/agman.h).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agman/agman.h"

namespace fs = std::filesystem;

namespace {

// Exit contract: 0 success, 1 runtime failure, 2 usage/config error.
int exit_code_for(agman_status s) {
  switch (s) {
    case AGMAN_OK:
      return 0;
    case AGMAN_ERR_ARGUMENT:
    case AGMAN_ERR_CONFIG:
      return 2;
    default:
      return 1;
  }
}

int report_failure(agman_status s) {
  std::fprintf(stderr, "error: %s\n", agman_last_error());
  return exit_code_for(s);
}

struct ConfigHandle {
  agman_config* ptr = nullptr;
  ~ConfigHandle() { agman_config_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { agman_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

struct CommonOpts {
  std::string config_path;
  std::string checkpoint;
  std::string manifest;
  std::string out_dir = ".";
  std::vector<std::string> sets;
  long seed = -1;
  int workers = 0;
};

// Splits KEY=VALUE pairs from --set.
bool split_kv(const std::string& s, std::string& key, std::string& value) {
  const auto pos = s.find('=');
  if (pos == std::string::npos || pos == 0) return false;
  key = s.substr(0, pos);
  value = s.substr(pos + 1);
  return true;
}

// Loads --config and applies --set/--seed/--workers overrides.
int build_config(const CommonOpts& opts, const char* seed_key, ConfigHandle& handle) {
  if (opts.config_path.empty()) {
    std::fprintf(stderr, "error: --config is required for this command\n");
    return 2;
  }
  agman_status s = agman_config_load(opts.config_path.c_str(), &handle.ptr);
  if (s != AGMAN_OK) return report_failure(s);
  for (const auto& kv : opts.sets) {
    std::string key, value;
    if (!split_kv(kv, key, value)) {
      std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
      return 2;
    }
    s = agman_config_set(handle.ptr, key.c_str(), value.c_str());
    if (s != AGMAN_OK) return report_failure(s);
  }
  if (opts.seed >= 0) {
    s = agman_config_set(handle.ptr, seed_key, std::to_string(opts.seed).c_str());
    if (s != AGMAN_OK) return report_failure(s);
  }
  if (opts.workers > 0) {
    s = agman_config_set(handle.ptr, "workers", std::to_string(opts.workers).c_str());
    if (s != AGMAN_OK) return report_failure(s);
  }
  return 0;
}

// Evaluation commands forward overrides to the checkpoint's stored config.
struct OverrideList {
  std::vector<std::string> keys, values;
  std::vector<const char*> key_ptrs, value_ptrs;

  bool add_all(const CommonOpts& opts, const char* seed_key) {
    for (const auto& kv : opts.sets) {
      std::string key, value;
      if (!split_kv(kv, key, value)) {
        std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
        return false;
      }
      keys.push_back(key);
      values.push_back(value);
    }
    if (opts.seed >= 0) {
      keys.emplace_back(seed_key);
      values.push_back(std::to_string(opts.seed));
    }
    if (opts.workers > 0) {
      keys.emplace_back("workers");
      values.push_back(std::to_string(opts.workers));
    }
    for (const auto& k : keys) key_ptrs.push_back(k.c_str());
    for (const auto& v : values) value_ptrs.push_back(v.c_str());
    return true;
  }
  const char* const* k() const { return key_ptrs.empty() ? nullptr : key_ptrs.data(); }
  const char* const* v() const { return value_ptrs.empty() ? nullptr : value_ptrs.data(); }
  size_t n() const { return keys.size(); }
};

int write_file(const std::string& path, const std::string& content) {
  std::error_code ec;
  fs::create_directories(fs::path(path).parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    return 1;
  }
  out << content;
  return out ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agman: attribute-conditioned image embedding, retrieval and evaluation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string query_id, attribute_name, image_id, triplet_file;
  long top_k = 10;

  auto add_common = [&](CLI::App* cmd, bool needs_config, bool needs_checkpoint) {
    if (needs_config) cmd->add_option("--config", opts.config_path, "JSON configuration file");
    if (needs_checkpoint) cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint directory")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (default .)");
    cmd->add_option("--seed", opts.seed, "override the command's RNG seed");
    cmd->add_option("--workers", opts.workers, "worker threads for data decoding / evaluation fan-out");
    cmd->add_option("--set", opts.sets, "config override KEY=VALUE (repeatable)")->take_all();
  };

  CLI::App* c_train = app.add_subcommand("train", "train a model and write checkpoint + history");
  add_common(c_train, true, false);

  CLI::App* c_synth = app.add_subcommand("synth-data", "generate the synthetic dataset and manifest");
  add_common(c_synth, true, false);

  CLI::App* c_eval_map = app.add_subcommand("eval-map", "attribute-specific retrieval MAP report");
  add_common(c_eval_map, false, true);
  c_eval_map->add_option("--manifest", opts.manifest, "evaluation manifest (JSON lines)");

  CLI::App* c_eval_tr = app.add_subcommand("eval-triplet", "triplet relation prediction report");
  add_common(c_eval_tr, false, true);
  c_eval_tr->add_option("--manifest", opts.manifest, "evaluation manifest (JSON lines)");
  c_eval_tr->add_option("--triplets", triplet_file, "triplet cache file (JSON lines); sampled when omitted");

  CLI::App* c_retrieve = app.add_subcommand("retrieve", "top-k retrieval for one query");
  add_common(c_retrieve, false, true);
  c_retrieve->add_option("--manifest", opts.manifest, "manifest with the query and candidate pool");
  c_retrieve->add_option("--query", query_id, "query record id")->required();
  c_retrieve->add_option("--attribute", attribute_name, "attribute name")->required();
  c_retrieve->add_option("-k,--top-k", top_k, "ranking length (default 10)");

  CLI::App* c_attn = app.add_subcommand("export-attention", "export the spatial attention map of one image");
  add_common(c_attn, false, true);
  c_attn->add_option("--manifest", opts.manifest, "manifest holding the image");
  c_attn->add_option("--image", image_id, "image record id")->required();
  c_attn->add_option("--attribute", attribute_name, "attribute name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (c_train->parsed()) {
    ConfigHandle cfg;
    if (int rc = build_config(opts, "train.seed", cfg); rc != 0) return rc;
    const agman_status s = agman_train(cfg.ptr, opts.out_dir.c_str());
    if (s != AGMAN_OK) return report_failure(s);
    std::printf("checkpoint: %s\nhistory: %s\n", (fs::path(opts.out_dir) / "checkpoint").c_str(),
                (fs::path(opts.out_dir) / "history.csv").c_str());
    return 0;
  }

  if (c_synth->parsed()) {
    ConfigHandle cfg;
    if (int rc = build_config(opts, "synth.seed", cfg); rc != 0) return rc;
    OwnedString manifest;
    const agman_status s = agman_synth_data(cfg.ptr, opts.out_dir.c_str(), &manifest.ptr);
    if (s != AGMAN_OK) return report_failure(s);
    std::printf("manifest: %s\n", manifest.str().c_str());
    return 0;
  }

  OverrideList ov;
  if (!ov.add_all(opts, "eval.seed")) return 2;

  if (c_eval_map->parsed()) {
    OwnedString report;
    const agman_status s = agman_eval_map(opts.checkpoint.c_str(), opts.manifest.c_str(), ov.k(), ov.v(), ov.n(),
                                          &report.ptr);
    if (s != AGMAN_OK) return report_failure(s);
    std::fputs(report.str().c_str(), stdout);
    return write_file((fs::path(opts.out_dir) / "eval_map.json").string(), report.str());
  }

  if (c_eval_tr->parsed()) {
    OwnedString report;
    const agman_status s = agman_eval_triplets(opts.checkpoint.c_str(), opts.manifest.c_str(), triplet_file.c_str(),
                                               ov.k(), ov.v(), ov.n(), &report.ptr);
    if (s != AGMAN_OK) return report_failure(s);
    std::fputs(report.str().c_str(), stdout);
    return write_file((fs::path(opts.out_dir) / "eval_triplet.json").string(), report.str());
  }

  if (c_retrieve->parsed()) {
    OwnedString csv;
    int truncated = 0;
    const agman_status s = agman_retrieve(opts.checkpoint.c_str(), opts.manifest.c_str(), query_id.c_str(),
                                          attribute_name.c_str(), top_k, ov.k(), ov.v(), ov.n(), &csv.ptr, &truncated);
    if (s != AGMAN_OK) return report_failure(s);
    if (truncated) {
      std::fprintf(stderr, "note: requested k=%ld exceeds the candidate pool; full ranking returned\n", top_k);
    }
    std::fputs(csv.str().c_str(), stdout);
    return write_file((fs::path(opts.out_dir) / "retrieval.csv").string(), csv.str());
  }

  if (c_attn->parsed()) {
    OwnedString csv, sidecar;
    const agman_status s = agman_export_attention(opts.checkpoint.c_str(), opts.manifest.c_str(), image_id.c_str(),
                                                  attribute_name.c_str(), ov.k(), ov.v(), ov.n(), &csv.ptr,
                                                  &sidecar.ptr);
    if (s != AGMAN_OK) return report_failure(s);
    std::fputs(csv.str().c_str(), stdout);
    const std::string stem = "attention_" + image_id + "_" + attribute_name;
    if (int rc = write_file((fs::path(opts.out_dir) / (stem + ".csv")).string(), csv.str()); rc != 0) return rc;
    return write_file((fs::path(opts.out_dir) / (stem + ".json")).string(), sidecar.str());
  }

  return 2;
}
