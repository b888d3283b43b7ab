#include "agman/agman.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <string>

#include "core/commands.hpp"
#include "core/error.hpp"

using namespace agman;

// Holds both the raw document and the resolved config so --set overrides can
// precede profile-default resolution.
struct agman_config {
  nlohmann::json raw;
  RunConfig cfg;
};

namespace {

thread_local std::string t_last_error = "no error";

agman_status to_status(ErrorCode code) { return static_cast<agman_status>(code); }

agman_status fail(const std::exception& e, agman_status code) {
  t_last_error = e.what();
  return code;
}

template <typename Fn>
agman_status guarded(Fn&& fn) {
  try {
    fn();
    return AGMAN_OK;
  } catch (const Error& e) {
    return fail(e, to_status(e.code()));
  } catch (const std::exception& e) {
    return fail(e, AGMAN_ERR_INTERNAL);
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

Overrides collect(const char* const* keys, const char* const* values, size_t n) {
  Overrides out;
  if (n > 0 && (!keys || !values)) throw ArgumentError("override arrays are NULL but n_overrides > 0");
  for (size_t i = 0; i < n; ++i) {
    if (!keys[i] || !values[i]) throw ArgumentError("override key/value must be non-NULL");
    out.emplace_back(keys[i], values[i]);
  }
  return out;
}

std::string opt(const char* s) { return s ? s : ""; }

const char* require(const char* s, const char* what) {
  if (!s || !*s) throw ArgumentError(std::string(what) + " must be non-empty");
  return s;
}

}  // namespace

extern "C" {

const char* agman_last_error(void) { return t_last_error.c_str(); }

const char* agman_version(void) { return "1.0.0"; }

void agman_string_free(char* s) { delete[] s; }

agman_status agman_config_load(const char* path, agman_config** out) {
  return guarded([&] {
    require(path, "path");
    if (!out) throw ArgumentError("out must be non-NULL");
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open config file: ") + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config file ") + path + " is not valid JSON: " + e.what());
    }
    *out = new agman_config{j, RunConfig::from_json(j)};
  });
}

agman_status agman_config_parse(const char* json_text, agman_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    if (!out) throw ArgumentError("out must be non-NULL");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new agman_config{j, RunConfig::from_json(j)};
  });
}

agman_status agman_config_set(agman_config* cfg, const char* dotted_key, const char* value) {
  return guarded([&] {
    if (!cfg) throw ArgumentError("cfg must be non-NULL");
    nlohmann::json next = apply_json_override(cfg->raw, require(dotted_key, "key"), require(value, "value"));
    cfg->cfg = RunConfig::from_json(next);  // validate before committing
    cfg->raw = std::move(next);
  });
}

agman_status agman_config_to_json(const agman_config* cfg, char** json_out) {
  return guarded([&] {
    if (!cfg || !json_out) throw ArgumentError("cfg and json_out must be non-NULL");
    *json_out = dup_string(cfg->cfg.to_json().dump(2) + "\n");
  });
}

void agman_config_free(agman_config* cfg) { delete cfg; }

agman_status agman_synth_data(const agman_config* cfg, const char* out_dir, char** manifest_path_out) {
  return guarded([&] {
    if (!cfg) throw ArgumentError("cfg must be non-NULL");
    const std::string manifest = cmd_synth_data(cfg->cfg, require(out_dir, "out_dir"));
    if (manifest_path_out) *manifest_path_out = dup_string(manifest);
  });
}

agman_status agman_train(const agman_config* cfg, const char* out_dir) {
  return guarded([&] {
    if (!cfg) throw ArgumentError("cfg must be non-NULL");
    cmd_train(cfg->cfg, require(out_dir, "out_dir"));
  });
}

agman_status agman_eval_map(const char* checkpoint_dir, const char* manifest, const char* const* override_keys,
                            const char* const* override_values, size_t n_overrides, char** report_json_out) {
  return guarded([&] {
    if (!report_json_out) throw ArgumentError("report_json_out must be non-NULL");
    *report_json_out = dup_string(cmd_eval_map(require(checkpoint_dir, "checkpoint_dir"), opt(manifest),
                                               collect(override_keys, override_values, n_overrides)));
  });
}

agman_status agman_eval_triplets(const char* checkpoint_dir, const char* manifest, const char* triplet_file,
                                 const char* const* override_keys, const char* const* override_values,
                                 size_t n_overrides, char** report_json_out) {
  return guarded([&] {
    if (!report_json_out) throw ArgumentError("report_json_out must be non-NULL");
    *report_json_out =
        dup_string(cmd_eval_triplets(require(checkpoint_dir, "checkpoint_dir"), opt(manifest), opt(triplet_file),
                                     collect(override_keys, override_values, n_overrides)));
  });
}

agman_status agman_retrieve(const char* checkpoint_dir, const char* manifest, const char* query_id,
                            const char* attribute_name, long k, const char* const* override_keys,
                            const char* const* override_values, size_t n_overrides, char** csv_out,
                            int* truncated_out) {
  return guarded([&] {
    if (!csv_out) throw ArgumentError("csv_out must be non-NULL");
    RetrievalOutput out =
        cmd_retrieve(require(checkpoint_dir, "checkpoint_dir"), opt(manifest), require(query_id, "query_id"),
                     require(attribute_name, "attribute_name"), k, collect(override_keys, override_values, n_overrides));
    *csv_out = dup_string(out.csv);
    if (truncated_out) *truncated_out = out.truncated_request ? 1 : 0;
  });
}

agman_status agman_export_attention(const char* checkpoint_dir, const char* manifest, const char* image_id,
                                    const char* attribute_name, const char* const* override_keys,
                                    const char* const* override_values, size_t n_overrides, char** csv_out,
                                    char** sidecar_json_out) {
  return guarded([&] {
    if (!csv_out || !sidecar_json_out) throw ArgumentError("csv_out and sidecar_json_out must be non-NULL");
    AttentionExport out = cmd_export_attention(require(checkpoint_dir, "checkpoint_dir"), opt(manifest),
                                               require(image_id, "image_id"), require(attribute_name, "attribute_name"),
                                               collect(override_keys, override_values, n_overrides));
    *csv_out = dup_string(out.csv);
    *sidecar_json_out = dup_string(out.sidecar_json);
  });
}

}  // extern "C"
