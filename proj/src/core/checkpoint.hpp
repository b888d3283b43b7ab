#pragma once

#include <map>
#include <string>

#include "core/config.hpp"
#include "core/param_store.hpp"
#include "json.hpp"

namespace agman {

class Model;

// Binary tensor container ("AGMANPRM"): little-endian, u32 version, u64 tensor
// count, then per tensor u32 name length, name bytes, u32 rank, u64 dims,
// f64 payload. Used for checkpoints and optional pretrained backbone weights.
void write_params_file(const std::string& path, const ParamStore& store);
std::map<std::string, Tensor> read_params_file(const std::string& path);

// Copies tensors from `path` into matching store entries whose name starts
// with `prefix` (shape-checked). Entries absent from the file keep their
// initialization. Returns the number of tensors applied.
long overlay_params(ParamStore& store, const std::string& path, const std::string& prefix);

// Checkpoint directory layout: params.bin + meta.json. meta.json carries the
// full RunConfig, the epoch count, RNG seed record, and a metrics snapshot.
void save_checkpoint(const std::string& dir, const Model& model, long epoch, const nlohmann::json& metrics);

struct LoadedCheckpoint {
  RunConfig config;
  long epoch = 0;
  nlohmann::json metrics;
};

// Reads meta.json; the caller rebuilds the Model and applies params.bin.
LoadedCheckpoint read_checkpoint_meta(const std::string& dir);

// Full load: rebuild the model from the stored config and restore every
// parameter tensor (names and shapes must match exactly).
Model load_checkpoint(const std::string& dir);

std::string meta_json_string(const Model& model, long epoch, const nlohmann::json& metrics);

}  // namespace agman
