#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/config.hpp"

namespace agman {

// Orchestration behind the CLI subcommands; all functions throw agman::Error
// subclasses on failure.

struct TrainArtifacts {
  std::string checkpoint_dir;
  std::string history_path;
};

// Trains on config.data.manifest; writes <out_dir>/checkpoint/{params.bin,
// meta.json} and <out_dir>/history.csv.
TrainArtifacts cmd_train(const RunConfig& cfg, const std::string& out_dir);

// Renders the synthetic dataset and writes <out_dir>/manifest.jsonl plus
// <out_dir>/images/*.ppm. Returns the manifest path.
std::string cmd_synth_data(const RunConfig& cfg, const std::string& out_dir);

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Evaluation-side commands load the checkpoint's stored config; overrides may
// adjust non-structural keys (eval.*, data.*, workers). manifest_path may be
// empty to fall back to data.val_manifest, then data.manifest.
std::string cmd_eval_map(const std::string& checkpoint_dir, const std::string& manifest_path,
                         const Overrides& overrides);

// triplet_file empty: sample eval.triplet_count triplets from the manifest.
std::string cmd_eval_triplets(const std::string& checkpoint_dir, const std::string& manifest_path,
                              const std::string& triplet_file, const Overrides& overrides);

struct RetrievalOutput {
  std::string csv;
  bool truncated_request = false;
};

RetrievalOutput cmd_retrieve(const std::string& checkpoint_dir, const std::string& manifest_path,
                             const std::string& query_id, const std::string& attribute_name, long k,
                             const Overrides& overrides);

struct AttentionExport {
  std::string csv;           // h rows by w comma-separated values, sums to 1
  std::string sidecar_json;  // {image_id, attribute, h, w}
};

AttentionExport cmd_export_attention(const std::string& checkpoint_dir, const std::string& manifest_path,
                                     const std::string& image_id, const std::string& attribute_name,
                                     const Overrides& overrides);

}  // namespace agman
