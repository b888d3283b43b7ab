#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "json.hpp"

namespace agman {

enum class TripletMode { similarity_corrected, as_written };

TripletMode triplet_mode_from_string(const std::string& s);
std::string to_string(TripletMode m);

struct BackboneConfig {
  std::string profile = "tinynet";  // tinynet | resnet50
  int input_size = 64;
  std::vector<long> channels = {16, 32, 64, 128};  // tinynet stage widths
  std::string pretrained;                          // optional weight container path
  std::array<double, 3> norm_mean = {0.0, 0.0, 0.0};
  std::array<double, 3> norm_std = {1.0, 1.0, 1.0};

  bool operator==(const BackboneConfig&) const = default;
};

struct ModelConfig {
  long embedding_size = 128;  // channel count c entering the attention stack
  long asa_channels = 32;     // c'
  long aca_hidden = 64;
  long ca_reduction = 4;      // r
  bool enable_asa = true;
  bool enable_sa = true;
  bool enable_aca = true;
  bool enable_ca = true;
  bool enable_fusion = true;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  long batch_size = 16;
  double learning_rate = 1e-4;
  long lr_step = 3;
  double lr_gamma = 0.9;
  long epochs = 50;
  double margin = 0.2;
  long triplets_per_epoch = 512;
  uint64_t seed = 1;
  TripletMode triplet_mode = TripletMode::similarity_corrected;
  bool enable_classification_loss = true;
  std::string optimizer = "adam";  // adam | sgd
  std::vector<double> class_weights;  // w_a; empty means all ones

  bool operator==(const TrainConfig&) const = default;
};

struct EvalConfig {
  double query_fraction = 0.2;
  uint64_t seed = 17;
  long triplet_count = 500;

  bool operator==(const EvalConfig&) const = default;
};

struct DataConfig {
  std::string manifest;
  std::string val_manifest;

  bool operator==(const DataConfig&) const = default;
};

struct SynthConfig {
  long per_subclass = 12;
  int image_size = 64;
  uint64_t seed = 7;

  bool operator==(const SynthConfig&) const = default;
};

// Full configuration tree. Parsing resolves profile-dependent defaults, so a
// serialized config always round-trips to an equal value.
struct RunConfig {
  AttributeSpace space;
  BackboneConfig backbone;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  DataConfig data;
  SynthConfig synth;
  int workers = 1;

  bool operator==(const RunConfig& o) const;

  void validate() const;  // throws ConfigError

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // Applies one `--set key=value` override (dotted path, value parsed as JSON
  // when possible, else taken as a string).
  void apply_override(const std::string& dotted_key, const std::string& value);
};

// Same override mechanics on a raw (unresolved) config document; the CLI uses
// this before parsing so profile-dependent defaults resolve after overrides.
nlohmann::json apply_json_override(nlohmann::json j, const std::string& dotted_key, const std::string& value);


}  // namespace agman
