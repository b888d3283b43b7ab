#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core/tensor.hpp"

namespace agman {

struct AttributeSpace {
  std::vector<std::string> names;
  std::vector<int> sub_class_counts;

  int n() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // -1 if unknown
  void validate() const;

  bool operator==(const AttributeSpace&) const = default;
};

// Pixel source for records produced by the synthetic generator; pixels are
// re-rendered on demand from (seed, index) instead of being stored.
struct SyntheticSource {
  uint64_t dataset_seed = 0;
  long index = 0;
  int image_size = 0;
};

struct ImageRecord {
  std::string id;
  std::variant<std::string, SyntheticSource> source;  // file path or synthetic descriptor
  std::map<int, int> labels;                          // attribute index -> sub-class index

  bool labeled_for(int attribute) const { return labels.count(attribute) != 0; }
};

enum class SplitRole { train, validation, test };

// Query/candidate partition of one attribute's evaluation pool.
struct EvalPartition {
  std::vector<std::string> query_ids;
  std::vector<std::string> candidate_ids;
};

struct DatasetSplit {
  std::vector<ImageRecord> records;
  SplitRole role = SplitRole::train;
  std::map<int, EvalPartition> eval_pools;  // filled by make_eval_partition

  const ImageRecord* find(const std::string& id) const;
  const ImageRecord& require(const std::string& id) const;
  void rebuild_index();

 private:
  std::map<std::string, size_t> index_;
};

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;
  int attribute = 0;
};

// One-hot encoding of an attribute index.
Tensor encode_attribute(int attribute, const AttributeSpace& space);

// Manifest: UTF-8 JSON lines {"id": ..., "path": ..., "labels": {name: index}}.
// Paths are resolved relative to the manifest's directory.
DatasetSplit load_manifest(const std::string& path, const AttributeSpace& space);

// Writes manifest + PPM images under dir; synthetic records are rendered to
// dir/images. Returns the manifest path (dir/manifest.jsonl).
std::string save_manifest(const DatasetSplit& split, const AttributeSpace& space, const std::string& dir);

std::vector<Triplet> sample_triplets(const DatasetSplit& split, const AttributeSpace& space, int attribute, long count,
                                     uint64_t seed);

// Triplet cache file: JSON lines {"anchor","positive","negative","attribute"}
// with the attribute given by name.
std::vector<Triplet> load_triplets(const std::string& path, const AttributeSpace& space);
void save_triplets(const std::string& path, const std::vector<Triplet>& triplets, const AttributeSpace& space);

// Deterministic synthetic dataset; record count = per_subclass * lcm(counts),
// every record labeled for every attribute, each (attribute, sub-class) cell
// holding count/counts[i] >= per_subclass records.
DatasetSplit generate_synthetic(const AttributeSpace& space, long per_subclass, int image_size, uint64_t seed);
long synthetic_record_count(const AttributeSpace& space, long per_subclass);

// [3,S,S] pixels in [0,1] (8-bit grid) for any record.
Tensor load_pixels(const ImageRecord& record, const AttributeSpace& space, int expected_size);

// Renderer used by the generator: one horizontal band per attribute; the
// sub-class sets the band's base intensity and grating frequency, the phase
// and pixel noise vary per record.
Tensor render_synthetic(const SyntheticSource& src, const std::map<int, int>& labels, const AttributeSpace& space);

// Seeded per-attribute query/candidate partition over records labeled for the
// attribute.
std::map<int, EvalPartition> make_eval_partition(const DatasetSplit& split, const AttributeSpace& space,
                                                 double query_fraction, uint64_t seed);

}  // namespace agman
