#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "core/error.hpp"
#include "core/image.hpp"
#include "core/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace agman {

int AttributeSpace::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void AttributeSpace::validate() const {
  if (names.empty()) throw ValidationError("attribute space must declare at least one attribute");
  if (names.size() != sub_class_counts.size()) {
    throw ValidationError("attribute space: names and sub_class_counts lengths differ");
  }
  std::set<std::string> seen;
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw ValidationError("attribute name must be non-empty");
    if (!seen.insert(names[i]).second) throw ValidationError("duplicate attribute name: " + names[i]);
    if (sub_class_counts[i] < 2) {
      throw ValidationError("attribute '" + names[i] + "' needs at least 2 sub-classes, got " +
                            std::to_string(sub_class_counts[i]));
    }
  }
}

const ImageRecord* DatasetSplit::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records[it->second];
}

const ImageRecord& DatasetSplit::require(const std::string& id) const {
  const ImageRecord* r = find(id);
  if (!r) throw ArgumentError("unknown record id: " + id);
  return *r;
}

void DatasetSplit::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = index_.emplace(records[i].id, i);
    if (!inserted) throw ValidationError("duplicate record id: " + records[i].id);
  }
}

Tensor encode_attribute(int attribute, const AttributeSpace& space) {
  if (attribute < 0 || attribute >= space.n()) {
    throw ArgumentError("attribute index " + std::to_string(attribute) + " out of range [0, " +
                        std::to_string(space.n()) + ")");
  }
  Tensor v({static_cast<long>(space.n())});
  v[attribute] = 1.0;
  return v;
}

DatasetSplit load_manifest(const std::string& path, const AttributeSpace& space) {
  space.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  DatasetSplit split;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("manifest " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("path") || !j.contains("labels")) {
      throw ParseError("manifest " + path + " line " + std::to_string(line_no) +
                       ": object with id, path, labels required");
    }
    ImageRecord rec;
    rec.id = j.at("id").get<std::string>();
    fs::path p = j.at("path").get<std::string>();
    rec.source = (p.is_absolute() ? p : base / p).string();
    for (const auto& [name, value] : j.at("labels").items()) {
      const int attr = space.index_of(name);
      if (attr < 0) {
        throw ValidationError("manifest " + path + " line " + std::to_string(line_no) + " (record '" + rec.id +
                              "'): unknown attribute '" + name + "'");
      }
      const int sub = value.get<int>();
      if (sub < 0 || sub >= space.sub_class_counts[static_cast<size_t>(attr)]) {
        throw ValidationError("manifest " + path + " line " + std::to_string(line_no) + " (record '" + rec.id +
                              "'): sub-class " + std::to_string(sub) + " out of range for attribute '" + name +
                              "' with " + std::to_string(space.sub_class_counts[static_cast<size_t>(attr)]) +
                              " sub-classes");
      }
      rec.labels[attr] = sub;
    }
    split.records.push_back(std::move(rec));
  }
  split.rebuild_index();
  return split;
}

std::string save_manifest(const DatasetSplit& split, const AttributeSpace& space, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  if (ec) throw IoError("cannot create output directory: " + dir + " (" + ec.message() + ")");

  const std::string manifest_path = (fs::path(dir) / "manifest.jsonl").string();
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + manifest_path);

  for (const auto& rec : split.records) {
    std::string rel_path;
    if (const auto* src = std::get_if<SyntheticSource>(&rec.source)) {
      rel_path = "images/" + rec.id + ".ppm";
      write_ppm((fs::path(dir) / rel_path).string(), render_synthetic(*src, rec.labels, space));
    } else {
      // File-backed records are copied so the output directory is self-contained.
      rel_path = "images/" + rec.id + ".ppm";
      write_ppm((fs::path(dir) / rel_path).string(), load_pixels(rec, space, 0));
    }
    json labels = json::object();
    for (const auto& [attr, sub] : rec.labels) labels[space.names[static_cast<size_t>(attr)]] = sub;
    json j;
    j["id"] = rec.id;
    j["path"] = rel_path;
    j["labels"] = labels;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("short write to manifest: " + manifest_path);
  return manifest_path;
}

std::vector<Triplet> sample_triplets(const DatasetSplit& split, const AttributeSpace& space, int attribute, long count,
                                     uint64_t seed) {
  if (attribute < 0 || attribute >= space.n()) {
    throw ArgumentError("attribute index " + std::to_string(attribute) + " out of range [0, " +
                        std::to_string(space.n()) + ")");
  }
  if (count <= 0) throw ArgumentError("triplet count must be positive");

  // Pools in record (file) order keep sampling deterministic.
  const int n_sub = space.sub_class_counts[static_cast<size_t>(attribute)];
  std::vector<std::vector<const ImageRecord*>> pools(static_cast<size_t>(n_sub));
  for (const auto& rec : split.records) {
    auto it = rec.labels.find(attribute);
    if (it != rec.labels.end()) pools[static_cast<size_t>(it->second)].push_back(&rec);
  }
  std::vector<int> anchor_subs;  // sub-classes able to provide an (anchor, positive) pair
  long total_labeled = 0;
  for (int s = 0; s < n_sub; ++s) {
    total_labeled += static_cast<long>(pools[static_cast<size_t>(s)].size());
    if (pools[static_cast<size_t>(s)].size() >= 2) anchor_subs.push_back(s);
  }
  const std::string attr_name = space.names[static_cast<size_t>(attribute)];
  if (anchor_subs.empty()) {
    throw SamplingError("attribute '" + attr_name + "': no sub-class has 2+ labeled records, cannot form a positive pair");
  }
  bool any_negative = false;
  for (int s : anchor_subs) {
    if (total_labeled > static_cast<long>(pools[static_cast<size_t>(s)].size())) {
      any_negative = true;
      break;
    }
  }
  if (!any_negative) {
    throw SamplingError("attribute '" + attr_name + "': all labeled records share one sub-class, no negative exists");
  }

  Rng rng(Rng::mix(seed, 0x7472u, static_cast<uint64_t>(attribute)));
  std::vector<Triplet> out;
  out.reserve(static_cast<size_t>(count));
  while (static_cast<long>(out.size()) < count) {
    const int s = anchor_subs[rng.uniform_below(anchor_subs.size())];
    const auto& pool = pools[static_cast<size_t>(s)];
    const long negatives = total_labeled - static_cast<long>(pool.size());
    if (negatives == 0) continue;  // this sub-class holds every record; try another
    const size_t ai = static_cast<size_t>(rng.uniform_below(pool.size()));
    size_t pi = static_cast<size_t>(rng.uniform_below(pool.size() - 1));
    if (pi >= ai) ++pi;
    // Negative drawn uniformly over all other sub-classes' records.
    long ni = static_cast<long>(rng.uniform_below(static_cast<uint64_t>(negatives)));
    const ImageRecord* neg = nullptr;
    for (int s2 = 0; s2 < n_sub && !neg; ++s2) {
      if (s2 == s) continue;
      const auto& p2 = pools[static_cast<size_t>(s2)];
      if (ni < static_cast<long>(p2.size()))
        neg = p2[static_cast<size_t>(ni)];
      else
        ni -= static_cast<long>(p2.size());
    }
    out.push_back(Triplet{pool[ai]->id, pool[pi]->id, neg->id, attribute});
  }
  return out;
}

std::vector<Triplet> load_triplets(const std::string& path, const AttributeSpace& space) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open triplet file: " + path);
  std::vector<Triplet> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("triplet file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    Triplet t;
    try {
      t.anchor = j.at("anchor").get<std::string>();
      t.positive = j.at("positive").get<std::string>();
      t.negative = j.at("negative").get<std::string>();
      const std::string name = j.at("attribute").get<std::string>();
      t.attribute = space.index_of(name);
      if (t.attribute < 0) {
        throw ValidationError("triplet file " + path + " line " + std::to_string(line_no) + ": unknown attribute '" +
                              name + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError("triplet file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_triplets(const std::string& path, const std::vector<Triplet>& triplets, const AttributeSpace& space) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write triplet file: " + path);
  for (const auto& t : triplets) {
    json j;
    j["anchor"] = t.anchor;
    j["positive"] = t.positive;
    j["negative"] = t.negative;
    j["attribute"] = space.names[static_cast<size_t>(t.attribute)];
    out << j.dump() << "\n";
  }
}

long synthetic_record_count(const AttributeSpace& space, long per_subclass) {
  long l = 1;
  for (int c : space.sub_class_counts) l = std::lcm(l, static_cast<long>(c));
  return per_subclass * l;
}

DatasetSplit generate_synthetic(const AttributeSpace& space, long per_subclass, int image_size, uint64_t seed) {
  space.validate();
  if (per_subclass < 1) throw ArgumentError("per_subclass must be >= 1");
  if (image_size < 16) throw ArgumentError("image_size must be >= 16");

  const long total = synthetic_record_count(space, per_subclass);
  const int n = space.n();

  // Per attribute: exact cell counts via a block assignment followed by a
  // seeded shuffle; the shuffles decorrelate the attributes.
  std::vector<std::vector<int>> labels(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(total)));
  for (int a = 0; a < n; ++a) {
    const long per_cell = total / space.sub_class_counts[static_cast<size_t>(a)];
    for (long j = 0; j < total; ++j) labels[static_cast<size_t>(a)][static_cast<size_t>(j)] = static_cast<int>(j / per_cell);
    Rng rng(Rng::mix(seed, 0x6c61u, static_cast<uint64_t>(a)));
    rng.shuffle(labels[static_cast<size_t>(a)]);
  }

  DatasetSplit split;
  split.records.reserve(static_cast<size_t>(total));
  const int width = static_cast<int>(std::to_string(total - 1).size());
  for (long j = 0; j < total; ++j) {
    ImageRecord rec;
    std::string num = std::to_string(j);
    rec.id = "synth-" + std::string(static_cast<size_t>(width) - num.size(), '0') + num;
    rec.source = SyntheticSource{seed, j, image_size};
    for (int a = 0; a < n; ++a) rec.labels[a] = labels[static_cast<size_t>(a)][static_cast<size_t>(j)];
    split.records.push_back(std::move(rec));
  }
  split.rebuild_index();
  return split;
}

Tensor render_synthetic(const SyntheticSource& src, const std::map<int, int>& labels, const AttributeSpace& space) {
  const int size = src.image_size;
  const int n = space.n();
  Tensor img({3, size, size});

  // One horizontal band per attribute. Every attribute draws from the same
  // appearance ladder (base intensity + grating frequency indexed by the raw
  // sub-class), so pooled global statistics mix the bands ambiguously and the
  // sub-class can only be read at the band's position. The grating phase is
  // record-specific, so raw-pixel class centroids reduce to the flat base
  // intensity.
  int max_sub = 2;
  for (int c : space.sub_class_counts) max_sub = std::max(max_sub, c);
  // The bands sit inside a neutral frame so no band's content lands in the
  // border cells that convolution zero-padding distorts.
  const long margin = std::max<long>(1, size / 12);
  const long body = size - 2 * margin;
  std::vector<double> row_value(static_cast<size_t>(size) * size, 0.5);
  std::vector<double> row_stair(static_cast<size_t>(size), 0.0);
  constexpr double kPi = 3.14159265358979323846;
  for (int a = 0; a < n; ++a) {
    const int k = labels.at(a);
    const long y0 = margin + static_cast<long>(a) * body / n;
    const long y1 = margin + static_cast<long>(a + 1) * body / n;
    const double base = 0.1 + 0.8 * static_cast<double>(k) / static_cast<double>(max_sub - 1);
    const double freq = static_cast<double>(k + 1);
    Rng phase_rng(Rng::mix(src.dataset_seed, 0x7068u, static_cast<uint64_t>(src.index), static_cast<uint64_t>(a)));
    const double phase = phase_rng.uniform_real(0.0, 2.0 * kPi);
    for (long y = y0; y < y1; ++y) {
      row_stair[static_cast<size_t>(y)] = (a + 0.5) / static_cast<double>(n);
      for (long x = 0; x < size; ++x) {
        const double g = 0.10 * std::sin(2.0 * kPi * freq * static_cast<double>(x) / static_cast<double>(size) + phase);
        row_value[static_cast<size_t>(y * size + x)] = base + g;
      }
    }
  }

  // Channels 0/1 carry the pattern; channel 2 is a fixed band-aligned
  // staircase, a positional cue the attribute-guided spatial attention can
  // key on.
  Rng noise_rng(Rng::mix(src.dataset_seed, 0x6e6fu, static_cast<uint64_t>(src.index)));
  for (long ch = 0; ch < 3; ++ch) {
    for (long y = 0; y < size; ++y) {
      const double staircase = row_stair[static_cast<size_t>(y)];
      for (long x = 0; x < size; ++x) {
        const double signal =
            ch == 2 ? staircase : 0.1 * staircase + row_value[static_cast<size_t>(y * size + x)];
        double v = signal + (noise_rng.uniform_real() - 0.5) * 0.04;
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        // Snap to the 8-bit grid so in-memory pixels equal PPM round-trips.
        img.at(ch, y, x) = std::round(v * 255.0) / 255.0;
      }
    }
  }
  return img;
}

Tensor load_pixels(const ImageRecord& record, const AttributeSpace& space, int expected_size) {
  Tensor img;
  if (const auto* path = std::get_if<std::string>(&record.source)) {
    img = read_ppm(*path);
  } else {
    img = render_synthetic(std::get<SyntheticSource>(record.source), record.labels, space);
  }
  if (expected_size > 0 && (img.dim(1) != expected_size || img.dim(2) != expected_size)) {
    throw ValidationError("record '" + record.id + "': image is " + std::to_string(img.dim(1)) + "x" +
                          std::to_string(img.dim(2)) + ", expected " + std::to_string(expected_size) + "x" +
                          std::to_string(expected_size));
  }
  return img;
}

std::map<int, EvalPartition> make_eval_partition(const DatasetSplit& split, const AttributeSpace& space,
                                                 double query_fraction, uint64_t seed) {
  if (query_fraction <= 0.0 || query_fraction >= 1.0) {
    throw ArgumentError("query_fraction must lie in (0, 1)");
  }
  std::map<int, EvalPartition> pools;
  for (int a = 0; a < space.n(); ++a) {
    std::vector<std::string> ids;
    for (const auto& rec : split.records) {
      if (rec.labeled_for(a)) ids.push_back(rec.id);
    }
    if (ids.size() < 2) continue;  // no query/candidate split possible
    std::sort(ids.begin(), ids.end());
    Rng rng(Rng::mix(seed, 0x6576u, static_cast<uint64_t>(a)));
    rng.shuffle(ids);
    size_t n_query = static_cast<size_t>(std::llround(query_fraction * static_cast<double>(ids.size())));
    n_query = std::min(std::max<size_t>(n_query, 1), ids.size() - 1);
    EvalPartition part;
    part.query_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_query));
    part.candidate_ids.assign(ids.begin() + static_cast<long>(n_query), ids.end());
    std::sort(part.query_ids.begin(), part.query_ids.end());
    std::sort(part.candidate_ids.begin(), part.candidate_ids.end());
    pools.emplace(a, std::move(part));
  }
  return pools;
}

}  // namespace agman
