#include "core/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"
#include "core/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace agman {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'M', 'A', 'N', 'P', 'R', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated parameter file: " + path);
  return v;
}

}  // namespace

void write_params_file(const std::string& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write parameter file: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, kVersion);
  write_pod<uint64_t>(out, store.entries().size());
  for (const auto& [name, entry] : store.entries()) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(entry.value.ndim()));
    for (int i = 0; i < entry.value.ndim(); ++i) write_pod<uint64_t>(out, static_cast<uint64_t>(entry.value.dim(i)));
    out.write(reinterpret_cast<const char*>(entry.value.data()),
              static_cast<std::streamsize>(entry.value.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to parameter file: " + path);
}

std::map<std::string, Tensor> read_params_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open parameter file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not an AGMANPRM parameter file: " + path);
  }
  const auto version = read_pod<uint32_t>(in, path);
  if (version != kVersion) throw ParseError("unsupported parameter file version " + std::to_string(version));
  const auto count = read_pod<uint64_t>(in, path);
  std::map<std::string, Tensor> out;
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ParseError("truncated parameter file: " + path);
    const auto rank = read_pod<uint32_t>(in, path);
    if (rank > 8) throw ParseError("parameter '" + name + "' has implausible rank in " + path);
    std::vector<long> shape(rank);
    for (auto& d : shape) d = static_cast<long>(read_pod<uint64_t>(in, path));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw ParseError("truncated parameter file: " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

long overlay_params(ParamStore& store, const std::string& path, const std::string& prefix) {
  const auto file = read_params_file(path);
  long applied = 0;
  for (const auto& [name, tensor] : file) {
    if (name.rfind(prefix, 0) != 0) continue;
    if (!store.has(name)) continue;
    Tensor& dst = store.get(name);
    if (!dst.same_shape(tensor)) {
      throw ValidationError("pretrained tensor '" + name + "' has shape " + Tensor::shape_str(tensor.shape()) +
                            ", model expects " + Tensor::shape_str(dst.shape()));
    }
    dst = tensor;
    ++applied;
  }
  return applied;
}

std::string meta_json_string(const Model& model, long epoch, const json& metrics) {
  json meta;
  meta["format_version"] = 1;
  meta["config"] = model.config().to_json();
  meta["epoch"] = epoch;
  meta["seeds"] = {{"train", model.config().train.seed},
                   {"eval", model.config().eval.seed},
                   {"synth", model.config().synth.seed}};
  meta["metrics"] = metrics.is_null() ? json::object() : metrics;
  return meta.dump(2) + "\n";
}

void save_checkpoint(const std::string& dir, const Model& model, long epoch, const json& metrics) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory: " + dir + " (" + ec.message() + ")");
  write_params_file((fs::path(dir) / "params.bin").string(), model.params());
  const std::string meta_path = (fs::path(dir) / "meta.json").string();
  std::ofstream out(meta_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + meta_path);
  out << meta_json_string(model, epoch, metrics);
  if (!out) throw IoError("short write to " + meta_path);
}

LoadedCheckpoint read_checkpoint_meta(const std::string& dir) {
  const std::string meta_path = (fs::path(dir) / "meta.json").string();
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open checkpoint meta: " + meta_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint meta " + meta_path + " is not valid JSON: " + e.what());
  }
  LoadedCheckpoint lc;
  try {
    lc.config = RunConfig::from_json(j.at("config"));
    lc.epoch = j.at("epoch").get<long>();
    lc.metrics = j.value("metrics", json::object());
  } catch (const json::exception& e) {
    throw ParseError("checkpoint meta " + meta_path + ": " + e.what());
  }
  return lc;
}

Model load_checkpoint(const std::string& dir) {
  LoadedCheckpoint lc = read_checkpoint_meta(dir);
  Model model(lc.config);
  const auto file = read_params_file((fs::path(dir) / "params.bin").string());
  auto& entries = model.params().entries();
  if (file.size() != entries.size()) {
    throw ValidationError("checkpoint " + dir + " holds " + std::to_string(file.size()) + " tensors, model expects " +
                          std::to_string(entries.size()));
  }
  for (auto& [name, entry] : entries) {
    auto it = file.find(name);
    if (it == file.end()) throw ValidationError("checkpoint " + dir + " is missing tensor '" + name + "'");
    if (!entry.value.same_shape(it->second)) {
      throw ValidationError("checkpoint tensor '" + name + "' has shape " + Tensor::shape_str(it->second.shape()) +
                            ", model expects " + Tensor::shape_str(entry.value.shape()));
    }
    entry.value = it->second;
  }
  return model;
}

}  // namespace agman
