#include "core/config.hpp"

#include <fstream>
#include <set>

#include "core/error.hpp"

using nlohmann::json;

namespace agman {

TripletMode triplet_mode_from_string(const std::string& s) {
  if (s == "similarity_corrected") return TripletMode::similarity_corrected;
  if (s == "as_written") return TripletMode::as_written;
  throw ConfigError("train.triplet_mode must be 'similarity_corrected' or 'as_written', got '" + s + "'");
}

std::string to_string(TripletMode m) {
  return m == TripletMode::similarity_corrected ? "similarity_corrected" : "as_written";
}

namespace {

void check_keys(const json& j, const std::string& scope, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + scope + "' must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key: " + (scope.empty() ? key : scope + "." + key));
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::array<double, 3> get_triple(const json& j, const std::string& scope, const char* key,
                                 std::array<double, 3> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ConfigError("config key '" + scope + "." + key + "' must be [r,g,b]");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const {
  return space == o.space && backbone == o.backbone && model == o.model && train == o.train && eval == o.eval &&
         data == o.data && synth == o.synth && workers == o.workers;
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, "", {"attributes", "backbone", "model", "train", "eval", "data", "synth", "workers"});
  RunConfig c;

  if (!j.contains("attributes")) throw ConfigError("missing required config key: attributes");
  if (!j.at("attributes").is_array() || j.at("attributes").empty()) {
    throw ConfigError("config key 'attributes' must be a non-empty array");
  }
  for (const auto& item : j.at("attributes")) {
    check_keys(item, "attributes[]", {"name", "sub_classes"});
    if (!item.contains("name") || !item.contains("sub_classes")) {
      throw ConfigError("each attributes[] entry needs 'name' and 'sub_classes'");
    }
    c.space.names.push_back(item.at("name").get<std::string>());
    c.space.sub_class_counts.push_back(item.at("sub_classes").get<int>());
  }

  const json jb = j.value("backbone", json::object());
  check_keys(jb, "backbone", {"profile", "input_size", "channels", "pretrained", "norm_mean", "norm_std"});
  c.backbone.profile = get_or<std::string>(jb, "profile", "tinynet");
  const bool resnet = c.backbone.profile == "resnet50";
  c.backbone.input_size = get_or<int>(jb, "input_size", resnet ? 224 : 64);
  if (resnet) {
    c.backbone.channels.clear();
    if (jb.contains("channels")) throw ConfigError("backbone.channels applies to the tinynet profile only");
  } else {
    c.backbone.channels = get_or<std::vector<long>>(jb, "channels", {16, 32, 64, 128});
  }
  c.backbone.pretrained = get_or<std::string>(jb, "pretrained", "");
  const std::array<double, 3> def_mean = resnet ? std::array<double, 3>{0.485, 0.456, 0.406}
                                                : std::array<double, 3>{0.0, 0.0, 0.0};
  const std::array<double, 3> def_std = resnet ? std::array<double, 3>{0.229, 0.224, 0.225}
                                               : std::array<double, 3>{1.0, 1.0, 1.0};
  c.backbone.norm_mean = get_triple(jb, "backbone", "norm_mean", def_mean);
  c.backbone.norm_std = get_triple(jb, "backbone", "norm_std", def_std);

  const json jm = j.value("model", json::object());
  check_keys(jm, "model",
             {"embedding_size", "asa_channels", "aca_hidden", "ca_reduction", "enable_asa", "enable_sa", "enable_aca",
              "enable_ca", "enable_fusion"});
  c.model.embedding_size = get_or<long>(jm, "embedding_size", resnet ? 1024 : 128);
  c.model.asa_channels = get_or<long>(jm, "asa_channels", resnet ? 512 : 32);
  c.model.aca_hidden = get_or<long>(jm, "aca_hidden", c.model.embedding_size / 2);
  c.model.ca_reduction = get_or<long>(jm, "ca_reduction", resnet ? 16 : 4);
  c.model.enable_asa = get_or<bool>(jm, "enable_asa", true);
  c.model.enable_sa = get_or<bool>(jm, "enable_sa", true);
  c.model.enable_aca = get_or<bool>(jm, "enable_aca", true);
  c.model.enable_ca = get_or<bool>(jm, "enable_ca", true);
  c.model.enable_fusion = get_or<bool>(jm, "enable_fusion", true);

  const json jt = j.value("train", json::object());
  check_keys(jt, "train",
             {"batch_size", "learning_rate", "lr_step", "lr_gamma", "epochs", "margin", "triplets_per_epoch", "seed",
              "triplet_mode", "enable_classification_loss", "optimizer", "class_weights"});
  c.train.batch_size = get_or<long>(jt, "batch_size", 16);
  c.train.learning_rate = get_or<double>(jt, "learning_rate", 1e-4);
  c.train.lr_step = get_or<long>(jt, "lr_step", 3);
  c.train.lr_gamma = get_or<double>(jt, "lr_gamma", 0.9);
  c.train.epochs = get_or<long>(jt, "epochs", 50);
  c.train.margin = get_or<double>(jt, "margin", 0.2);
  c.train.triplets_per_epoch = get_or<long>(jt, "triplets_per_epoch", 512);
  c.train.seed = get_or<uint64_t>(jt, "seed", 1);
  c.train.triplet_mode = triplet_mode_from_string(get_or<std::string>(jt, "triplet_mode", "similarity_corrected"));
  c.train.enable_classification_loss = get_or<bool>(jt, "enable_classification_loss", true);
  c.train.optimizer = get_or<std::string>(jt, "optimizer", "adam");
  c.train.class_weights = get_or<std::vector<double>>(jt, "class_weights", {});

  const json je = j.value("eval", json::object());
  check_keys(je, "eval", {"query_fraction", "seed", "triplet_count"});
  c.eval.query_fraction = get_or<double>(je, "query_fraction", 0.2);
  c.eval.seed = get_or<uint64_t>(je, "seed", 17);
  c.eval.triplet_count = get_or<long>(je, "triplet_count", 500);

  const json jd = j.value("data", json::object());
  check_keys(jd, "data", {"manifest", "val_manifest"});
  c.data.manifest = get_or<std::string>(jd, "manifest", "");
  c.data.val_manifest = get_or<std::string>(jd, "val_manifest", "");

  const json js = j.value("synth", json::object());
  check_keys(js, "synth", {"per_subclass", "image_size", "seed"});
  c.synth.per_subclass = get_or<long>(js, "per_subclass", 12);
  c.synth.image_size = get_or<int>(js, "image_size", c.backbone.input_size);
  c.synth.seed = get_or<uint64_t>(js, "seed", 7);

  c.workers = get_or<int>(j, "workers", 1);

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json attrs = json::array();
  for (size_t i = 0; i < space.names.size(); ++i) {
    attrs.push_back({{"name", space.names[i]}, {"sub_classes", space.sub_class_counts[i]}});
  }
  json jb{{"profile", backbone.profile},
          {"input_size", backbone.input_size},
          {"pretrained", backbone.pretrained},
          {"norm_mean", backbone.norm_mean},
          {"norm_std", backbone.norm_std}};
  if (backbone.profile != "resnet50") jb["channels"] = backbone.channels;
  return json{{"attributes", attrs},
              {"backbone", jb},
              {"model",
               {{"embedding_size", model.embedding_size},
                {"asa_channels", model.asa_channels},
                {"aca_hidden", model.aca_hidden},
                {"ca_reduction", model.ca_reduction},
                {"enable_asa", model.enable_asa},
                {"enable_sa", model.enable_sa},
                {"enable_aca", model.enable_aca},
                {"enable_ca", model.enable_ca},
                {"enable_fusion", model.enable_fusion}}},
              {"train",
               {{"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"lr_step", train.lr_step},
                {"lr_gamma", train.lr_gamma},
                {"epochs", train.epochs},
                {"margin", train.margin},
                {"triplets_per_epoch", train.triplets_per_epoch},
                {"seed", train.seed},
                {"triplet_mode", to_string(train.triplet_mode)},
                {"enable_classification_loss", train.enable_classification_loss},
                {"optimizer", train.optimizer},
                {"class_weights", train.class_weights}}},
              {"eval", {{"query_fraction", eval.query_fraction}, {"seed", eval.seed}, {"triplet_count", eval.triplet_count}}},
              {"data", {{"manifest", data.manifest}, {"val_manifest", data.val_manifest}}},
              {"synth", {{"per_subclass", synth.per_subclass}, {"image_size", synth.image_size}, {"seed", synth.seed}}},
              {"workers", workers}};
}

void RunConfig::validate() const {
  try {
    space.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("attributes: ") + e.what());
  }
  if (backbone.profile != "tinynet" && backbone.profile != "resnet50") {
    throw ConfigError("backbone.profile must be 'tinynet' or 'resnet50', got '" + backbone.profile + "'");
  }
  if (backbone.profile == "tinynet") {
    if (backbone.channels.size() != 4) throw ConfigError("backbone.channels must list 4 stage widths");
    for (long ch : backbone.channels) {
      if (ch < 1) throw ConfigError("backbone.channels entries must be positive");
    }
    if (backbone.input_size < 16 || backbone.input_size % 16 != 0) {
      throw ConfigError("backbone.input_size must be a positive multiple of 16 for tinynet");
    }
  } else {
    if (backbone.input_size < 32 || backbone.input_size % 32 != 0) {
      throw ConfigError("backbone.input_size must be a positive multiple of 32 for resnet50");
    }
  }
  for (double s : backbone.norm_std) {
    if (s <= 0) throw ConfigError("backbone.norm_std entries must be positive");
  }
  if (model.embedding_size < 1) throw ConfigError("model.embedding_size must be positive");
  if (model.asa_channels < 1) throw ConfigError("model.asa_channels must be positive");
  if (model.aca_hidden < 1) throw ConfigError("model.aca_hidden must be positive");
  if (model.ca_reduction < 1) throw ConfigError("model.ca_reduction must be positive");
  if (model.embedding_size % model.ca_reduction != 0) {
    throw ConfigError("model.ca_reduction " + std::to_string(model.ca_reduction) +
                      " must divide model.embedding_size " + std::to_string(model.embedding_size));
  }
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (train.learning_rate < 0) throw ConfigError("train.learning_rate must be non-negative");
  if (train.lr_step < 1) throw ConfigError("train.lr_step must be >= 1");
  if (train.lr_gamma <= 0 || train.lr_gamma > 1) throw ConfigError("train.lr_gamma must lie in (0, 1]");
  if (train.epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (train.margin < 0) throw ConfigError("train.margin must be non-negative");
  if (train.triplets_per_epoch < 1) throw ConfigError("train.triplets_per_epoch must be positive");
  if (train.optimizer != "adam" && train.optimizer != "sgd") {
    throw ConfigError("train.optimizer must be 'adam' or 'sgd', got '" + train.optimizer + "'");
  }
  if (!train.class_weights.empty()) {
    if (static_cast<int>(train.class_weights.size()) != space.n()) {
      throw ConfigError("train.class_weights must have one entry per attribute");
    }
    for (double w : train.class_weights) {
      if (w <= 0) throw ConfigError("train.class_weights entries must be positive");
    }
  }
  if (eval.query_fraction <= 0 || eval.query_fraction >= 1) throw ConfigError("eval.query_fraction must lie in (0, 1)");
  if (eval.triplet_count < 1) throw ConfigError("eval.triplet_count must be positive");
  if (synth.per_subclass < 1) throw ConfigError("synth.per_subclass must be positive");
  if (synth.image_size < 16) throw ConfigError("synth.image_size must be >= 16");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

json apply_json_override(json j, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("override key must be non-empty");
  std::string pointer = "/";
  for (char ch : dotted_key) pointer += (ch == '.') ? '/' : ch;
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // not valid JSON; take it as a string
  }
  try {
    j[json::json_pointer(pointer)] = parsed;
  } catch (const json::exception& e) {
    throw ConfigError("cannot apply override '" + dotted_key + "': " + e.what());
  }
  return j;
}

void RunConfig::apply_override(const std::string& dotted_key, const std::string& value) {
  *this = from_json(apply_json_override(to_json(), dotted_key, value));
}

}  // namespace agman
