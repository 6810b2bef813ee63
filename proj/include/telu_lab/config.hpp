#pragma once
/*
 * Run configuration: a JSON document plus dotted key=value overrides.
 *
 *   {
 *     "model": {"layers": [{"type": "dense", "in": 32, "out": 32},
 *                          {"type": "activation"},
 *                          {"type": "dense", "in": 32, "out": 10}]},
 *     "activation": "telu",
 *     "optimizer": {"kind": "sgd", "lr": 0.1, "weight_decay": 0.003, "momentum": 0.9,
 *                   "betas": [0.9, 0.999], "eps": 1e-8, "rms_alpha": 0.99},
 *     "schedule": {"gamma": 0.2, "milestones": [6, 12, 16]},
 *     "epochs": 20, "batch": 128,
 *     "dataset": {"name": "blobs", "n": 2000, "classes": 10, "dim": 32, "spread": 0.2,
 *                 "test_n": 500, "seed": 0, "path": "", "limit": 5000, "test_limit": 10000,
 *                 "standardize": false, "split": {"train": 1800, "valid": 200, "seed": 0}},
 *     "seeds": [0, 1, 2],
 *     "grid": {"lr": [...], "weight_decay": [...], "gamma": [...]},
 *     "landscape": {"grid": 21, "radius": 1.0, "seed": 0, "samples": 500, "train": true},
 *     "fisher": {"samples": 256, "train": true},
 *     "jobs": 1
 *   }
 *
 * Every key is optional. Unknown keys are errors naming their full path.
 * Overrides address the same tree: optimizer.lr=0.05, seeds=[0,1],
 * model.layers.0.out=64. The value is read as JSON when it parses, otherwise
 * as a string.
 */

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "telu_lab/activation.hpp"
#include "telu_lab/errors.hpp"
#include "telu_lab/harness.hpp"
#include "telu_lab/io.hpp"
#include "telu_lab/model.hpp"
#include "telu_lab/optim.hpp"

namespace telu_lab {

struct LandscapeConfig {
  std::size_t grid = 21;
  double radius = 1.0;
  std::uint64_t seed = 0;
  std::size_t samples = 500;  // evaluation subset of the training split
  bool train = true;          // train with the first seed before probing
};

struct FisherConfig {
  std::size_t samples = 256;
  bool train = true;
};

struct RunConfig {
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> grid_lr{0.01, 0.1};
  std::vector<double> grid_weight_decay{0.0, 0.003};
  std::vector<double> grid_gamma{0.2};
  LandscapeConfig landscape;
  FisherConfig fisher;
  std::size_t jobs = 1;

  GridSpec grid() const { return GridSpec{grid_lr, grid_weight_decay, grid_gamma, train}; }
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown key");
  }
}

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& path);

template <>
inline double get_as<double>(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

template <>
inline std::size_t get_as<std::size_t>(const nlohmann::json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
  throw ConfigError(path + ": expected a non-negative integer");
}

template <>
inline bool get_as<bool>(const nlohmann::json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
  return v.get<bool>();
}

template <>
inline std::string get_as<std::string>(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

template <class T>
void read(const nlohmann::json& obj, const std::string& path, std::string_view key, T& out) {
  if (auto it = obj.find(std::string(key)); it != obj.end()) out = get_as<T>(*it, join(path, key));
}

template <class T>
void read_list(const nlohmann::json& obj, const std::string& path, std::string_view key, std::vector<T>& out) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string p = join(path, key);
  if (!it->is_array()) throw ConfigError(p + ": expected a list");
  out.clear();
  for (std::size_t i = 0; i < it->size(); ++i) out.push_back(get_as<T>((*it)[i], p + "[" + std::to_string(i) + "]"));
}

inline ActivationKind activation_from(const nlohmann::json& v, const std::string& path) {
  const auto name = get_as<std::string>(v, path);
  const auto kind = parse_activation(name);
  if (!kind) throw ConfigError(path + ": unknown activation '" + name + "'");
  return *kind;
}

inline LayerSpec layer_from(const nlohmann::json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path + ": expected an object");
  const auto type_it = v.find("type");
  if (type_it == v.end()) throw ConfigError(path + ".type: missing");
  const auto type = get_as<std::string>(*type_it, path + ".type");
  LayerSpec l;
  if (type == "dense") {
    check_keys(v, path, {"type", "in", "out"});
    l.type = LayerSpec::Type::Dense;
    read(v, path, "in", l.in);
    read(v, path, "out", l.out);
  } else if (type == "conv2d") {
    check_keys(v, path, {"type", "in_ch", "out_ch", "k"});
    l.type = LayerSpec::Type::Conv2d;
    read(v, path, "in_ch", l.in_ch);
    read(v, path, "out_ch", l.out_ch);
    read(v, path, "k", l.k);
  } else if (type == "maxpool2") {
    check_keys(v, path, {"type"});
    l.type = LayerSpec::Type::MaxPool2;
  } else if (type == "flatten") {
    check_keys(v, path, {"type"});
    l.type = LayerSpec::Type::Flatten;
  } else if (type == "activation") {
    check_keys(v, path, {"type", "activation"});
    l.type = LayerSpec::Type::Activation;
    if (v.contains("activation")) l.activation = activation_from(v["activation"], path + ".activation");
  } else {
    throw ConfigError(path + ".type: unknown layer type '" + type + "' (dense, conv2d, maxpool2, flatten, activation)");
  }
  return l;
}

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j{{"type", to_string(l.type)}};
  switch (l.type) {
    case LayerSpec::Type::Dense: j["in"] = l.in; j["out"] = l.out; break;
    case LayerSpec::Type::Conv2d: j["in_ch"] = l.in_ch; j["out_ch"] = l.out_ch; j["k"] = l.k; break;
    case LayerSpec::Type::Activation:
      if (l.activation) j["activation"] = to_string(*l.activation);
      break;
    default: break;
  }
  return j;
}

// Default architectures: an MLP dim-32-classes for blobs, a two-stage
// conv net for 3x32x32 images.
inline std::vector<LayerSpec> default_layers(const DatasetConfig& d) {
  const std::size_t classes = d.name == "cifar100" ? 100 : d.name == "cifar10" ? 10 : d.classes;
  if (d.name == "blobs") {
    return {LayerSpec::dense(d.dim, 32), LayerSpec::act(), LayerSpec::dense(32, classes)};
  }
  return {LayerSpec::conv2d(3, 8, 3), LayerSpec::act(), LayerSpec::maxpool2(),
          LayerSpec::conv2d(8, 16, 3), LayerSpec::act(), LayerSpec::maxpool2(),
          LayerSpec::flatten(), LayerSpec::dense(16 * 6 * 6, classes)};
}

}  // namespace detail

// Sets the dotted `path` in `doc` to `value`, creating objects on the way.
// Numeric segments index existing arrays.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  nlohmann::json* node = &doc;
  const auto parts = io::split(key, '.');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& part = parts[i];
    if (part.empty()) throw ConfigError("override '" + key + "': empty path segment");
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "': '" + part + "' is not a list index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + key + "': index " + part + " out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = nlohmann::json::object();
      if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is below a scalar");
      node = &(*node)[part];
    }
    if (last) *node = value;
  }
}

// Parses a full document (already merged with overrides).
inline RunConfig parse_run_config(const nlohmann::json& doc) {
  using detail::check_keys;
  using detail::read;
  using detail::read_list;
  RunConfig rc;
  TrainConfig& t = rc.train;
  if (doc.is_null()) return parse_run_config(nlohmann::json::object());
  check_keys(doc, "", {"model", "activation", "optimizer", "schedule", "epochs", "batch", "dataset", "seeds", "grid",
                       "landscape", "fisher", "jobs"});

  DatasetConfig& d = t.dataset;
  if (doc.contains("dataset")) {
    const auto& j = doc["dataset"];
    check_keys(j, "dataset", {"name", "path", "n", "classes", "dim", "spread", "test_n", "seed", "limit", "test_limit",
                              "standardize", "split"});
    read(j, "dataset", "name", d.name);
    read(j, "dataset", "path", d.path);
    read(j, "dataset", "n", d.n);
    read(j, "dataset", "classes", d.classes);
    read(j, "dataset", "dim", d.dim);
    read(j, "dataset", "spread", d.spread);
    read(j, "dataset", "test_n", d.test_n);
    read(j, "dataset", "seed", d.seed);
    read(j, "dataset", "limit", d.limit);
    read(j, "dataset", "test_limit", d.test_limit);
    read(j, "dataset", "standardize", d.standardize);
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, "dataset.split", {"train", "valid", "test", "seed"});
      SplitSpec spec;
      read(s, "dataset.split", "train", spec.train);
      read(s, "dataset.split", "valid", spec.valid);
      read(s, "dataset.split", "test", spec.test);
      read(s, "dataset.split", "seed", spec.seed);
      d.split = spec;
    }
    if (d.name != "blobs" && d.name != "cifar10" && d.name != "cifar100") {
      throw ConfigError("dataset.name: unknown dataset '" + d.name + "' (blobs, cifar10, cifar100)");
    }
  }

  if (doc.contains("model")) {
    const auto& m = doc["model"];
    check_keys(m, "model", {"layers"});
    if (m.contains("layers")) {
      if (!m["layers"].is_array()) throw ConfigError("model.layers: expected a list");
      for (std::size_t i = 0; i < m["layers"].size(); ++i)
        t.layers.push_back(detail::layer_from(m["layers"][i], "model.layers[" + std::to_string(i) + "]"));
    }
  }
  if (t.layers.empty()) t.layers = detail::default_layers(d);

  if (doc.contains("activation")) t.activation = detail::activation_from(doc["activation"], "activation");

  OptimizerConfig& o = t.optimizer;
  if (doc.contains("optimizer")) {
    const auto& j = doc["optimizer"];
    check_keys(j, "optimizer", {"kind", "lr", "weight_decay", "momentum", "betas", "eps", "rms_alpha"});
    if (j.contains("kind")) {
      const auto name = detail::get_as<std::string>(j["kind"], "optimizer.kind");
      const auto kind = parse_optimizer(name);
      if (!kind) throw ConfigError("optimizer.kind: unknown optimizer '" + name + "' (sgd, momentum, adamw, rmsprop)");
      o.kind = *kind;
    }
    read(j, "optimizer", "lr", o.lr);
    read(j, "optimizer", "weight_decay", o.weight_decay);
    read(j, "optimizer", "momentum", o.momentum);
    read(j, "optimizer", "eps", o.eps);
    read(j, "optimizer", "rms_alpha", o.rms_alpha);
    if (j.contains("betas")) {
      std::vector<double> b;
      read_list(j, "optimizer", "betas", b);
      if (b.size() != 2) throw ConfigError("optimizer.betas: expected two numbers");
      o.beta1 = b[0];
      o.beta2 = b[1];
    }
  }

  read(doc, "", "epochs", t.epochs);
  read(doc, "", "batch", t.batch);

  t.schedule.gamma = 1.0;
  t.schedule.milestones = scale_milestones({60, 120, 160}, 200, std::max<std::size_t>(1, t.epochs));
  if (doc.contains("schedule")) {
    const auto& j = doc["schedule"];
    check_keys(j, "schedule", {"gamma", "milestones"});
    read(j, "schedule", "gamma", t.schedule.gamma);
    read_list(j, "schedule", "milestones", t.schedule.milestones);
  }
  t.schedule.initial_lr = o.lr;

  read_list(doc, "", "seeds", rc.seeds);
  if (rc.seeds.empty()) throw ConfigError("seeds: must not be empty");
  t.seed = rc.seeds.front();

  if (doc.contains("grid")) {
    const auto& j = doc["grid"];
    check_keys(j, "grid", {"lr", "weight_decay", "gamma"});
    read_list(j, "grid", "lr", rc.grid_lr);
    read_list(j, "grid", "weight_decay", rc.grid_weight_decay);
    read_list(j, "grid", "gamma", rc.grid_gamma);
  }
  if (doc.contains("landscape")) {
    const auto& j = doc["landscape"];
    check_keys(j, "landscape", {"grid", "radius", "seed", "samples", "train"});
    read(j, "landscape", "grid", rc.landscape.grid);
    read(j, "landscape", "radius", rc.landscape.radius);
    read(j, "landscape", "seed", rc.landscape.seed);
    read(j, "landscape", "samples", rc.landscape.samples);
    read(j, "landscape", "train", rc.landscape.train);
  }
  if (doc.contains("fisher")) {
    const auto& j = doc["fisher"];
    check_keys(j, "fisher", {"samples", "train"});
    read(j, "fisher", "samples", rc.fisher.samples);
    read(j, "fisher", "train", rc.fisher.train);
  }
  read(doc, "", "jobs", rc.jobs);
  if (rc.jobs == 0) throw ConfigError("jobs: must be >= 1");

  t.validate();
  return rc;
}

inline nlohmann::json load_config_document(const std::optional<std::filesystem::path>& path,
                                           const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (path) {
    const std::string text = io::read_text(*path);
    doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path->string() + ": not valid JSON");
    if (!doc.is_object()) throw ConfigError(path->string() + ": top level must be an object");
  }
  for (const auto& o : overrides) {
    // indexing into layers that only exist as defaults: write the defaults out first
    const bool indexes_layers = o.rfind("model.layers.", 0) == 0;
    if (indexes_layers && !(doc.contains("model") && doc["model"].is_object() && doc["model"].contains("layers"))) {
      nlohmann::json layers = nlohmann::json::array();
      for (const auto& l : parse_run_config(doc).train.layers) layers.push_back(detail::layer_to_json(l));
      doc["model"]["layers"] = layers;
    }
    apply_override(doc, o);
  }
  return doc;
}

inline RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                                 const std::vector<std::string>& overrides = {}) {
  return parse_run_config(load_config_document(path, overrides));
}

// Fully resolved configuration, in the same schema the parser reads.
inline nlohmann::json to_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  const DatasetConfig& d = t.dataset;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : t.layers) layers.push_back(detail::layer_to_json(l));
  nlohmann::json dataset{{"name", d.name},     {"path", d.path},   {"n", d.n},         {"classes", d.classes},
                         {"dim", d.dim},       {"spread", d.spread}, {"test_n", d.test_n}, {"seed", d.seed},
                         {"limit", d.limit},   {"test_limit", d.test_limit}, {"standardize", d.standardize}};
  if (d.split) {
    dataset["split"] = {{"train", d.split->train}, {"valid", d.split->valid}, {"test", d.split->test},
                        {"seed", d.split->seed}};
  }
  const OptimizerConfig& o = t.optimizer;
  return {{"model", {{"layers", layers}}},
          {"activation", to_string(t.activation)},
          {"optimizer",
           {{"kind", to_string(o.kind)},
            {"lr", o.lr},
            {"weight_decay", o.weight_decay},
            {"momentum", o.momentum},
            {"betas", {o.beta1, o.beta2}},
            {"eps", o.eps},
            {"rms_alpha", o.rms_alpha}}},
          {"schedule", {{"gamma", t.schedule.gamma}, {"milestones", t.schedule.milestones}}},
          {"epochs", t.epochs},
          {"batch", t.batch},
          {"dataset", dataset},
          {"seeds", rc.seeds},
          {"grid", {{"lr", rc.grid_lr}, {"weight_decay", rc.grid_weight_decay}, {"gamma", rc.grid_gamma}}},
          {"landscape",
           {{"grid", rc.landscape.grid},
            {"radius", rc.landscape.radius},
            {"seed", rc.landscape.seed},
            {"samples", rc.landscape.samples},
            {"train", rc.landscape.train}}},
          {"fisher", {{"samples", rc.fisher.samples}, {"train", rc.fisher.train}}},
          {"jobs", rc.jobs}};
}

}  // namespace telu_lab
