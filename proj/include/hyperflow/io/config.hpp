#pragma once

#include "hyperflow/common.hpp"
#include "hyperflow/env/membership.hpp"
#include "hyperflow/io/dataset.hpp"
#include "hyperflow/line/line_graph.hpp"
#include "hyperflow/metrics/socio.hpp"
#include "hyperflow/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace hyperflow::io {

using json = nlohmann::json;

/// Every recognised key with its default. `seed` has no default and must be given.
inline const json& config_defaults() {
  static const json d = {
      {"data.edges", ""},
      {"data.features", ""},
      {"data.features_header", false},
      {"data.hyperedges", ""},
      {"data.nodes", 0},
      {"data.default_features", "degree"},
      {"data.planted", false},
      {"planted.cliques", 2},
      {"planted.size", 8},
      {"planted.inter_p", 0.0},
      {"planted.noise", 0.1},
      {"planted.block", 4},
      {"env.method", "learned"},
      {"env.C", 4},
      {"env.tau", 0.5},
      {"env.hidden", 64},
      {"env.neg_ratio", 5},
      {"env.epochs", 100},
      {"env.lr", 0.01},
      {"env.batch", 64},
      {"env.khop", 1},
      {"env.node_weights", "degree_mean"},
      {"line.max_len", 3},
      {"line.repeats", 10},
      {"line.samples", 0},
      {"model.layers", 2},
      {"model.dim_h", 16},
      {"model.dim_p", 16},
      {"model.K", 2},
      {"model.gamma", 0.5},
      {"model.activation", "relu"},
      {"model.init_scale", 0.1},
      {"model.decoder_hidden", 0},
      {"train.m_p", 0.1},
      {"train.m_n", 1.0},
      {"train.neg_ratio", 10},
      {"train.epochs", 200},
      {"train.lr", 0.01},
      {"train.optimizer", "adam"},
      {"train.mode", "pluggable"},
      {"train.task", "none"},
      {"train.lambda", 1.0},
      {"train.task_neg_ratio", 1},
      {"train.resample", true},
      {"train.snapshot_every", 50},
      {"eval.holdout", 0.0},
      {"eval.neg_per_pos", 10},
      {"metrics.rho", 0.5},
      {"metrics.samples", 10000},
      {"metrics.entropy_mode", "sum"},
      {"output", "out"},
  };
  return d;
}

/// Fully resolved configuration: defaults merged with file values and overrides.
struct RunConfig {
  json values;

  template <class T>
  T get(const std::string& key) const {
    return values.at(key).get<T>();
  }
  std::string str(const std::string& key) const { return get<std::string>(key); }
  std::size_t count(const std::string& key) const { return get<std::size_t>(key); }
  double real(const std::string& key) const { return get<double>(key); }
  bool flag(const std::string& key) const { return get<bool>(key); }
  std::uint64_t seed() const { return get<std::uint64_t>("seed"); }
  std::filesystem::path output() const { return str("output"); }

  /// Hash over every semantic value; the output directory is excluded.
  std::uint64_t hash() const {
    json sem = values;
    sem.erase("output");
    return fnv1a(sem.dump());
  }

  std::string hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
  }

  MembershipConfig membership() const {
    MembershipConfig c;
    c.envs = count("env.C");
    c.hidden = count("env.hidden");
    c.neg_ratio = count("env.neg_ratio");
    c.epochs = count("env.epochs");
    c.batch_size = count("env.batch");
    c.lr = real("env.lr");
    c.seed = derive_seed(seed(), "env");
    return c;
  }

  WalkConfig walk() const {
    WalkConfig c;
    c.max_length = count("line.max_len");
    c.repeats = count("line.repeats");
    c.seed = derive_seed(seed(), "line");
    return c;
  }

  TrainConfig train() const {
    TrainConfig c;
    c.margin_pos = real("train.m_p");
    c.margin_neg = real("train.m_n");
    c.neg_ratio = count("train.neg_ratio");
    c.epochs = count("train.epochs");
    c.learning_rate = real("train.lr");
    const auto opt = str("train.optimizer");
    if (opt == "adam") c.optimizer = OptimizerKind::adam;
    else if (opt == "sgd") c.optimizer = OptimizerKind::sgd;
    else throw ConfigError("unknown optimizer '" + opt + "'");
    const auto mode = str("train.mode");
    if (mode == "pluggable") c.mode = TrainMode::pluggable;
    else if (mode == "unpluggable") c.mode = TrainMode::unpluggable;
    else throw ConfigError("unknown training mode '" + mode + "'");
    c.seed = derive_seed(seed(), "train");
    c.task_weight = real("train.lambda");
    c.resample_negatives = flag("train.resample");
    c.shape.dim_h = count("model.dim_h");
    c.shape.dim_p = count("model.dim_p");
    c.shape.layers = count("model.layers");
    c.shape.decoder_hidden = count("model.decoder_hidden");
    c.shape.init_scale = real("model.init_scale");
    c.activation = parse_activation(str("model.activation"));
    c.hops = count("model.K");
    c.gamma = real("model.gamma");
    c.validate();
    return c;
  }

  EntropyMode entropy_mode() const {
    const auto m = str("metrics.entropy_mode");
    if (m == "sum") return EntropyMode::sum;
    if (m == "mean") return EntropyMode::mean;
    throw ConfigError("unknown entropy mode '" + m + "'");
  }

  TaskKind task() const {
    try {
      return parse_task(str("train.task"));
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  return false;
}

inline const char* kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_number_float()) return "a number";
  return "a nonnegative integer";
}

inline void assign(json& values, const std::string& key, const json& v) {
  if (key == "seed") {
    if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)))
      throw ConfigError("seed must be a nonnegative integer");
    values[key] = v.get<std::uint64_t>();
    return;
  }
  const auto& defs = config_defaults();
  if (!defs.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  const json& def = defs.at(key);
  if (!same_kind(def, v)) throw ConfigError("config key '" + key + "' must be " + kind_name(def));
  values[key] = def.is_number_float() ? json(v.get<double>()) : v;
}

}  // namespace detail

/// Parses "key=value"; the value is read as JSON when possible, otherwise as a bare string.
inline std::pair<std::string, json> parse_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + kv + "'");
  const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) v = raw;
  return {key, v};
}

inline void check_choice(const RunConfig& c, const std::string& key, std::initializer_list<const char*> allowed) {
  const auto v = c.str(key);
  for (const char* a : allowed)
    if (v == a) return;
  throw ConfigError("invalid value '" + v + "' for " + key);
}

/// Merges defaults, a flat JSON object and overrides, then validates.
inline RunConfig make_config(const json& file, const std::vector<std::pair<std::string, json>>& overrides = {},
                             bool check_paths = true) {
  if (!file.is_object()) throw ConfigError("config must be a flat JSON object");
  RunConfig c;
  c.values = config_defaults();
  for (const auto& [k, v] : file.items()) detail::assign(c.values, k, v);
  for (const auto& [k, v] : overrides) detail::assign(c.values, k, v);
  if (!c.values.contains("seed")) throw ConfigError("config needs a seed");

  check_choice(c, "env.method", {"learned", "cluster", "community", "khop", "file"});
  check_choice(c, "env.node_weights", {"degree_mean", "degree", "uniform"});
  check_choice(c, "data.default_features", {"degree", "identity"});
  check_choice(c, "metrics.entropy_mode", {"sum", "mean"});
  c.train();
  c.task();
  if (!c.flag("data.planted") && c.str("data.edges").empty()) throw ConfigError("config needs data.edges or data.planted");
  if (c.str("env.method") == "file" && c.str("data.hyperedges").empty())
    throw ConfigError("env.method=file needs data.hyperedges");
  if (c.count("env.C") < 1) throw ConfigError("env.C must be at least 1");
  const double tau = c.real("env.tau");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("env.tau must lie in (0, 1)");
  const double rho = c.real("metrics.rho");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("metrics.rho must lie in (0, 1)");
  const double holdout = c.real("eval.holdout");
  if (holdout < 0.0 || holdout >= 1.0) throw ConfigError("eval.holdout must lie in [0, 1)");
  if (c.count("line.max_len") < 1 || c.count("line.repeats") < 1) throw ConfigError("line.max_len and line.repeats must be positive");
  if (c.count("metrics.samples") < 1) throw ConfigError("metrics.samples must be positive");
  if (c.str("train.mode") == "unpluggable" && c.task() == TaskKind::none)
    throw ConfigError("unpluggable mode needs train.task");
  if (c.task() == TaskKind::link_prediction && c.count("train.task_neg_ratio") < 1)
    throw ConfigError("train.task_neg_ratio must be at least 1");
  if (check_paths) {
    for (const char* key : {"data.edges", "data.features", "data.hyperedges"}) {
      const auto p = c.str(key);
      if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError(std::string(key) + " does not exist: " + p);
    }
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& p, const std::vector<std::pair<std::string, json>>& overrides = {}) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config " + p.string());
  json file = json::parse(in, nullptr, false, true);
  if (file.is_discarded()) throw ConfigError("config is not valid JSON: " + p.string());
  // Relative data paths resolve against the config file's directory.
  const auto base = p.parent_path();
  for (const char* key : {"data.edges", "data.features", "data.hyperedges"}) {
    if (file.contains(key) && file[key].is_string()) {
      const std::filesystem::path rel = file[key].get<std::string>();
      if (!rel.empty() && rel.is_relative() && !base.empty() && !std::filesystem::exists(rel))
        file[key] = (base / rel).lexically_normal().string();
    }
  }
  return make_config(file, overrides);
}

}  // namespace hyperflow::io
