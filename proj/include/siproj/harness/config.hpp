#pragma once

// Experiment configuration: a flat INI-style key/value file plus key=value
// overrides from the command line.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "siproj/core.hpp"
#include "siproj/optimizers.hpp"

namespace siproj::harness {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { Toy2d, Rosenbrock3d, TinyNet, LemmaSuite, DeltaSweep, RatioSim };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Toy2d: return "toy2d";
    case ExperimentKind::Rosenbrock3d: return "rosenbrock3d";
    case ExperimentKind::TinyNet: return "tinynet";
    case ExperimentKind::LemmaSuite: return "lemma-suite";
    case ExperimentKind::DeltaSweep: return "delta-sweep";
    case ExperimentKind::RatioSim: return "ratio-sim";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment(std::string_view s) {
  for (auto k : {ExperimentKind::Toy2d, ExperimentKind::Rosenbrock3d, ExperimentKind::TinyNet,
                 ExperimentKind::LemmaSuite, ExperimentKind::DeltaSweep, ExperimentKind::RatioSim}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

enum class ScheduleKind { Constant, LinearDecay, Cosine };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::LinearDecay: return "linear-decay";
    case ScheduleKind::Cosine: return "cosine";
  }
  return "?";
}

inline std::optional<ScheduleKind> parse_schedule(std::string_view s) {
  for (auto k : {ScheduleKind::Constant, ScheduleKind::LinearDecay, ScheduleKind::Cosine}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Toy2d;
  OptimizerKind optimizer = OptimizerKind::SGDP;
  HyperParams hp;
  ScheduleKind schedule = ScheduleKind::Constant;
  std::size_t steps = 100;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  double tolerance = 1e-8;

  // toy2d
  std::vector<double> toy_init{0.001, 1.0};
  std::vector<double> toy_target{0.0, -1.0};

  // rosenbrock3d, in scaled angles (c psi, c phi)
  double rosen_psi = -2.0;
  double rosen_phi = 2.0;
  double rosen_radius = 1.0;
  double rosen_angle_scale = 1.5;

  // tinynet / delta-sweep
  std::size_t hidden = 8;
  std::size_t samples = 64;
  std::uint64_t data_seed = 7;
  double norm_eps = 0.0;
  double blob_separation = 3.0;
  double rescale_invariant = 1.0;
  std::vector<double> deltas{0.02, 0.05, 0.1, 0.2};

  // ratio-sim: geometric |p_k|^2 = rho^k, or a step sequence of `support` ones
  std::string ratio_sequence = "geometric";
  double ratio_rho = 0.99;
  std::size_t ratio_support = 100;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

}  // namespace detail

/// Applies one key/value pair. Throws ConfigError for unknown keys or
/// malformed values.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "experiment") {
    auto k = parse_experiment(value);
    if (!k) throw ConfigError("unknown experiment '" + value + "'");
    cfg.experiment = *k;
  } else if (key == "optimizer") {
    auto k = parse_optimizer(value);
    if (!k) throw ConfigError("unknown optimizer '" + value + "'");
    cfg.optimizer = *k;
  } else if (key == "schedule") {
    auto k = parse_schedule(value);
    if (!k) throw ConfigError("unknown schedule '" + value + "'");
    cfg.schedule = *k;
  } else if (key == "lr") {
    cfg.hp.lr = to_double(key, value);
  } else if (key == "momentum") {
    cfg.hp.momentum = to_double(key, value);
  } else if (key == "beta1") {
    cfg.hp.beta1 = to_double(key, value);
  } else if (key == "beta2") {
    cfg.hp.beta2 = to_double(key, value);
  } else if (key == "eps") {
    cfg.hp.eps = to_double(key, value);
  } else if (key == "weight_decay") {
    cfg.hp.weight_decay = to_double(key, value);
  } else if (key == "nesterov") {
    cfg.hp.nesterov = to_bool(key, value);
  } else if (key == "delta") {
    cfg.hp.delta = to_double(key, value);
  } else if (key == "bias_correction") {
    cfg.hp.bias_correction = to_bool(key, value);
  } else if (key == "steps") {
    cfg.steps = to_uint(key, value);
  } else if (key == "seed") {
    cfg.seed = to_uint(key, value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "tolerance") {
    cfg.tolerance = to_double(key, value);
  } else if (key == "init") {
    cfg.toy_init = to_list(key, value);
  } else if (key == "target") {
    cfg.toy_target = to_list(key, value);
  } else if (key == "init_scaled_psi") {
    cfg.rosen_psi = to_double(key, value);
  } else if (key == "init_scaled_phi") {
    cfg.rosen_phi = to_double(key, value);
  } else if (key == "init_radius") {
    cfg.rosen_radius = to_double(key, value);
  } else if (key == "angle_scale") {
    cfg.rosen_angle_scale = to_double(key, value);
  } else if (key == "hidden") {
    cfg.hidden = to_uint(key, value);
  } else if (key == "samples") {
    cfg.samples = to_uint(key, value);
  } else if (key == "data_seed") {
    cfg.data_seed = to_uint(key, value);
  } else if (key == "norm_eps") {
    cfg.norm_eps = to_double(key, value);
  } else if (key == "blob_separation") {
    cfg.blob_separation = to_double(key, value);
  } else if (key == "rescale_invariant") {
    cfg.rescale_invariant = to_double(key, value);
  } else if (key == "deltas") {
    cfg.deltas = to_list(key, value);
  } else if (key == "ratio_sequence") {
    if (value != "geometric" && value != "step") throw ConfigError("ratio_sequence must be 'geometric' or 'step'");
    cfg.ratio_sequence = value;
  } else if (key == "ratio_rho") {
    cfg.ratio_rho = to_double(key, value);
  } else if (key == "ratio_support") {
    cfg.ratio_support = to_uint(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

/// "key=value" override, as passed with --set.
inline void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  apply_setting(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

inline void validate(const ExperimentConfig& cfg) {
  try {
    cfg.hp.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.steps < 1) throw ConfigError("steps must be at least 1");
  if (cfg.hp.lr > 10.0) throw ConfigError("lr must lie in (0, 10]");
  if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (cfg.toy_init.size() != cfg.toy_target.size()) throw ConfigError("init and target must have equal length");
  if (!(cfg.rosen_radius > 0.0)) throw ConfigError("init_radius must be positive");
  if (cfg.hidden < 2) throw ConfigError("hidden must be at least 2");
  if (cfg.samples < 2) throw ConfigError("samples must be at least 2");
  if (!(cfg.norm_eps >= 0.0)) throw ConfigError("norm_eps must be non-negative");
  if (!(cfg.rescale_invariant > 0.0)) throw ConfigError("rescale_invariant must be positive");
  for (double d : cfg.deltas)
    if (!(d > 0.0)) throw ConfigError("deltas must be positive");
  if (!(cfg.ratio_rho > 0.0 && cfg.ratio_rho < 1.0)) throw ConfigError("ratio_rho must lie in (0, 1)");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty() || body.front() == '[') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_setting(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse_config(in, path.string());
}

}  // namespace siproj::harness
