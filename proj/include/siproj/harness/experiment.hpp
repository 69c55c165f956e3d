#pragma once

// Optimizer loop over the experiment objectives, run summaries and their
// JSON form (sorted keys), and the delta-sensitivity sweep.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "siproj/analysis.hpp"
#include "siproj/core.hpp"
#include "siproj/harness/config.hpp"
#include "siproj/harness/schedule.hpp"
#include "siproj/harness/trajectory_io.hpp"
#include "siproj/objectives.hpp"
#include "siproj/optimizers.hpp"

namespace siproj::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct BlockSummary {
  std::string name;
  bool invariant = false;
  double initial_norm = 0.0;
  double terminal_norm = 0.0;
  double max_norm = 0.0;
  std::size_t slice_decisions = 0;  // slice-steps evaluated by the detector
  std::size_t slices_projected = 0;
  double min_cosine = 1.0;
  double max_cosine = 0.0;
};

struct RunSummary {
  ExperimentConfig config;
  double initial_objective = 0.0;
  double terminal_objective = 0.0;
  std::vector<BlockSummary> blocks;
  std::map<std::string, CertificationReport> certification;
  json metrics = json::object();
  double wall_clock_seconds = 0.0;  // reported on stdout only; not serialized
  std::vector<std::vector<TrajectoryRecord>> trajectories;  // one per block
  std::vector<ParamBlock> final_params;

  [[nodiscard]] bool certification_passed() const {
    return std::all_of(certification.begin(), certification.end(), [](const auto& kv) { return kv.second.passed(); });
  }

  [[nodiscard]] const BlockSummary& block(const std::string& name) const {
    for (const auto& b : blocks)
      if (b.name == name) return b;
    throw Error("no block named '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Problems

struct Problem {
  std::shared_ptr<const Objective> objective;
  std::vector<ParamBlock> params;
};

/// Toy2d minimizes the signed cosine to -target, i.e. maximizes the cosine
/// similarity to `target`, starting from `init`.
inline Problem make_toy2d(const ExperimentConfig& cfg) {
  const Vec anti_target = -1.0 * Vec(cfg.toy_target);
  auto obj = std::make_shared<SingleBlockObjective>(
      [anti_target](const Vec& w) { return cosine_toy_2d(w, anti_target); }, true);
  return {obj, {ParamBlock("w", Vec(cfg.toy_init))}};
}

inline Problem make_rosenbrock3d(const ExperimentConfig& cfg) {
  const double c = cfg.rosen_angle_scale;
  auto obj = std::make_shared<SingleBlockObjective>([c](const Vec& p) { return rosenbrock_3d(p, c); }, true);
  return {obj, {ParamBlock("w", rosenbrock_point(cfg.rosen_psi, cfg.rosen_phi, cfg.rosen_radius, c))}};
}

inline TinyNetConfig tinynet_config(const ExperimentConfig& cfg) {
  TinyNetConfig t;
  t.hidden = cfg.hidden;
  t.samples = cfg.samples;
  t.data_seed = cfg.data_seed;
  t.norm_eps = cfg.norm_eps;
  t.blob_separation = cfg.blob_separation;
  return t;
}

inline Problem make_tinynet(const ExperimentConfig& cfg) {
  auto net = std::make_shared<TinyNormNet>(tinynet_config(cfg));
  Rng rng(cfg.seed);
  auto params = net->initial_params(rng);
  if (cfg.rescale_invariant != 1.0) params[0].set_values(cfg.rescale_invariant * params[0].values());
  return {net, std::move(params)};
}

inline Problem make_problem(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::Toy2d: return make_toy2d(cfg);
    case ExperimentKind::Rosenbrock3d: return make_rosenbrock3d(cfg);
    case ExperimentKind::TinyNet:
    case ExperimentKind::DeltaSweep: return make_tinynet(cfg);
    default: throw ConfigError("experiment '" + std::string(to_string(cfg.experiment)) + "' has no optimization problem");
  }
}

/// True when every declared-invariant block is exactly invariant, so the
/// norm identities are expected to hold.
inline bool exactly_invariant(const ExperimentConfig& cfg) {
  return !(cfg.experiment == ExperimentKind::TinyNet || cfg.experiment == ExperimentKind::DeltaSweep) ||
         cfg.norm_eps == 0.0;
}

// ---------------------------------------------------------------------------
// Optimization loop

/// Runs cfg.steps optimizer steps on `problem`, logging one record per block
/// per step. Pure computation: writes nothing.
inline RunSummary optimize(const Problem& problem, const ExperimentConfig& cfg) {
  validate(cfg);
  RunSummary s;
  s.config = cfg;
  const Objective& obj = *problem.objective;
  std::vector<ParamBlock> params = problem.params;
  const auto invariant = obj.invariance();
  std::vector<OptState> states;
  for (const auto& p : params) {
    states.push_back(OptState::zeros(p.size()));
    s.blocks.push_back({p.name(), false, l2_norm(p.values()), 0.0, l2_norm(p.values())});
  }
  for (std::size_t b = 0; b < params.size(); ++b) s.blocks[b].invariant = invariant[b];
  s.trajectories.resize(params.size());

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    HyperParams hp = cfg.hp;
    hp.lr = lr_schedule(cfg.schedule, cfg.hp.lr, t, cfg.steps);
    const Evaluation eval = obj.evaluate(params);
    if (t == 0) s.initial_objective = eval.value;
    for (std::size_t b = 0; b < params.size(); ++b) {
      const Vec w_prev = params[b].values();
      Vec w = w_prev;
      const StepReport rep = step(cfg.optimizer, w, eval.grads[b], states[b], hp, params[b].slices());
      s.trajectories[b].push_back(record_step(t, w_prev, w, rep, eval.value, hp.lr));
      for (const SliceReport& sr : rep.slices) {
        ++s.blocks[b].slice_decisions;
        s.blocks[b].slices_projected += sr.projected ? 1 : 0;
        s.blocks[b].min_cosine = std::min(s.blocks[b].min_cosine, sr.cosine);
        s.blocks[b].max_cosine = std::max(s.blocks[b].max_cosine, sr.cosine);
      }
      s.blocks[b].max_norm = std::max(s.blocks[b].max_norm, l2_norm(w));
      params[b].set_values(std::move(w));
    }
  }
  s.terminal_objective = obj.value(params);
  for (std::size_t b = 0; b < params.size(); ++b) s.blocks[b].terminal_norm = l2_norm(params[b].values());

  if (cfg.hp.weight_decay == 0.0 && exactly_invariant(cfg)) {
    const RunContext ctx{cfg.optimizer, cfg.hp.momentum, cfg.hp.nesterov, cfg.hp.weight_decay};
    for (std::size_t b = 0; b < params.size(); ++b) {
      if (invariant[b]) s.certification[params[b].name()] = certify_trajectory(s.trajectories[b], ctx, cfg.tolerance);
    }
  }
  s.final_params = std::move(params);
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const CertificationReport& r) {
  json checks = json::object();
  for (const auto& c : r.checks) {
    checks[c.name] = {{"status", to_string(c.status)},
                      {"max_residual", c.max_residual},
                      {"steps_checked", c.steps_checked},
                      {"note", c.note}};
  }
  return {{"passed", r.passed()}, {"checks", checks}};
}

inline json hyperparams_json(const HyperParams& hp) {
  return {{"lr", hp.lr},       {"momentum", hp.momentum},         {"beta1", hp.beta1},
          {"beta2", hp.beta2}, {"eps", hp.eps},                   {"weight_decay", hp.weight_decay},
          {"nesterov", hp.nesterov}, {"delta", hp.delta}, {"bias_correction", hp.bias_correction}};
}

inline json to_json(const RunSummary& s) {
  json blocks = json::object();
  for (const auto& b : s.blocks) {
    blocks[b.name] = {{"invariant", b.invariant},
                      {"initial_weight_norm", b.initial_norm},
                      {"terminal_weight_norm", b.terminal_norm},
                      {"norm_growth", b.terminal_norm - b.initial_norm},
                      {"max_weight_norm", b.max_norm}};
  }
  json cert = json::object();
  for (const auto& [name, report] : s.certification) cert[name] = to_json(report);
  return {{"schema_version", kSchemaVersion},
          {"experiment", to_string(s.config.experiment)},
          {"optimizer", to_string(s.config.optimizer)},
          {"schedule", to_string(s.config.schedule)},
          {"steps", s.config.steps},
          {"seed", s.config.seed},
          {"hyperparams", hyperparams_json(s.config.hp)},
          {"initial_objective", s.initial_objective},
          {"terminal_objective", s.terminal_objective},
          {"blocks", blocks},
          {"certification", cert},
          {"certification_passed", s.certification_passed()},
          {"metrics", s.metrics}};
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

inline void write_outputs(const RunSummary& s) {
  const std::filesystem::path dir = s.config.out_dir;
  ensure_dir(dir);
  for (std::size_t b = 0; b < s.blocks.size() && b < s.trajectories.size(); ++b) {
    write_trajectory_csv(s.trajectories[b], dir / ("trajectory_" + s.blocks[b].name + ".csv"));
  }
  write_json(to_json(s), dir / "summary.json");
}

// ---------------------------------------------------------------------------
// Delta sweep

struct DeltaRow {
  double delta = 0.0;
  double variant_detection = 0.0;    // fraction of variant-slice decisions left unprojected
  double invariant_detection = 0.0;  // fraction of invariant-slice decisions projected
  std::size_t variant_decisions = 0;
  std::size_t invariant_decisions = 0;
  double min_invariant_cosine = 0.0;
  double max_invariant_cosine = 0.0;
  double min_variant_cosine = 0.0;
  double max_variant_cosine = 0.0;
  double terminal_objective = 0.0;
};

/// One run of cfg.steps steps per delta; every slice decision of every step
/// is scored against the block's declared invariance.
inline std::vector<DeltaRow> delta_sweep(const ExperimentConfig& base) {
  if (!is_projected(base.optimizer)) throw ConfigError("delta-sweep needs a projected optimizer (sgdp or adamp)");
  std::vector<DeltaRow> rows;
  for (double delta : base.deltas) {
    ExperimentConfig cfg = base;
    cfg.experiment = ExperimentKind::DeltaSweep;
    cfg.hp.delta = delta;
    const Problem problem = make_tinynet(cfg);
    const RunSummary run = optimize(problem, cfg);
    const auto invariant = problem.objective->invariance();

    DeltaRow row;
    row.delta = delta;
    row.min_invariant_cosine = row.min_variant_cosine = 1.0;
    std::size_t inv_ok = 0, var_ok = 0;
    for (std::size_t b = 0; b < run.blocks.size(); ++b) {
      const BlockSummary& blk = run.blocks[b];
      if (invariant[b]) {
        row.invariant_decisions += blk.slice_decisions;
        inv_ok += blk.slices_projected;
        row.min_invariant_cosine = std::min(row.min_invariant_cosine, blk.min_cosine);
        row.max_invariant_cosine = std::max(row.max_invariant_cosine, blk.max_cosine);
      } else {
        row.variant_decisions += blk.slice_decisions;
        var_ok += blk.slice_decisions - blk.slices_projected;
        row.min_variant_cosine = std::min(row.min_variant_cosine, blk.min_cosine);
        row.max_variant_cosine = std::max(row.max_variant_cosine, blk.max_cosine);
      }
    }
    row.invariant_detection =
        row.invariant_decisions ? static_cast<double>(inv_ok) / static_cast<double>(row.invariant_decisions) : 1.0;
    row.variant_detection =
        row.variant_decisions ? static_cast<double>(var_ok) / static_cast<double>(row.variant_decisions) : 1.0;
    row.terminal_objective = run.terminal_objective;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace siproj::harness
