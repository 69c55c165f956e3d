#pragma once

// Top-level entry points: run_experiment dispatches on the configured
// experiment, writes its artifacts and returns the summary.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "siproj/harness/experiment.hpp"

namespace siproj::harness {

// ---------------------------------------------------------------------------
// Training experiments

inline void add_training_metrics(RunSummary& s) {
  const auto& cfg = s.config;
  if (cfg.experiment == ExperimentKind::Toy2d) {
    const Vec& w = s.final_params.at(0).values();
    s.metrics["terminal_similarity"] = dot(unit(w), unit(Vec(cfg.toy_target)));
  } else if (cfg.experiment == ExperimentKind::Rosenbrock3d) {
    const Vec& p = s.final_params.at(0).values();
    const SphericalPoint sp = spherical_from_cartesian(p[0], p[1], p[2]);
    s.metrics["terminal_radius"] = sp.r;
    s.metrics["terminal_scaled_psi"] = cfg.rosen_angle_scale * sp.psi;
    s.metrics["terminal_scaled_phi"] = cfg.rosen_angle_scale * sp.phi;
  }
}

inline RunSummary run_training(const ExperimentConfig& cfg) {
  RunSummary s = optimize(make_problem(cfg), cfg);
  add_training_metrics(s);
  write_outputs(s);
  return s;
}

// ---------------------------------------------------------------------------
// Delta sweep

inline void write_delta_table(const std::vector<DeltaRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "delta,variant_detection,invariant_detection,variant_decisions,invariant_decisions,"
         "min_invariant_cosine,max_invariant_cosine,min_variant_cosine,max_variant_cosine,terminal_objective\n";
  for (const auto& r : rows) {
    out << format_double(r.delta) << ',' << format_double(r.variant_detection) << ','
        << format_double(r.invariant_detection) << ',' << r.variant_decisions << ',' << r.invariant_decisions << ','
        << format_double(r.min_invariant_cosine) << ',' << format_double(r.max_invariant_cosine) << ','
        << format_double(r.min_variant_cosine) << ',' << format_double(r.max_variant_cosine) << ','
        << format_double(r.terminal_objective) << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline RunSummary run_delta_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::vector<DeltaRow> rows = delta_sweep(cfg);
  RunSummary s;
  s.config = cfg;
  json table = json::array();
  for (const auto& r : rows) {
    table.push_back({{"delta", r.delta},
                     {"variant_detection", r.variant_detection},
                     {"invariant_detection", r.invariant_detection},
                     {"variant_decisions", r.variant_decisions},
                     {"invariant_decisions", r.invariant_decisions},
                     {"min_invariant_cosine", r.min_invariant_cosine},
                     {"max_invariant_cosine", r.max_invariant_cosine},
                     {"min_variant_cosine", r.min_variant_cosine},
                     {"max_variant_cosine", r.max_variant_cosine},
                     {"terminal_objective", r.terminal_objective}});
  }
  s.metrics["delta_sweep"] = table;
  s.metrics["norm_eps"] = cfg.norm_eps;
  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);
  write_delta_table(rows, dir / "delta_sweep.csv");
  write_json(to_json(s), dir / "summary.json");
  return s;
}

// ---------------------------------------------------------------------------
// Ratio simulation

inline std::vector<double> ratio_sequence(const ExperimentConfig& cfg) {
  std::vector<double> seq(cfg.steps, 0.0);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    if (cfg.ratio_sequence == "geometric") {
      seq[k] = std::pow(cfg.ratio_rho, static_cast<double>(k));
    } else {
      seq[k] = k < cfg.ratio_support ? 1.0 : 0.0;
    }
  }
  return seq;
}

inline RunSummary run_ratio_sim(const ExperimentConfig& cfg) {
  validate(cfg);
  const double beta = cfg.hp.momentum;
  const std::vector<double> seq = ratio_sequence(cfg);
  const std::vector<double> ratios = ratio_convergence_sim(beta, seq, cfg.steps);
  RunSummary s;
  s.config = cfg;
  const double limit = asymptotic_ratio(beta);
  s.metrics["beta"] = beta;
  s.metrics["sequence"] = cfg.ratio_sequence;
  s.metrics["asymptotic_ratio"] = limit;
  s.metrics["final_ratio"] = ratios.back();
  s.metrics["final_relative_error"] = std::abs(ratios.back() - limit) / limit;

  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);
  std::ofstream out(dir / "ratios.csv", std::ios::binary);
  if (!out) throw IoError("cannot write ratios.csv");
  out << "t,ratio\n";
  for (std::size_t t = 0; t < ratios.size(); ++t) out << (t + 1) << ',' << format_double(ratios[t]) << '\n';
  out.close();
  write_json(to_json(s), dir / "summary.json");
  return s;
}

// ---------------------------------------------------------------------------
// Lemma suite

/// Random instances of a projected step: w, p drawn Gaussian in d dimensions
/// and the three iterates w_t, w_t - lr p and w_t - lr Pi(p) tested for
/// coplanarity and for the projected iterate lying on the unprojected side.
inline CheckResult projection_geometry_check(std::uint64_t seed, std::size_t instances, double tolerance) {
  Rng rng(seed);
  const std::size_t dims[] = {3, 10, 50};
  CheckResult c{.name = "projection_coplanarity"};
  bool flipped = false;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t d = dims[i % 3];
    const Vec w = rng.normal_vec(d);
    const Vec p = rng.normal_vec(d);
    const double lr = rng.uniform(0.01, 0.5);
    const Vec unprojected = w - lr * p;
    const Vec projected = w - lr * project_out(w, p);
    c.max_residual = std::max(c.max_residual, normalized_gram_determinant(w, unprojected, projected));
    const Vec w_hat = unit(w);
    if (dot(unit(projected) - w_hat, unit(unprojected) - w_hat) < 0.0) flipped = true;
    ++c.steps_checked;
  }
  c = siproj::detail::finish(c, tolerance);
  if (flipped) {
    c.status = CheckStatus::Fail;
    c.note = "projected iterate on the opposite side";
  }
  return c;
}

struct LemmaRun {
  std::string name;
  ExperimentConfig config;
};

/// The fixed set of runs certified by `siproj lemmas`.
inline std::vector<LemmaRun> lemma_runs(double tolerance) {
  std::vector<LemmaRun> runs;
  auto add = [&](std::string name, ExperimentKind exp, OptimizerKind opt, double lr, double beta, std::size_t steps) {
    ExperimentConfig c;
    c.experiment = exp;
    c.optimizer = opt;
    c.hp.lr = lr;
    c.hp.momentum = beta;
    c.steps = steps;
    c.tolerance = tolerance;
    runs.push_back({std::move(name), c});
  };
  add("gd_rosenbrock3d", ExperimentKind::Rosenbrock3d, OptimizerKind::GD, 1e-5, 0.0, 50);
  add("momentum_rosenbrock3d", ExperimentKind::Rosenbrock3d, OptimizerKind::Momentum, 1e-5, 0.9, 50);
  add("sgdp_rosenbrock3d", ExperimentKind::Rosenbrock3d, OptimizerKind::SGDP, 1e-5, 0.9, 200);
  add("adamp_rosenbrock3d", ExperimentKind::Rosenbrock3d, OptimizerKind::AdamP, 1e-3, 0.9, 200);
  add("gd_toy2d", ExperimentKind::Toy2d, OptimizerKind::GD, 0.03, 0.0, 100);
  add("momentum_toy2d", ExperimentKind::Toy2d, OptimizerKind::Momentum, 0.03, 0.9, 100);
  add("sgdp_tinynet", ExperimentKind::TinyNet, OptimizerKind::SGDP, 0.01, 0.9, 200);
  add("adamp_tinynet", ExperimentKind::TinyNet, OptimizerKind::AdamP, 0.01, 0.9, 200);
  return runs;
}

inline RunSummary run_lemma_suite(const ExperimentConfig& cfg) {
  validate(cfg);
  RunSummary s;
  s.config = cfg;
  for (const LemmaRun& run : lemma_runs(cfg.tolerance)) {
    ExperimentConfig c = run.config;
    c.seed = cfg.seed;
    const RunSummary r = optimize(make_problem(c), c);
    for (const auto& [block, report] : r.certification) s.certification[run.name + "/" + block] = report;
  }
  CertificationReport geometry;
  geometry.checks.push_back(projection_geometry_check(cfg.seed, 100, cfg.tolerance));
  s.certification["projection_geometry"] = geometry;
  s.metrics["tolerance"] = cfg.tolerance;
  const std::filesystem::path dir = cfg.out_dir;
  ensure_dir(dir);
  write_json(to_json(s), dir / "summary.json");
  return s;
}

// ---------------------------------------------------------------------------
// Dispatch

inline RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  RunSummary s;
  switch (cfg.experiment) {
    case ExperimentKind::Toy2d:
    case ExperimentKind::Rosenbrock3d:
    case ExperimentKind::TinyNet: s = run_training(cfg); break;
    case ExperimentKind::DeltaSweep: s = run_delta_sweep(cfg); break;
    case ExperimentKind::RatioSim: s = run_ratio_sim(cfg); break;
    case ExperimentKind::LemmaSuite: s = run_lemma_suite(cfg); break;
  }
  s.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

/// Runs one copy of `cfg` per seed on up to `jobs` worker threads, each into
/// out_dir/seed_<n>, then writes out_dir/sweep_index.json. Runs that throw
/// are recorded in the index with their error message.
inline json run_seed_sweep(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  jobs = std::max(1u, jobs);
  std::vector<json> entries(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex index_mutex;
  json index = json::object();

  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      ExperimentConfig c = cfg;
      c.seed = seeds[i];
      c.out_dir = (std::filesystem::path(cfg.out_dir) / ("seed_" + std::to_string(seeds[i]))).string();
      json entry;
      try {
        const RunSummary s = run_experiment(c);
        entry = {{"seed", seeds[i]},
                 {"terminal_objective", s.terminal_objective},
                 {"certification_passed", s.certification_passed()},
                 {"out", c.out_dir}};
      } catch (const std::exception& e) {
        entry = {{"seed", seeds[i]}, {"error", e.what()}};
      }
      std::lock_guard lock(index_mutex);
      entries[i] = std::move(entry);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < std::min<std::size_t>(jobs, seeds.size()); ++j) pool.emplace_back(worker);
  }
  index["schema_version"] = kSchemaVersion;
  index["runs"] = entries;
  ensure_dir(cfg.out_dir);
  write_json(index, std::filesystem::path(cfg.out_dir) / "sweep_index.json");
  return index;
}

}  // namespace siproj::harness
