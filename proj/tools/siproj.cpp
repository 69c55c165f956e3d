#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "siproj/siproj.hpp"

namespace {

using namespace siproj;
using namespace siproj::harness;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCertification = 2;

void print_certification(const RunSummary& s) {
  for (const auto& [name, report] : s.certification) {
    for (const auto& c : report.checks) {
      std::printf("  %-40s %-32s %-4s max_residual=%.3g steps=%zu%s%s\n", name.c_str(), c.name.c_str(),
                  to_string(c.status), c.max_residual, c.steps_checked, c.note.empty() ? "" : " ",
                  c.note.c_str());
    }
  }
}

void print_summary(const RunSummary& s) {
  if (!s.blocks.empty())
    std::printf("%s/%s: objective %.6g -> %.6g\n", std::string(to_string(s.config.experiment)).c_str(),
              std::string(to_string(s.config.optimizer)).c_str(), s.initial_objective, s.terminal_objective);
  for (const auto& b : s.blocks) {
    std::printf("  block %-10s invariant=%d norm %.6g -> %.6g\n", b.name.c_str(), b.invariant ? 1 : 0,
                b.initial_norm, b.terminal_norm);
  }
  if (s.metrics.contains("delta_sweep")) {
    std::printf("  %-10s %-10s %-10s\n", "delta", "variant", "invariant");
    for (const auto& row : s.metrics["delta_sweep"]) {
      std::printf("  %-10.4g %-10.4f %-10.4f\n", row["delta"].get<double>(), row["variant_detection"].get<double>(),
                  row["invariant_detection"].get<double>());
    }
  }
  if (s.metrics.contains("final_ratio")) {
    std::printf("  final ratio %.6g (limit %.6g)\n", s.metrics["final_ratio"].get<double>(),
                s.metrics["asymptotic_ratio"].get<double>());
  }
  print_certification(s);
  std::printf("  output %s (%.3f s)\n", s.config.out_dir.c_str(), s.wall_clock_seconds);
}

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  for (double v : harness::detail::to_list("seeds", list)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) throw ConfigError("seeds must be integers");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Norm-growth analysis and projected optimizers on scale-invariant toy problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool strict = false;
  std::string seeds;
  unsigned jobs = 1;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--strict", strict, "Exit with status 2 if certification fails");
  run->add_option("--set", overrides, "Override a config key (key=value)");
  run->add_option("--seeds", seeds, "Comma-separated seeds; runs one copy per seed");
  run->add_option("--jobs", jobs, "Worker threads for --seeds")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep-delta", "Detection accuracy of the projection test across deltas");
  sweep->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--set", overrides, "Override a config key (key=value)");

  double tolerance = 1e-8;
  auto* lemmas = app.add_subcommand("lemmas", "Certify the norm identities on fixed reference runs");
  lemmas->add_option("--tolerance", tolerance, "Maximum relative residual")->check(CLI::PositiveNumber);
  lemmas->add_option("--out", out_dir, "Output directory");
  auto* lemma_seed = lemmas->add_option("--seed", seed, "Seed");

  double beta = 0.9;
  std::size_t ratio_steps = 5000;
  auto* ratio = app.add_subcommand("ratio-sim", "Momentum over GD norm growth for a shared update-norm sequence");
  ratio->add_option("--beta", beta, "Momentum coefficient")->required();
  ratio->add_option("--steps", ratio_steps, "Number of steps")->required();
  ratio->add_option("--out", out_dir, "Output directory");
  ratio->add_option("--set", overrides, "Override a config key (key=value)");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (run->parsed() || sweep->parsed()) {
      cfg = load_with_overrides(config_path, overrides);
      if (sweep->parsed()) cfg.experiment = ExperimentKind::DeltaSweep;
      if (*seed_opt) cfg.seed = seed;
    } else if (lemmas->parsed()) {
      cfg.experiment = ExperimentKind::LemmaSuite;
      cfg.tolerance = tolerance;
      if (*lemma_seed) cfg.seed = seed;
    } else {
      cfg = load_with_overrides("", overrides);
      cfg.experiment = ExperimentKind::RatioSim;
      cfg.hp.momentum = beta;
      cfg.steps = ratio_steps;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (run->parsed() && !seeds.empty()) {
      const json index = run_seed_sweep(cfg, parse_seeds(seeds), jobs);
      bool ok = true;
      for (const auto& e : index["runs"]) {
        const bool failed = e.contains("error") || !e["certification_passed"].get<bool>();
        std::printf("seed %llu: %s\n", static_cast<unsigned long long>(e["seed"].get<std::uint64_t>()),
                    e.contains("error") ? e["error"].get<std::string>().c_str() : (failed ? "certification FAIL" : "ok"));
        if (e.contains("error")) return kExitError;
        ok = ok && !failed;
      }
      return strict && !ok ? kExitCertification : kExitOk;
    }

    const RunSummary s = run_experiment(cfg);
    print_summary(s);
    if (!s.certification_passed() && (strict || lemmas->parsed())) return kExitCertification;
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
