#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "siproj/siproj.hpp"

using namespace siproj;
using namespace siproj::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path("harness_scratch") / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig committed(const std::string& name) {
  return load_config(fs::path(SIPROJ_CONFIG_DIR) / (name + ".ini"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, ParsesKeysCommentsAndSections) {
  const auto cfg = parse(
      "# comment\n"
      "[run]\n"
      "experiment = rosenbrock3d ; trailing\n"
      "optimizer=adamp\n"
      "lr = 0.5\n"
      "nesterov = true\n"
      "steps = 7\n"
      "deltas = 0.1, 0.2\n"
      "init = 1, 2\n"
      "target = 3, 4\n");
  EXPECT_EQ(cfg.experiment, ExperimentKind::Rosenbrock3d);
  EXPECT_EQ(cfg.optimizer, OptimizerKind::AdamP);
  EXPECT_EQ(cfg.hp.lr, 0.5);
  EXPECT_TRUE(cfg.hp.nesterov);
  EXPECT_EQ(cfg.steps, 7u);
  EXPECT_EQ(cfg.deltas, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(cfg.toy_init, (std::vector<double>{1, 2}));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("experiment = imagenet\n"), ConfigError);
  EXPECT_THROW(parse("optimizer = lamb\n"), ConfigError);
  EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse("lr = fast\n"), ConfigError);
  EXPECT_THROW(parse("steps = -3\n"), ConfigError);
  EXPECT_THROW(parse("just a line\n"), ConfigError);
  EXPECT_THROW(parse("nesterov = maybe\n"), ConfigError);
  EXPECT_THROW(load_config("does/not/exist.ini"), IoError);
}

TEST(Config, ErrorMessageNamesLine) {
  try {
    parse("lr = 0.1\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Config, Validation) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.steps = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.hp.lr = 10.5;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg.hp.lr = 10.0;
  EXPECT_NO_THROW(validate(cfg));
  cfg.hp.lr = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.hp.momentum = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Config, Overrides) {
  ExperimentConfig cfg;
  apply_override(cfg, "lr=0.25");
  apply_override(cfg, " schedule = cosine ");
  EXPECT_EQ(cfg.hp.lr, 0.25);
  EXPECT_EQ(cfg.schedule, ScheduleKind::Cosine);
  EXPECT_THROW(apply_override(cfg, "lr"), ConfigError);
}

TEST(Config, CommittedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(SIPROJ_CONFIG_DIR)) {
    EXPECT_NO_THROW(validate(load_config(entry.path()))) << entry.path();
  }
}

// ---------------------------------------------------------------------------
// Schedule

TEST(Schedule, Examples) {
  EXPECT_EQ(lr_schedule(ScheduleKind::Constant, 0.3, 5, 10), 0.3);
  EXPECT_EQ(lr_schedule(ScheduleKind::LinearDecay, 0.3, 10, 10), 0.0);
  EXPECT_EQ(lr_schedule(ScheduleKind::LinearDecay, 0.4, 5, 10), 0.2);
  EXPECT_EQ(lr_schedule(ScheduleKind::Cosine, 0.3, 0, 10), 0.3);
  EXPECT_NEAR(lr_schedule(ScheduleKind::Cosine, 0.3, 10, 10), 0.0, 1e-17);
  EXPECT_NEAR(lr_schedule(ScheduleKind::Cosine, 0.3, 5, 10), 0.15, 1e-16);
  EXPECT_THROW(lr_schedule(ScheduleKind::Constant, 0.3, 11, 10), DomainError);
  EXPECT_THROW(lr_schedule(ScheduleKind::Constant, 0.3, 0, 0), DomainError);
}

TEST(Schedule, NonNegativeAndNonIncreasing) {
  for (auto kind : {ScheduleKind::Constant, ScheduleKind::LinearDecay, ScheduleKind::Cosine}) {
    double prev = 1.0;
    for (std::size_t t = 0; t <= 100; ++t) {
      const double lr = lr_schedule(kind, 1.0, t, 100);
      EXPECT_GE(lr, 0.0);
      EXPECT_LE(lr, prev);
      prev = lr;
    }
  }
}

// ---------------------------------------------------------------------------
// Trajectory CSV

TEST(TrajectoryCsv, HeaderOnlyAndLineCount) {
  std::ostringstream empty;
  write_trajectory_csv({}, empty);
  EXPECT_EQ(empty.str(), std::string(kTrajectoryHeader) + "\n");

  std::vector<TrajectoryRecord> recs(3);
  std::ostringstream three;
  write_trajectory_csv(recs, three);
  const std::string s = three.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}

TEST(TrajectoryCsv, RoundTripIsBitExact) {
  Rng rng(61);
  std::vector<TrajectoryRecord> recs;
  for (std::size_t t = 0; t < 50; ++t) {
    TrajectoryRecord r;
    r.step = t;
    r.weight_norm = std::exp(rng.uniform(-30, 30));
    r.effective_step = rng.uniform() * 1e-7;
    r.cosine_wg = rng.uniform() / 3.0;
    r.objective = rng.normal() * 1e5;
    r.projected = t % 3 == 0;
    r.raw_update_norm = rng.uniform(0, 1) / 7.0;
    r.applied_update_norm = rng.uniform(0, 1) * 0.1;
    recs.push_back(r);
  }
  std::stringstream buf;
  write_trajectory_csv(recs, buf);
  const auto back = read_trajectory_csv(buf);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].step, recs[i].step);
    EXPECT_EQ(back[i].weight_norm, recs[i].weight_norm);
    EXPECT_EQ(back[i].effective_step, recs[i].effective_step);
    EXPECT_EQ(back[i].cosine_wg, recs[i].cosine_wg);
    EXPECT_EQ(back[i].objective, recs[i].objective);
    EXPECT_EQ(back[i].projected, recs[i].projected);
    EXPECT_EQ(back[i].raw_update_norm, recs[i].raw_update_norm);
    EXPECT_EQ(back[i].applied_update_norm, recs[i].applied_update_norm);
  }
}

TEST(TrajectoryCsv, Errors) {
  std::istringstream bad_header("step,weight\n");
  EXPECT_THROW(read_trajectory_csv(bad_header), IoError);
  std::istringstream short_row(std::string(kTrajectoryHeader) + "\n1,2,3\n");
  EXPECT_THROW(read_trajectory_csv(short_row), IoError);
  EXPECT_THROW(write_trajectory_csv({}, fs::path("no_such_dir/x/y.csv")), IoError);
}

// ---------------------------------------------------------------------------
// Runs

TEST(RunExperiment, WritesCsvAndSortedJson) {
  ExperimentConfig cfg = committed("toy2d_sgdp");
  cfg.out_dir = scratch("toy").string();
  const RunSummary s = run_experiment(cfg);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "trajectory_w.csv"));
  const auto j = json::parse(slurp(fs::path(cfg.out_dir) / "summary.json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_TRUE(j["certification_passed"].get<bool>());
  EXPECT_TRUE(j["blocks"]["w"].contains("norm_growth"));
  EXPECT_FALSE(j.contains("wall_clock_seconds"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  std::ifstream csv_in(fs::path(cfg.out_dir) / "trajectory_w.csv");
  const auto csv = read_trajectory_csv(csv_in);
  EXPECT_EQ(csv.size(), cfg.steps);
  EXPECT_GE(s.wall_clock_seconds, 0.0);
}

TEST(RunExperiment, SameSeedByteIdenticalOutputs) {
  for (const std::string name : {"toy2d_momentum", "rosenbrock3d_sgdp", "tinynet_adamp", "delta_sweep", "ratio_sim"}) {
    ExperimentConfig cfg = committed(name);
    if (cfg.experiment == ExperimentKind::Rosenbrock3d) cfg.steps = 100;
    const fs::path a = scratch(name + "_a"), b = scratch(name + "_b");
    cfg.out_dir = a.string();
    run_experiment(cfg);
    cfg.out_dir = b.string();
    run_experiment(cfg);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
      ++files;
      EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << name << " " << entry.path().filename();
    }
    EXPECT_GE(files, 2u) << name;
  }
}

TEST(RunExperiment, InvariantRunsCertifyWithoutDecay) {
  for (const std::string name : {"toy2d_gd", "toy2d_momentum", "toy2d_sgdp", "rosenbrock3d_momentum", "rosenbrock3d_sgdp",
                                 "tinynet_adamp", "tinynet_adamw"}) {
    ExperimentConfig cfg = committed(name);
    const RunSummary s = optimize(make_problem(cfg), cfg);
    EXPECT_FALSE(s.certification.empty()) << name;
    EXPECT_TRUE(s.certification_passed()) << name;
  }
}

TEST(RunExperiment, ConfigErrors) {
  ExperimentConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = {};
  cfg.experiment = ExperimentKind::DeltaSweep;
  cfg.optimizer = OptimizerKind::AdamW;
  cfg.out_dir = scratch("bad").string();
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(RunExperiment, LemmaSuitePasses) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::LemmaSuite;
  cfg.out_dir = scratch("lemmas").string();
  const RunSummary s = run_experiment(cfg);
  EXPECT_TRUE(s.certification_passed());
  EXPECT_TRUE(s.certification.count("projection_geometry"));
  EXPECT_TRUE(s.certification.count("momentum_rosenbrock3d/w"));
}

TEST(RunExperiment, RatioSimMetrics) {
  ExperimentConfig cfg = committed("ratio_sim");
  cfg.out_dir = scratch("ratio").string();
  const RunSummary s = run_experiment(cfg);
  EXPECT_NEAR(s.metrics["asymptotic_ratio"].get<double>(), 19.0, 1e-12);
  EXPECT_LE(s.metrics["final_relative_error"].get<double>(), 0.02);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "ratios.csv"));
}

TEST(DeltaSweep, RescalingInvariantBlockKeepsClassification) {
  ExperimentConfig cfg = committed("delta_sweep");
  cfg.deltas = {0.02, 0.05, 0.1, 0.2};
  cfg.norm_eps = 0.0;
  const auto base = delta_sweep(cfg);
  for (double c : {0.5, 2.0}) {
    cfg.rescale_invariant = c;
    const auto scaled = delta_sweep(cfg);
    ASSERT_EQ(scaled.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(scaled[i].invariant_detection, base[i].invariant_detection) << "c=" << c;
      EXPECT_EQ(scaled[i].variant_detection, base[i].variant_detection) << "c=" << c;
    }
  }
}

TEST(DeltaSweep, LargeDeltaDegradesVariantDetection) {
  ExperimentConfig cfg = committed("delta_sweep");
  cfg.deltas = {5.0};
  const auto rows = delta_sweep(cfg);
  EXPECT_EQ(rows[0].invariant_detection, 1.0);
  EXPECT_LT(rows[0].variant_detection, 1.0);
}

TEST(SeedSweep, ParallelRunsMatchSerialRuns) {
  ExperimentConfig cfg = committed("tinynet_adamp");
  cfg.steps = 20;
  cfg.out_dir = scratch("sweep").string();
  const json index = run_seed_sweep(cfg, {1, 2, 3, 4}, 3);
  ASSERT_EQ(index["runs"].size(), 4u);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / "sweep_index.json"));
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    ExperimentConfig one = cfg;
    one.seed = seed;
    one.out_dir = scratch("serial").string();
    run_experiment(one);
    const fs::path parallel = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
    EXPECT_EQ(slurp(parallel / "summary.json"), slurp(fs::path(one.out_dir) / "summary.json"));
    EXPECT_EQ(slurp(parallel / "trajectory_hidden.csv"), slurp(fs::path(one.out_dir) / "trajectory_hidden.csv"));
  }
}

TEST(Outputs, UnwritableDirectoryIsIoError) {
  fs::create_directories("harness_scratch");
  std::ofstream("harness_scratch/blocker") << "x";
  ExperimentConfig cfg;
  cfg.out_dir = "harness_scratch/blocker/sub";
  EXPECT_THROW(run_experiment(cfg), IoError);
}
