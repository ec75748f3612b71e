#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "rangeloc/commands.hpp"
#include "rangeloc/config.hpp"
#include "rangeloc/errors.hpp"
#include "rangeloc/io.hpp"
#include "rangeloc/metrics.hpp"

using namespace rangeloc;
namespace fs = std::filesystem;

namespace {

TruthSample truth_at(double t, const Vec3& p, const Mat3& R = Mat3::Identity()) {
  return {t, Pose{R, p}};
}

Estimate estimate_at(double t, const Vec3& p) {
  Estimate e;
  e.t = t;
  e.p = p;
  return e;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rangeloc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

#ifdef RANGELOC_CLI
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RANGELOC_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

// Metrics

TEST(Metrics, IdenticalStreamsAreZero) {
  std::vector<Estimate> est;
  std::vector<TruthSample> truth;
  for (int i = 0; i < 5; ++i) {
    const Vec3 p(i, 2.0 * i, 1.0);
    const Mat3 R = exp_so3(Vec3(0.1 * i, 0, 0.2));
    Estimate e = estimate_at(0.1 * i, p);
    e.R = R;
    est.push_back(e);
    truth.push_back(truth_at(0.1 * i, p, R));
  }
  const MetricsReport m = compute_metrics(est, truth);
  EXPECT_EQ(m.k, 5u);
  EXPECT_EQ(m.e_t, 0.0);
  EXPECT_EQ(m.e_rmse, 0.0);
  ASSERT_TRUE(m.e_o);
  EXPECT_NEAR(*m.e_o, 0.0, 1e-15);
}

TEST(Metrics, HandExamples) {
  const MetricsReport one = compute_metrics({estimate_at(0, Vec3(0.03, 0.04, 0))}, {truth_at(0, Vec3::Zero())});
  EXPECT_NEAR(one.e_t, 0.05, 1e-15);
  EXPECT_NEAR(one.e_rmse, 0.05, 1e-15);
  EXPECT_FALSE(one.e_o);

  const MetricsReport two = compute_metrics({estimate_at(0, Vec3(0.1, 0, 0)), estimate_at(1, Vec3(0, 0.3, 0))},
                                            {truth_at(0, Vec3::Zero()), truth_at(1, Vec3::Zero())});
  EXPECT_NEAR(two.e_t, 0.2, 1e-15);
  EXPECT_NEAR(two.e_rmse, std::sqrt(0.05), 1e-15);
  EXPECT_TRUE(two.axis_mean.isApprox(Vec3(0.05, 0.15, 0.0)));
}

TEST(Metrics, RotationErrorIsFrobenius) {
  for (double theta : {0.0, 0.01, 0.5, 2.0}) {
    const Mat3 R = exp_so3(Vec3(0, 0, theta));
    EXPECT_NEAR(rotation_error(R, Mat3::Identity()), 2.0 * std::sqrt(2.0) * std::sin(theta / 2), 1e-12);
  }
}

TEST(Metrics, NearestTruthTiesGoToEarlier) {
  const std::vector<TruthSample> truth = {truth_at(0.0, Vec3::Zero()), truth_at(1.0, Vec3(1, 0, 0))};
  EXPECT_NEAR(compute_metrics({estimate_at(0.5, Vec3::Zero())}, truth).e_t, 0.0, 1e-15);
  EXPECT_NEAR(compute_metrics({estimate_at(0.51, Vec3::Zero())}, truth).e_t, 1.0, 1e-15);
  EXPECT_NEAR(compute_metrics({estimate_at(7.0, Vec3(1, 0, 0))}, truth).e_t, 0.0, 1e-15);
  EXPECT_THROW(compute_metrics({}, truth), StreamError);
  EXPECT_THROW(compute_metrics({estimate_at(0, Vec3::Zero())}, {}), StreamError);
}

TEST(Metrics, TenSampleFixtureMatchesSpreadsheet) {
  // Column-wise recomputation of the three formulas on a fixed table.
  const double ex[10] = {0.02, -0.05, 0.00, 0.11, 0.03, -0.01, 0.07, -0.04, 0.00, 0.09};
  const double ey[10] = {0.01, 0.02, -0.06, 0.00, 0.04, 0.03, -0.02, 0.05, 0.01, -0.03};
  const double ez[10] = {-0.03, 0.01, 0.02, 0.05, -0.08, 0.00, 0.01, 0.02, 0.06, -0.02};
  std::vector<Estimate> est;
  std::vector<TruthSample> truth;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p(0.5 * i, 1.0 - 0.2 * i, 1.2);
    truth.push_back(truth_at(0.1 * i, p));
    est.push_back(estimate_at(0.1 * i, p + Vec3(ex[i], ey[i], ez[i])));
  }
  double sum = 0, sq = 0, ax = 0, ay = 0, az = 0;
  for (int i = 0; i < 10; ++i) {
    const double n2 = ex[i] * ex[i] + ey[i] * ey[i] + ez[i] * ez[i];
    sum += std::sqrt(n2);
    sq += n2;
    ax += std::abs(ex[i]);
    ay += std::abs(ey[i]);
    az += std::abs(ez[i]);
  }
  const MetricsReport m = compute_metrics(est, truth);
  EXPECT_NEAR(m.e_t, sum / 10, 1e-14);
  EXPECT_NEAR(m.e_rmse, std::sqrt(sq / 10), 1e-14);
  EXPECT_NEAR(m.axis_mean.x(), ax / 10, 1e-14);
  EXPECT_NEAR(m.axis_mean.y(), ay / 10, 1e-14);
  EXPECT_NEAR(m.axis_mean.z(), az / 10, 1e-14);
}

TEST(Metrics, MeanNeverExceedsRmseAndCdfIsConsistent) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> mag(20.0);
  std::normal_distribution<double> dir;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Estimate> est;
    std::vector<TruthSample> truth;
    const int k = 1 + trial * 7;
    for (int i = 0; i < k; ++i) {
      truth.push_back(truth_at(i, Vec3::Zero()));
      est.push_back(estimate_at(i, Vec3(dir(rng), dir(rng), dir(rng)).normalized() * mag(rng)));
    }
    const MetricsReport m = compute_metrics(est, truth);
    EXPECT_LE(m.e_t, m.e_rmse * (1 + 1e-12));
    ASSERT_FALSE(m.cdf.empty());
    std::size_t total = 0;
    double prev = 0.0;
    for (std::size_t b = 0; b < m.cdf.size(); ++b) {
      EXPECT_NEAR(m.cdf[b].upper, 0.01 * static_cast<double>(b + 1), 1e-12);
      EXPECT_GE(m.cdf[b].fraction, prev);
      prev = m.cdf[b].fraction;
      total += m.cdf[b].count;
    }
    EXPECT_EQ(total, static_cast<std::size_t>(k));
    EXPECT_DOUBLE_EQ(m.cdf.back().fraction, 1.0);
    // Every error sits in its 1 cm bin.
    for (double e : m.errors) {
      const std::size_t b = std::min(m.cdf.size() - 1, static_cast<std::size_t>(std::max(0.0, std::ceil(e / 0.01 - 1e-12) - 1)));
      EXPECT_LE(e, m.cdf[b].upper + 1e-12);
    }
  }
  EXPECT_THROW(error_cdf({0.1}, 0.0), ConfigError);
}

// File formats

TEST(Io, StreamsRoundTrip) {
  const fs::path dir = scratch("io_roundtrip");
  std::vector<RangeMeasurement> ranges = {{0.0, 0, 1.25}, {0.03, 1, 2.5}, {0.07, 3, 0.125}};
  atomic_write((dir / "r.jsonl").string(), format_ranges(ranges));
  const auto r = read_ranges((dir / "r.jsonl").string());
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r[i].t, ranges[i].t);
    EXPECT_EQ(r[i].anchor, ranges[i].anchor);
    EXPECT_EQ(r[i].d, ranges[i].d);
  }

  std::vector<OrientationMeasurement> ori = {{0.0, exp_so3(Vec3(0.1, 0.2, 0.3))}, {0.01, Mat3::Identity()}};
  atomic_write((dir / "o.jsonl").string(), format_orientations(ori));
  const auto o = read_orientations((dir / "o.jsonl").string());
  ASSERT_EQ(o.size(), 2u);
  EXPECT_LT((o[0].R - ori[0].R).norm(), 1e-15);

  const AnchorSet anchors = preset_anchors("paper-outdoor");
  atomic_write((dir / "a.jsonl").string(), format_anchors(anchors));
  const AnchorSet a = read_anchors((dir / "a.jsonl").string());
  ASSERT_EQ(a.size(), 4u);
  for (AnchorId id : anchors.ids()) EXPECT_EQ(a.position(id), anchors.position(id));

  std::vector<Estimate> est = {estimate_at(0.5, Vec3(1, 2, 3)), estimate_at(0.6, Vec3(1, 2, 4))};
  atomic_write((dir / "e.jsonl").string(), format_estimates(est));
  const auto e = read_estimates((dir / "e.jsonl").string());
  ASSERT_EQ(e.size(), 2u);
  EXPECT_FALSE(e[0].R);
  EXPECT_EQ(e[1].p, est[1].p);
  EXPECT_EQ(format_estimates(e), format_estimates(est));

  std::vector<TruthSample> truth = {truth_at(0.0, Vec3(1, 1, 1), exp_so3(Vec3(0, 0, 1)))};
  atomic_write((dir / "t.jsonl").string(), format_truth(truth));
  EXPECT_EQ(format_truth(read_truth((dir / "t.jsonl").string())), format_truth(truth));
}

TEST(Io, ParseErrorsCarryLocation) {
  const fs::path dir = scratch("io_errors");
  const auto expect_parse_error = [&](const std::string& text, const std::string& needle) {
    write_text(dir / "bad.jsonl", text);
    try {
      read_ranges((dir / "bad.jsonl").string());
      ADD_FAILURE() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_parse_error("{\"t\": 0, \"anchor\": 0, \"d\": 1}\nnot json\n", "bad.jsonl:2");
  expect_parse_error("{\"t\": 0, \"anchor\": 0}\n", "bad.jsonl:1");
  expect_parse_error("{\"t\": 1, \"anchor\": 0, \"d\": 1}\n{\"t\": 1, \"anchor\": 1, \"d\": 1}\n", "increase");
  EXPECT_THROW(read_ranges((dir / "missing.jsonl").string()), ParseError);
}

TEST(Io, RotationParsing) {
  const Mat3 R = exp_so3(Vec3(0.3, -0.2, 0.1));
  std::vector<double> v(9);
  for (int i = 0; i < 9; ++i) v[static_cast<std::size_t>(i)] = R(i / 3, i % 3);
  EXPECT_LT((rotation_from_row_major(v) - R).norm(), 1e-15);
  v[0] += 5e-4;  // near-rotation is projected
  EXPECT_TRUE(is_rotation(rotation_from_row_major(v), 1e-12));
  v[0] += 0.1;
  EXPECT_THROW(rotation_from_row_major(v), ParseError);
  EXPECT_THROW(rotation_from_row_major({1, 0, 0}), ParseError);
}

TEST(Io, AtomicWriteReplacesWithoutLeftovers) {
  const fs::path dir = scratch("io_atomic");
  const std::string path = (dir / "out.txt").string();
  atomic_write(path, "first\n");
  atomic_write(path, "second\n");
  EXPECT_EQ(read_file(path), "second\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  atomic_write((dir / "nested" / "x.txt").string(), "x");
  EXPECT_EQ(read_file((dir / "nested" / "x.txt").string()), "x");
  EXPECT_THROW(atomic_write((dir / "out.txt" / "x").string(), "x"), std::exception);
}

// Configuration

TEST(Config, PresetsAndOverrides) {
  RunConfig cfg = preset_config("paper-indoor");
  EXPECT_EQ(cfg.estimator.window, 10u);
  EXPECT_EQ(cfg.estimator.lm.max_iterations, 10);
  EXPECT_DOUBLE_EQ(cfg.estimator.f, 32.46);
  cfg.set("estimator.window", "20");
  cfg.set("lm.hessian", "gauss-newton");
  EXPECT_EQ(cfg.estimator.window, 20u);
  EXPECT_EQ(cfg.estimator.lm.hessian, HessianMode::GaussNewton);
  EXPECT_THROW(cfg.set("estimator.windw", "5"), ConfigError);
  EXPECT_THROW(cfg.set("estimator.window", "ten"), ConfigError);
  EXPECT_THROW(cfg.set("sim.outliers", "1:2:3"), ConfigError);
  EXPECT_THROW(preset_config("mars"), ConfigError);

  const RunConfig stat = preset_config("static-test");
  EXPECT_EQ(stat.anchor_preset, "static-test");
  EXPECT_EQ(stat.noise.outliers.size(), 2u);
}

TEST(Config, TextRoundTripAndComments) {
  RunConfig cfg = preset_config("paper-outdoor");
  cfg.set("sim.outliers", "2:5:8:1.0; 0:1:2:0.5");
  cfg.set("sim.waypoints", "0,0,1; 2,0,1");
  cfg.set("seed", "17");
  const std::string text = cfg.to_text();
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.noise.outliers.size(), 2u);

  RunConfig c;
  apply_config_text(c, "# comment\n\nestimator.window = 7  # trailing\n");
  EXPECT_EQ(c.estimator.window, 7u);
  EXPECT_THROW(apply_config_text(c, "estimator.window\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "bogus.key = 1\n"), ConfigError);
  for (const auto& key : RunConfig::keys()) EXPECT_NE(text.find(key + " ="), std::string::npos) << key;
}

TEST(Config, FinalizeValidates) {
  RunConfig cfg;
  cfg.set("estimator.window", "0");
  EXPECT_THROW(cfg.finalize(), ConfigError);
  cfg = RunConfig{};
  cfg.set("estimator.eta", "-1");
  EXPECT_THROW(cfg.finalize(), ConfigError);
}

TEST(StabilityRecord, RoundTrip) {
  StabilityReport r;
  r.step = 42;
  r.delta_s = 0.5;
  r.delta_l = 1.5;
  r.mu = 1.25;
  r.alpha = 0.6;
  r.beta = 0.01;
  r.beta_proof = 2.0;
  r.c = 0.3;
  r.lambda = 1e-3;
  r.bound = 0.7;
  r.samples_used = 1000;
  r.beta_from_truth = true;
  const std::string line = format_stability(r);
  EXPECT_NE(line.find("\"PASS\""), std::string::npos);
  EXPECT_EQ(format_stability(parse_stability(line)), line);

  r.alpha = 1.2;
  r.bound.reset();
  const std::string bad = format_stability(r);
  EXPECT_NE(bad.find("\"FAIL\""), std::string::npos);
  EXPECT_FALSE(parse_stability(bad).bound);
  EXPECT_THROW(parse_stability("{\"step\": 1}"), ParseError);
}

// End-to-end runs of the executable

#ifdef RANGELOC_CLI

TEST(Cli, SimulateIsDeterministic) {
  const fs::path dir = scratch("cli_sim");
  ASSERT_EQ(run_cli("simulate --seed 9 --set sim.duration=4 --out " + (dir / "a").string(), dir / "log"), 0);
  ASSERT_EQ(run_cli("simulate --seed 9 --set sim.duration=4 --out " + (dir / "b").string(), dir / "log"), 0);
  ASSERT_EQ(run_cli("simulate --seed 10 --set sim.duration=4 --out " + (dir / "c").string(), dir / "log"), 0);
  for (const char* f : {"ranges.jsonl", "orientations.jsonl", "truth.jsonl", "anchors.jsonl"}) {
    EXPECT_EQ(read_file((dir / "a" / f).string()), read_file((dir / "b" / f).string())) << f;
  }
  EXPECT_NE(read_file((dir / "a" / "ranges.jsonl").string()), read_file((dir / "c" / "ranges.jsonl").string()));

  const AnchorSet a = read_anchors((dir / "a" / "anchors.jsonl").string());
  EXPECT_EQ(a.position(0), Vec3(3, 3, 1.95));
  EXPECT_EQ(a.position(3), Vec3(-3, -3, 1.98));
}

TEST(Cli, ZeroDurationGivesEmptyStream) {
  const fs::path dir = scratch("cli_empty");
  ASSERT_EQ(run_cli("simulate --set sim.duration=0 --out " + dir.string(), dir / "log"), 0);
  EXPECT_EQ(read_file((dir / "ranges.jsonl").string()), "");
  EXPECT_TRUE(read_ranges((dir / "ranges.jsonl").string()).empty());
}

TEST(Cli, NoiselessSlowRunIsAccurate) {
  const fs::path dir = scratch("cli_noiseless");
  const std::string common = " --set sim.duration=20 --set sim.speed=0.01 --set sim.eta=0 --out " + dir.string();
  ASSERT_EQ(run_cli("simulate" + common, dir / "log"), 0);
  ASSERT_EQ(run_cli("localize" + common, dir / "log"), 0);
  ASSERT_EQ(run_cli("evaluate" + common, dir / "log"), 0);
  const auto est = read_estimates((dir / "estimates.jsonl").string());
  const auto truth = read_truth((dir / "truth.jsonl").string());
  ASSERT_GT(est.size(), 600u);
  const MetricsReport m = compute_metrics(est, truth);
  EXPECT_LT(*std::max_element(m.errors.begin(), m.errors.end()), 1e-3);

  const std::string metrics = read_file((dir / "metrics.json").string());
  EXPECT_NE(metrics.find("\"E_T\""), std::string::npos);
  EXPECT_NE(metrics.find("\"E_RMSE\""), std::string::npos);
  const std::string cdf = read_file((dir / "cdf.csv").string());
  EXPECT_EQ(cdf.rfind("upper_m,count,cumulative_fraction\n", 0), 0u);
  EXPECT_NE(cdf.find(",1\n"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli_exit");
  ASSERT_EQ(run_cli("simulate --set sim.duration=6 --out " + dir.string(), dir / "log"), 0);

  EXPECT_EQ(run_cli("localize --set estimator.windw=3 --out " + dir.string(), dir / "log"), 2);
  EXPECT_EQ(run_cli("localize --mode sideways --out " + dir.string(), dir / "log"), 2);
  EXPECT_EQ(run_cli("localize --bogus-flag --out " + dir.string(), dir / "log"), 2);

  write_text(dir / "flat.jsonl",
             "{\"id\":0,\"p\":[0,0,0]}\n{\"id\":1,\"p\":[1,0,0]}\n{\"id\":2,\"p\":[0,1,0]}\n{\"id\":3,\"p\":[1,1,0]}\n");
  EXPECT_EQ(run_cli("localize --anchors " + (dir / "flat.jsonl").string() + " --out " + dir.string(), dir / "log"), 3);

  write_text(dir / "broken.jsonl", "{\"t\": 0, \"anchor\": 0, \"d\": }\n");
  EXPECT_EQ(run_cli("localize --ranges " + (dir / "broken.jsonl").string() + " --out " + dir.string(), dir / "log"), 5);
  EXPECT_NE(read_file((dir / "log").string()).find("broken.jsonl:1"), std::string::npos);

  // Fused mode needs an orientation stream.
  fs::remove(dir / "orientations.jsonl");
  EXPECT_EQ(run_cli("localize --mode fused --out " + dir.string(), dir / "log"), 2);
}

TEST(Cli, AllOutlierInputRequiresRestart) {
  const fs::path dir = scratch("cli_outliers");
  const std::string common = " --set sim.duration=6 --set 'sim.outliers=0:2:6:3;1:2:6:3;2:2:6:3;3:2:6:3' --out " + dir.string();
  ASSERT_EQ(run_cli("simulate" + common, dir / "log"), 0);
  EXPECT_EQ(run_cli("localize" + common, dir / "log"), 4);
}

TEST(Cli, DiagnoseAndBenchReports) {
  const fs::path dir = scratch("cli_diag");
  const std::string common = " --set sim.duration=3 --set stability.samples=50 --out " + dir.string();
  ASSERT_EQ(run_cli("simulate" + common, dir / "log"), 0);
  ASSERT_EQ(run_cli("diagnose" + common, dir / "log"), 0);
  std::istringstream lines(read_file((dir / "stability.jsonl").string()));
  std::string line, last;
  std::size_t parsed = 0;
  while (std::getline(lines, line)) {
    if (line.find("\"summary\"") != std::string::npos || line.find("\"all_alpha_below_one\"") != std::string::npos) {
      last = line;
      continue;
    }
    if (line.find("\"error\"") == std::string::npos) {
      const StabilityReport r = parse_stability(line);
      EXPECT_LE(r.delta_s, r.delta_l);
      EXPECT_GT(r.mu, 0.0);
      EXPECT_EQ(r.bound.has_value(), r.alpha < 1.0);
      ++parsed;
    }
  }
  EXPECT_GT(parsed, 10u);
  EXPECT_NE(last.find("\"bound\""), std::string::npos);

  const std::string bench = " --set bench.problems=20 --out ";
  ASSERT_EQ(run_cli("bench --seed 3" + bench + (dir / "b1").string(), dir / "log"), 0);
  ASSERT_EQ(run_cli("bench --seed 3" + bench + (dir / "b2").string(), dir / "log"), 0);
  EXPECT_EQ(read_file((dir / "b1" / "bench_problems.jsonl").string()),
            read_file((dir / "b2" / "bench_problems.jsonl").string()));
  const std::string report = read_file((dir / "b1" / "bench.json").string());
  EXPECT_NE(report.find("\"per_iteration\""), std::string::npos);
  EXPECT_NE(report.find("\"budget_seconds\""), std::string::npos);
}

#endif  // RANGELOC_CLI
