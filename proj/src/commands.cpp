#include "rangeloc/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rangeloc/errors.hpp"
#include "rangeloc/io.hpp"
#include "rangeloc/sim.hpp"

namespace rangeloc {

using nlohmann::json;

namespace {

constexpr double kRealTimeBudget = 1.0 / kDefaultRangeRate;  // s

bool fused(const EstimatorConfig& cfg) { return cfg.mode == EstimatorMode::RangeOrientation; }

AnchorSet load_anchors(const RunConfig& cfg) {
  const std::string path = resolve_path(cfg, cfg.paths.anchors, "anchors.jsonl");
  return read_anchors(path);
}

std::vector<OrientationMeasurement> load_orientations(const RunConfig& cfg) {
  if (!fused(cfg.estimator)) return {};
  const std::string path = resolve_path(cfg, cfg.paths.orientations, "orientations.jsonl");
  if (!std::filesystem::exists(path)) {
    throw ConfigError("fused mode requires an orientation file (" + path + " not found)");
  }
  return read_orientations(path);
}

std::string out_file(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.paths.out) / name).string();
}

json update_json(const UpdateRecord& u) {
  return {{"t", u.t},
          {"status", to_string(u.status)},
          {"iterations", u.iterations},
          {"initial_cost", u.initial_cost},
          {"final_cost", u.final_cost},
          {"solve_seconds", u.solve_seconds}};
}

std::string json_lines(const std::vector<json>& items) {
  std::string out;
  for (const auto& j : items) out += j.dump() + "\n";
  return out;
}

std::optional<json> optional_number(const std::optional<double>& v) {
  if (!v) return std::nullopt;
  return json(*v);
}

}  // namespace

std::string resolve_path(const RunConfig& cfg, const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  return out_file(cfg, name);
}

void require_geometry(const AnchorSet& anchors) {
  if (anchors.size() < 4 || !anchors.is_non_coplanar()) {
    throw InsufficientGeometry("at least four non-coplanar anchors are required (got " +
                               std::to_string(anchors.size()) + ")");
  }
}

LocalizationRun run_localization(const EstimatorConfig& cfg, const AnchorSet& anchors,
                                 const std::vector<RangeMeasurement>& ranges,
                                 const std::vector<OrientationMeasurement>& orientations,
                                 const RunOptions& options) {
  Estimator est(cfg, anchors);
  LocalizationRun run;
  std::vector<SyncedMeasurement> synced;
  if (fused(cfg)) synced = synchronize(ranges, orientations);

  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const Update u = fused(cfg) ? est.process_range_orientation(synced[i].range, synced[i].orientation)
                                : est.process_range(ranges[i]);
    UpdateRecord rec;
    rec.t = ranges[i].t;
    rec.status = u.status;
    if (u.report) {
      rec.iterations = u.report->iterations;
      rec.initial_cost = u.report->initial_cost;
      rec.final_cost = u.report->final_cost;
      rec.solve_seconds = u.report->wall_time_seconds;
      run.reports.push_back(*u.report);
    }
    run.updates.push_back(rec);
    for (const auto& w : u.warnings) run.warnings.push_back(w);
    if (u.estimate) run.estimates.push_back(*u.estimate);
    if (u.status == UpdateStatus::Rejected) ++run.rejections;
    if (options.on_update) options.on_update(est, u, i);
    if (u.status == UpdateStatus::RestartRequired) {
      ++run.restarts;
      ++run.rejections;
      if (options.stop_on_restart) {
        run.stopped_on_restart = true;
        break;
      }
    }
  }
  return run;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const AnchorSet anchors =
      cfg.paths.anchors.empty() ? preset_anchors(cfg.anchor_preset) : read_anchors(cfg.paths.anchors);
  const Trajectory traj(cfg.trajectory);
  const auto truth = traj.sample(cfg.estimator.f);
  const auto ranges = simulate_ranges(truth, anchors, cfg.noise, cfg.seed);
  const auto orientations = simulate_orientation(traj, cfg.imu_rate, cfg.noise, cfg.seed + 1);

  atomic_write(out_file(cfg, "anchors.jsonl"), format_anchors(anchors));
  atomic_write(out_file(cfg, "ranges.jsonl"), format_ranges(ranges));
  atomic_write(out_file(cfg, "orientations.jsonl"), format_orientations(orientations));
  atomic_write(out_file(cfg, "truth.jsonl"), format_truth(truth));
  atomic_write(out_file(cfg, "config.txt"), cfg.to_text());
  log << "simulate: " << ranges.size() << " ranges, " << orientations.size() << " orientations, "
      << anchors.size() << " anchors -> " << cfg.paths.out << "\n";
  return kExitOk;
}

int cmd_localize(const RunConfig& cfg, std::ostream& log) {
  const AnchorSet anchors = load_anchors(cfg);
  require_geometry(anchors);
  const auto ranges = read_ranges(resolve_path(cfg, cfg.paths.ranges, "ranges.jsonl"));
  const auto orientations = load_orientations(cfg);

  RunOptions opt;
  opt.stop_on_restart = true;
  const LocalizationRun run = run_localization(cfg.estimator, anchors, ranges, orientations, opt);
  for (const auto& w : run.warnings) {
    if (w.find("insufficient geometry") != std::string::npos) throw InsufficientGeometry(w);
  }

  std::vector<json> records;
  for (const auto& u : run.updates) records.push_back(update_json(u));
  const std::string est_path = resolve_path(cfg, cfg.paths.estimates, "estimates.jsonl");
  atomic_write(est_path, format_estimates(run.estimates));
  atomic_write(out_file(cfg, "solve_reports.jsonl"), json_lines(records));
  log << "localize: " << run.estimates.size() << " estimates, " << run.rejections << " rejected -> "
      << est_path << "\n";
  if (run.stopped_on_restart) {
    log << "localize: restart required after too many consecutive rejections at t="
        << run.updates.back().t << "; leave the degraded area and restart\n";
    return kExitRestart;
  }
  return kExitOk;
}

std::string format_metrics(const MetricsReport& m) {
  json cdf = json::array();
  for (const auto& b : m.cdf) cdf.push_back({{"upper", b.upper}, {"count", b.count}, {"fraction", b.fraction}});
  json j{{"k", m.k},
         {"E_T", m.e_t},
         {"E_RMSE", m.e_rmse},
         {"E_O", optional_number(m.e_o).value_or(json(nullptr))},
         {"axis_mean", {m.axis_mean.x(), m.axis_mean.y(), m.axis_mean.z()}},
         {"rejections", m.rejections},
         {"mean_solve_seconds", m.mean_solve_seconds},
         {"cdf", cdf}};
  return j.dump(2) + "\n";
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const auto estimates = read_estimates(resolve_path(cfg, cfg.paths.estimates, "estimates.jsonl"));
  const auto truth = read_truth(resolve_path(cfg, cfg.paths.truth, "truth.jsonl"));
  MetricsReport m = compute_metrics(estimates, truth);

  const std::string reports = out_file(cfg, "solve_reports.jsonl");
  if (std::filesystem::exists(reports)) {
    std::istringstream in(read_file(reports));
    std::string line;
    double total = 0.0;
    std::size_t solves = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string status = j.at("status").get<std::string>();
      if (status == "rejected" || status == "restart-required") ++m.rejections;
      if (status == "accepted" || status == "bootstrapped") {
        total += j.at("solve_seconds").get<double>();
        ++solves;
      }
    }
    if (solves > 0) m.mean_solve_seconds = total / static_cast<double>(solves);
  }

  std::string csv = "upper_m,count,cumulative_fraction\n";
  for (const auto& b : m.cdf) {
    std::ostringstream row;
    row << b.upper << "," << b.count << "," << b.fraction << "\n";
    csv += row.str();
  }
  atomic_write(out_file(cfg, "metrics.json"), format_metrics(m));
  atomic_write(out_file(cfg, "cdf.csv"), csv);
  log << "evaluate: k=" << m.k << " E_T=" << m.e_t << " E_RMSE=" << m.e_rmse;
  if (m.e_o) log << " E_O=" << *m.e_o;
  log << " axis=(" << m.axis_mean.x() << ", " << m.axis_mean.y() << ", " << m.axis_mean.z() << ")\n";
  return kExitOk;
}

std::string format_stability(const StabilityReport& r) {
  json j{{"step", r.step},
         {"delta_s", r.delta_s},
         {"delta_l", r.delta_l},
         {"mu", r.mu},
         {"alpha", r.alpha},
         {"beta", r.beta},
         {"beta_proof", r.beta_proof},
         {"c", r.c},
         {"lambda", r.lambda},
         {"bound", optional_number(r.bound).value_or(json(nullptr))},
         {"samples_used", r.samples_used},
         {"beta_from_truth", r.beta_from_truth},
         {"inner_approximation", r.inner_approximation},
         {"status", r.alpha < 1.0 ? "PASS" : "FAIL"}};
  return j.dump();
}

StabilityReport parse_stability(const std::string& line) {
  try {
    const json j = json::parse(line);
    StabilityReport r;
    r.step = j.at("step").get<std::size_t>();
    r.delta_s = j.at("delta_s").get<double>();
    r.delta_l = j.at("delta_l").get<double>();
    r.mu = j.at("mu").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.beta_proof = j.at("beta_proof").get<double>();
    r.c = j.at("c").get<double>();
    r.lambda = j.at("lambda").get<double>();
    if (!j.at("bound").is_null()) r.bound = j.at("bound").get<double>();
    r.samples_used = j.at("samples_used").get<std::size_t>();
    r.beta_from_truth = j.at("beta_from_truth").get<bool>();
    r.inner_approximation = j.at("inner_approximation").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("stability record: ") + e.what());
  }
}

int cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  if (fused(cfg.estimator)) throw ConfigError("diagnose supports range-only mode only");
  const AnchorSet anchors = load_anchors(cfg);
  require_geometry(anchors);
  const auto ranges = read_ranges(resolve_path(cfg, cfg.paths.ranges, "ranges.jsonl"));
  std::vector<TruthSample> truth;
  const std::string truth_path = resolve_path(cfg, cfg.paths.truth, "truth.jsonl");
  if (!cfg.paths.truth.empty() || std::filesystem::exists(truth_path)) truth = read_truth(truth_path);

  auto nearest_truth = [&](double t) -> Vec3 {
    const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                     [](const TruthSample& s, double v) { return s.t < v; });
    std::size_t j = static_cast<std::size_t>(it - truth.begin());
    if (j == truth.size() || (j > 0 && t - truth[j - 1].t <= truth[j].t - t)) --j;
    return truth[j].pose.t;
  };

  std::vector<json> lines;
  std::vector<StabilityReport> reports;
  std::size_t failures = 0;
  RunOptions opt;
  opt.on_update = [&](const Estimator& est, const Update& u, std::size_t index) {
    if (u.status != UpdateStatus::Accepted || !est.last_graph()) return;
    const auto snap = est.snapshot();
    std::optional<Eigen::VectorXd> window_truth;
    if (!truth.empty()) {
      Eigen::VectorXd tr(3 * static_cast<Eigen::Index>(snap.entries.size()));
      for (std::size_t i = 0; i < snap.entries.size(); ++i) set_state(tr, i, nearest_truth(snap.entries[i].t));
      window_truth = tr;
    }
    const auto& rep = *est.last_report();
    const double lambda = rep.lambdas.empty() ? cfg.estimator.lm.lambda_init : rep.lambdas.front();
    DiagnoseOptions d = cfg.stability;
    d.seed = cfg.stability.seed + index;
    try {
      StabilityReport r = diagnose_window(*est.last_graph(), est.last_initial_state(), lambda, d, window_truth);
      r.step = index;
      if (!(r.alpha < 1.0)) ++failures;
      reports.push_back(r);
      lines.push_back(json::parse(format_stability(r)));
    } catch (const SamplingFailure& e) {
      ++failures;
      lines.push_back({{"step", index}, {"status", "FAIL"}, {"error", e.what()}});
    }
  };
  const LocalizationRun run = run_localization(cfg.estimator, anchors, ranges, {}, opt);

  const ErrorBound proof = error_bound(reports, std::nullopt, BetaSource::Proof);
  const ErrorBound measured = error_bound(reports, std::nullopt, BetaSource::Measured);
  json summary{{"steps", lines.size()},
               {"failures", failures},
               {"all_alpha_below_one", failures == 0 && !reports.empty()},
               {"alpha", proof.alpha},
               {"beta_proof", proof.beta},
               {"beta_measured", measured.beta},
               {"c", proof.c},
               {"bound", optional_number(proof.asymptotic).value_or(json(nullptr))},
               {"bound_measured_beta", optional_number(measured.asymptotic).value_or(json(nullptr))},
               {"offending_step", proof.offending_step ? json(*proof.offending_step) : json(nullptr)},
               {"restarts", run.restarts}};
  lines.push_back({{"summary", summary}});
  atomic_write(out_file(cfg, "stability.jsonl"), json_lines(lines));
  log << "diagnose: " << reports.size() << " windows, " << failures << " with alpha >= 1 or sampling failure";
  if (proof.asymptotic) log << ", bound " << *proof.asymptotic << " m";
  log << "\n";
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg, std::ostream& log) {
  if (fused(cfg.estimator)) throw ConfigError("bench supports range-only mode only");
  const AnchorSet anchors =
      cfg.paths.anchors.empty() ? preset_anchors(cfg.anchor_preset) : read_anchors(cfg.paths.anchors);
  require_geometry(anchors);
  TrajectorySpec spec = cfg.trajectory;
  // Rejected measurements are not solved, so simulate well past the requested count.
  spec.duration = 4.0 * static_cast<double>(cfg.bench.problems + cfg.estimator.window + 1) / cfg.estimator.f;
  const auto truth = Trajectory(spec).sample(cfg.estimator.f);
  const auto ranges = simulate_ranges(truth, anchors, cfg.noise, cfg.seed);

  std::vector<double> solve;
  std::map<std::size_t, std::pair<double, std::size_t>> per_iteration;
  RunOptions opt;
  opt.on_update = [&](const Estimator&, const Update& u, std::size_t) {
    if (u.status != UpdateStatus::Accepted || !u.report) return;
    if (solve.size() >= cfg.bench.problems) return;
    solve.push_back(u.report->wall_time_seconds);
    for (std::size_t i = 0; i < u.report->iteration_seconds.size(); ++i) {
      per_iteration[i].first += u.report->iteration_seconds[i];
      per_iteration[i].second += 1;
    }
  };
  run_localization(cfg.estimator, anchors, ranges, {}, opt);
  if (solve.empty()) throw ConfigError("bench produced no window solves; check the scenario");

  double total = 0.0;
  for (double s : solve) total += s;
  const double mean = total / static_cast<double>(solve.size());
  json iters = json::array();
  for (const auto& [i, acc] : per_iteration) {
    iters.push_back({{"iteration", i + 1}, {"mean_seconds", acc.first / static_cast<double>(acc.second)},
                     {"count", acc.second}});
  }
  json report{{"window", cfg.estimator.window},
              {"max_iterations", cfg.estimator.lm.max_iterations},
              {"problems", solve.size()},
              {"mean_solve_seconds", mean},
              {"max_solve_seconds", *std::max_element(solve.begin(), solve.end())},
              {"budget_seconds", kRealTimeBudget},
              {"within_budget", mean <= kRealTimeBudget},
              {"stretch_goal_seconds", 2.0 * 0.0019},
              {"within_stretch_goal", mean <= 2.0 * 0.0019},
              {"per_iteration", iters}};
  atomic_write(out_file(cfg, "bench_problems.jsonl"), format_ranges(ranges));
  atomic_write(out_file(cfg, "bench.json"), report.dump(2) + "\n");
  log << "bench: N=" << cfg.estimator.window << " M=" << cfg.estimator.lm.max_iterations << " mean solve "
      << mean * 1e3 << " ms over " << solve.size() << " windows (budget " << kRealTimeBudget * 1e3
      << " ms)\n";
  return kExitOk;
}

}  // namespace rangeloc
