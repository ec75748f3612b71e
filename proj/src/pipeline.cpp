#include "rangeloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "rangeloc/errors.hpp"

namespace rangeloc {

void EstimatorConfig::validate() const {
  if (window < 1) throw ConfigError("estimator.window must be >= 1");
  if (!(v_max > 0.0)) throw ConfigError("estimator.v_max must be > 0");
  if (!(eta >= 0.0)) throw ConfigError("estimator.eta must be >= 0");
  if (!(f > 0.0)) throw ConfigError("estimator.f must be > 0");
  if (!(gamma >= 1.0)) throw ConfigError("estimator.gamma must be >= 1");
  if (gate_gamma && !(*gate_gamma > 0.0)) throw ConfigError("estimator.gate_gamma must be > 0");
  if (max_rejections && !(*max_rejections >= 1.0)) {
    throw ConfigError("estimator.max_rejections must be >= 1");
  }
  if (!(iota > 0.0)) throw ConfigError("estimator.iota must be > 0");
  if (!(xi > 0.0)) throw ConfigError("estimator.xi must be > 0");
  if (!(sigma_o >= 0.0)) throw ConfigError("estimator.sigma_o must be >= 0");
  if (bootstrap_iterations < 1) throw ConfigError("estimator.bootstrap_iterations must be >= 1");
  lm.validate();
}

const char* to_string(UpdateStatus s) {
  switch (s) {
    case UpdateStatus::Buffering: return "buffering";
    case UpdateStatus::Bootstrapped: return "bootstrapped";
    case UpdateStatus::Accepted: return "accepted";
    case UpdateStatus::Rejected: return "rejected";
    case UpdateStatus::RestartRequired: return "restart-required";
  }
  return "unknown";
}

std::vector<SyncedMeasurement> synchronize(const std::vector<RangeMeasurement>& ranges,
                                           const std::vector<OrientationMeasurement>& orientations) {
  if (orientations.empty()) throw ConfigError("fused mode needs a non-empty orientation stream");
  for (std::size_t i = 1; i < orientations.size(); ++i) {
    if (!(orientations[i].t > orientations[i - 1].t)) {
      throw StreamError("orientation timestamps must increase strictly");
    }
  }
  std::vector<SyncedMeasurement> out;
  out.reserve(ranges.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i > 0 && !(ranges[i].t > ranges[i - 1].t)) {
      throw StreamError("range timestamps must increase strictly");
    }
    const double t = ranges[i].t;
    // Advance while the next sample is strictly closer; equal distance keeps the earlier one.
    while (j + 1 < orientations.size() &&
           std::abs(orientations[j + 1].t - t) < std::abs(orientations[j].t - t)) {
      ++j;
    }
    out.push_back({ranges[i], orientations[j]});
  }
  return out;
}

bool is_outlier(const Vec3& latest, const Vec3& anchor, double d, const EstimatorConfig& cfg) {
  const double threshold = cfg.gate_multiplier() * cfg.v_max / cfg.f;
  return std::abs((latest - anchor).norm() - d) > threshold;
}

Estimator::Estimator(EstimatorConfig cfg, AnchorSet anchors)
    : cfg_(std::move(cfg)), anchors_(std::move(anchors)), rng_(cfg_.seed) {
  cfg_.validate();
  if (anchors_.empty()) throw ConfigError("estimator needs at least one anchor");
}

void Estimator::reset() {
  window_.clear();
  previous_.reset();
  bootstrapped_ = false;
  k_c_ = 1;
}

std::optional<Estimate> Estimator::latest() const {
  if (!bootstrapped_ || window_.empty()) return std::nullopt;
  return estimate_of(window_.back());
}

WindowSnapshot Estimator::snapshot() const {
  WindowSnapshot s;
  s.entries = window_;
  s.previous = previous_;
  s.rejection_counter = k_c_;
  s.bootstrapped = bootstrapped_;
  s.num_factors = last_graph_ ? last_graph_->edges().size() : 0;
  return s;
}

bool Estimator::is_outlier(const RangeMeasurement& m) const {
  if (!bootstrapped_ || window_.empty()) {
    throw StreamError("outlier test needs a prior estimate");
  }
  return rangeloc::is_outlier(window_.back().pose.t, anchors_.position(m.anchor), m.d, cfg_);
}

Update Estimator::process_range(const RangeMeasurement& m) {
  if (cfg_.mode != EstimatorMode::RangeOnly) {
    throw ConfigError("process_range called on a range-orientation estimator");
  }
  return process(m, Mat3::Identity());
}

Update Estimator::process_range_orientation(const RangeMeasurement& m, const OrientationMeasurement& o) {
  if (cfg_.mode != EstimatorMode::RangeOrientation) {
    throw ConfigError("process_range_orientation called on a range-only estimator");
  }
  if (!is_rotation(o.R, 1e-6)) throw InvalidRotation("orientation reading is not a rotation");
  return process(m, o.R);
}

Update Estimator::process(const RangeMeasurement& m, const Mat3& R_meas) {
  if (!std::isfinite(m.t) || !std::isfinite(m.d)) throw StreamError("non-finite range record");
  if (!anchors_.contains(m.anchor)) {
    throw StreamError("range record references unknown anchor " + std::to_string(m.anchor));
  }
  if (last_t_ && !(m.t > *last_t_)) {
    throw StreamError("range timestamps must increase strictly (" + std::to_string(m.t) +
                      " after " + std::to_string(*last_t_) + ")");
  }
  last_t_ = m.t;

  if (!bootstrapped_) {
    WindowEntry e;
    e.t = m.t;
    e.range = m;
    e.R_meas = R_meas;
    window_.push_back(e);
    if (window_.size() < cfg_.window) return Update{};
    return run_bootstrap();
  }

  if (is_outlier(m)) {
    ++k_c_;
    Update u;
    if (k_c_ > cfg_.restart_threshold()) {
      reset();
      u.status = UpdateStatus::RestartRequired;
    } else {
      u.status = UpdateStatus::Rejected;
    }
    return u;
  }
  return slide(m, R_meas);
}

Update Estimator::run_bootstrap() {
  Update u;
  std::set<AnchorId> ids;
  std::vector<Vec3> pts;
  for (const auto& e : window_) {
    if (ids.insert(e.range.anchor).second) pts.push_back(anchors_.position(e.range.anchor));
  }
  if (pts.size() < 4 || !non_coplanar(pts)) {
    u.warnings.push_back("insufficient geometry: the bootstrap window does not see four non-coplanar anchors");
  }

  Vec3 lo, hi;
  anchors_.bounding_box(lo, hi);
  Vec3 guess;
  for (int i = 0; i < 3; ++i) {
    guess[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng_);
  }
  for (auto& e : window_) {
    e.pose.t = guess;
    e.pose.R = cfg_.mode == EstimatorMode::RangeOrientation ? e.R_meas : Mat3::Identity();
  }

  if (cfg_.mode == EstimatorMode::RangeOrientation) {
    // Positions first: from a far-off guess the pose solve drifts in rotation.
    const SolveReport first = solve(cfg_.bootstrap_iterations, EstimatorMode::RangeOnly);
    u.report = solve(cfg_.bootstrap_iterations, cfg_.mode);
    u.report->initial_cost = first.initial_cost;
  } else {
    u.report = solve(cfg_.bootstrap_iterations, cfg_.mode);
  }
  bootstrapped_ = true;
  k_c_ = 1;
  u.status = UpdateStatus::Bootstrapped;
  u.estimate = estimate_of(window_.back());
  return u;
}

Update Estimator::slide(const RangeMeasurement& m, const Mat3& R_meas) {
  WindowEntry e;
  e.t = m.t;
  e.range = m;
  e.R_meas = R_meas;
  e.pose.t = window_.back().pose.t;
  e.pose.R = cfg_.mode == EstimatorMode::RangeOrientation ? R_meas : Mat3::Identity();
  window_.push_back(e);
  if (window_.size() > cfg_.window) {
    previous_ = window_.front();
    window_.erase(window_.begin());
  }

  Update u;
  u.report = solve(cfg_.lm.max_iterations, cfg_.mode);
  k_c_ = 1;
  u.status = UpdateStatus::Accepted;
  u.estimate = estimate_of(window_.back());
  return u;
}

FactorGraph Estimator::build_graph(EstimatorMode mode, const Mat3& frame) const {
  const bool fused = mode == EstimatorMode::RangeOrientation;
  FactorGraph g(fused ? GraphMode::Pose : GraphMode::Translation);
  const RobustLoss loss{cfg_.xi};
  const double w_r = range_weight(cfg_.eta, cfg_.iota);
  const Mat3 W_o =
      weight_from_variance(cfg_.sigma_o * cfg_.sigma_o, cfg_.iota) * Mat3::Identity();

  // Node 0 is the fixed previous estimate, nodes 1..n the window.
  const WindowEntry* prev = previous_ ? &*previous_ : nullptr;
  if (prev) {
    if (fused) {
      g.add_fixed_node(NodeId{0}, Pose{prev->pose.R * frame, prev->pose.t});
    } else {
      g.add_fixed_node(NodeId{0}, prev->pose.t);
    }
  }
  for (std::size_t i = 0; i < window_.size(); ++i) {
    const WindowEntry& e = window_[i];
    const NodeId id{i + 1};
    if (fused) {
      g.add_node(id, Pose{e.pose.R * frame, e.pose.t});
    } else {
      g.add_node(id, e.pose.t);
    }
    g.add_factor(RangeEdge{id, RangeFactor{e.range.d, anchors_.position(e.range.anchor), w_r, loss}});

    const WindowEntry* before = i > 0 ? &window_[i - 1] : prev;
    if (before == nullptr) continue;
    const double dt = e.t - before->t;
    const double w_s = smoothness_weight(dt, cfg_.v_max, cfg_.iota);
    const NodeId before_id{i};
    if (fused) {
      g.add_factor(PoseSmoothnessEdge{
          before_id, id,
          PoseSmoothnessFactor{before->R_meas * frame, e.R_meas * frame,
                               pose_smoothness_weight(W_o, w_s), loss}});
    } else {
      g.add_factor(SmoothnessEdge{before_id, id, SmoothnessFactor{w_s, dt, cfg_.v_max, loss}});
    }
  }
  return g;
}

SolveReport Estimator::solve(int max_iterations, EstimatorMode mode) {
  LmConfig lm = cfg_.lm;
  lm.max_iterations = max_iterations;
  SolveReport report;
  if (mode == EstimatorMode::RangeOnly) {
    const FactorGraph g = build_graph(mode);
    last_initial_ = g.initial_translations();
    const TranslationSolution sol = lm_minimize(g, last_initial_, lm);
    for (std::size_t i = 0; i < window_.size(); ++i) {
      window_[i].pose.t = extract_state(sol.x, i);
    }
    last_graph_ = g;
    last_report_ = sol.report;
    return sol.report;
  }

  // Rotating every pose and orientation reading by a common frame leaves the
  // cost unchanged, so a window that leaves the log chart is re-solved in the
  // frame of its oldest pose.
  auto run = [&](const Mat3& frame) {
    const FactorGraph g = build_graph(mode, frame);
    const PoseState P0 = g.initial_poses();
    last_initial_ = pose_state_to_log(P0);
    PoseSolution sol = lm_minimize_pose(g, P0, lm);
    for (std::size_t i = 0; i < window_.size(); ++i) {
      window_[i].pose = Pose{sol.poses[i].R * frame.transpose(), sol.poses[i].t};
    }
    last_graph_ = g;
    return sol.report;
  };
  try {
    report = run(Mat3::Identity());
  } catch (const PoseChartError&) {
    const Mat3& reference = previous_ ? previous_->pose.R : window_.front().pose.R;
    report = run(reference.transpose());
  }
  last_report_ = report;
  return report;
}

Estimate Estimator::estimate_of(const WindowEntry& e) const {
  Estimate out;
  out.t = e.t;
  out.p = e.pose.t;
  if (cfg_.mode == EstimatorMode::RangeOrientation) out.R = e.pose.R;
  return out;
}

}  // namespace rangeloc
