#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rangeloc/errors.hpp"
#include "rangeloc/pipeline.hpp"
#include "rangeloc/sim.hpp"

using namespace rangeloc;

namespace {

std::vector<RangeMeasurement> noiseless_ranges(const TrajectorySpec& spec, const AnchorSet& anchors) {
  NoiseSpec noise;
  noise.eta = 0.0;
  return simulate_ranges(generate_truth(spec), anchors, noise, 0);
}

TrajectorySpec static_spec(const Vec3& p, double duration) {
  TrajectorySpec s;
  s.shape = TrajectoryShape::Waypoints;
  s.waypoints = {p};
  s.duration = duration;
  return s;
}

EstimatorConfig noiseless_config() {
  EstimatorConfig cfg;
  cfg.eta = 0.0;
  cfg.gamma = 10.0;
  return cfg;
}

}  // namespace

TEST(IsOutlier, Examples) {
  EstimatorConfig cfg;
  for (double g : {0.5, 3.0, 100.0}) {
    cfg.gamma = g;
    EXPECT_FALSE(is_outlier(Vec3::Zero(), Vec3(3, 4, 0), 5.0, cfg));
  }
  cfg.gamma = 3.0;
  EXPECT_NEAR(cfg.gate_multiplier() * cfg.v_max / cfg.f, 0.09242, 1e-5);
  EXPECT_TRUE(is_outlier(Vec3::Zero(), Vec3(3, 4, 0), 5.2, cfg));
  EXPECT_FALSE(is_outlier(Vec3::Zero(), Vec3(3, 4, 0), 5.09, cfg));
}

TEST(IsOutlier, BoundaryIsNotAnOutlier) {
  EstimatorConfig cfg;
  cfg.gamma = 2.0;
  cfg.v_max = 1.0;
  cfg.f = 4.0;  // threshold 0.5 exactly
  EXPECT_FALSE(is_outlier(Vec3::Zero(), Vec3(3, 4, 0), 5.5, cfg));
  EXPECT_TRUE(is_outlier(Vec3::Zero(), Vec3(3, 4, 0), 5.5 + 1e-12, cfg));
}

TEST(Synchronize, NearestWithEarlierTieBreak) {
  const std::vector<RangeMeasurement> r = {{1.0, 0, 1.0}};
  const Mat3 A = exp_so3(Vec3(0.1, 0, 0)), B = exp_so3(Vec3(0, 0.1, 0));
  auto out = synchronize(r, {{0.99, A}, {1.02, B}});
  EXPECT_DOUBLE_EQ(out[0].orientation.t, 0.99);
  out = synchronize(r, {{0.98, A}, {1.02, B}});
  EXPECT_DOUBLE_EQ(out[0].orientation.t, 0.98);
  EXPECT_THROW(synchronize(r, {}), ConfigError);
  EXPECT_THROW(synchronize(r, {{1.0, A}, {1.0, B}}), StreamError);
}

TEST(Synchronize, OutputRateEqualsRangeRate) {
  const TrajectorySpec spec = [] {
    TrajectorySpec s;
    s.duration = 10.0;
    return s;
  }();
  const Trajectory traj(spec);
  const auto ranges = noiseless_ranges(spec, preset_anchors("paper-indoor"));
  const auto orient = simulate_orientation(traj, kDefaultImuRate, NoiseSpec{}, 0);
  const auto synced = synchronize(ranges, orient);
  EXPECT_EQ(synced.size(), ranges.size());
  for (const auto& s : synced) EXPECT_LE(std::abs(s.orientation.t - s.range.t), 0.5 / kDefaultImuRate + 1e-12);
}

TEST(Estimator, BuffersUntilWindowIsFull) {
  Estimator est(noiseless_config(), preset_anchors("paper-indoor"));
  const auto ranges = noiseless_ranges(static_spec(Vec3(0.5, 0.2, 1.0), 1.0), preset_anchors("paper-indoor"));
  for (std::size_t i = 0; i + 1 < 10; ++i) {
    const Update u = est.process_range(ranges[i]);
    EXPECT_EQ(u.status, UpdateStatus::Buffering);
    EXPECT_FALSE(u.estimate.has_value());
  }
  EXPECT_FALSE(est.latest().has_value());
  EXPECT_THROW(est.is_outlier(ranges[9]), StreamError);
  EXPECT_EQ(est.process_range(ranges[9]).status, UpdateStatus::Bootstrapped);
}

TEST(Estimator, WindowFactorCounts) {
  for (std::size_t n : {4u, 10u, 20u}) {
    EstimatorConfig cfg = noiseless_config();
    cfg.window = n;
    Estimator est(cfg, preset_anchors("paper-indoor"));
    const auto ranges = noiseless_ranges(static_spec(Vec3(0.5, 0.2, 1.0), 2.0), preset_anchors("paper-indoor"));
    std::size_t i = 0;
    for (; i < n; ++i) est.process_range(ranges[i]);
    EXPECT_EQ(est.snapshot().num_factors, 2 * n - 1);
    est.process_range(ranges[i++]);
    EXPECT_EQ(est.snapshot().num_factors, 2 * n);
    EXPECT_EQ(est.snapshot().entries.size(), n);
    EXPECT_TRUE(est.snapshot().previous.has_value());
  }
}

TEST(Estimator, NoiselessStaticRecovery) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  const Vec3 p(0.7, -0.4, 1.3);
  Estimator est(noiseless_config(), anchors);
  std::size_t checked = 0;
  for (const auto& m : noiseless_ranges(static_spec(p, 5.0), anchors)) {
    const Update u = est.process_range(m);
    if (!u.estimate) continue;
    EXPECT_LT((u.estimate->p - p).norm(), 1e-3) << "t=" << m.t;
    ++checked;
  }
  EXPECT_GT(checked, 100u);
}

TEST(Estimator, NoiselessSlowCircleRecovery) {
  // The zero-velocity smoothness prior biases each estimate by roughly
  // 0.057 * speed, so the 1 mm level holds only for slow motion.
  TrajectorySpec spec;
  spec.speed = 0.01;
  spec.duration = 10.0;
  const AnchorSet anchors = preset_anchors("paper-indoor");
  const Trajectory traj(spec);
  Estimator est(noiseless_config(), anchors);
  for (const auto& m : noiseless_ranges(spec, anchors)) {
    const Update u = est.process_range(m);
    if (u.estimate) EXPECT_LT((u.estimate->p - traj.position(m.t)).norm(), 1e-3);
  }
}

TEST(Estimator, SingleSpikeIsRejectedAndEstimateKept) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  auto ranges = noiseless_ranges(static_spec(Vec3(0.7, -0.4, 1.3), 2.0), anchors);
  EstimatorConfig cfg = noiseless_config();
  cfg.gamma = 3.0;
  Estimator est(cfg, anchors);
  for (std::size_t i = 0; i < 30; ++i) est.process_range(ranges[i]);
  const Estimate before = *est.latest();
  RangeMeasurement spike = ranges[30];
  spike.d += 1.0;
  EXPECT_TRUE(est.is_outlier(spike));
  const Update u = est.process_range(spike);
  EXPECT_EQ(u.status, UpdateStatus::Rejected);
  EXPECT_FALSE(u.estimate.has_value());
  EXPECT_EQ(est.latest()->p, before.p);
  EXPECT_EQ(est.snapshot().rejection_counter, 2);
  EXPECT_EQ(est.process_range(ranges[31]).status, UpdateStatus::Accepted);
  EXPECT_EQ(est.snapshot().rejection_counter, 1);
}

TEST(Estimator, ConsecutiveSpikesRequireRestart) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  auto ranges = noiseless_ranges(static_spec(Vec3(0.7, -0.4, 1.3), 3.0), anchors);
  for (int gamma : {2, 3, 5}) {
    EstimatorConfig cfg = noiseless_config();
    cfg.gamma = gamma;
    Estimator est(cfg, anchors);
    std::size_t i = 0;
    for (; i < 20; ++i) est.process_range(ranges[i]);
    // The counter starts at 1 and the restart fires once it exceeds gamma, i.e.
    // on the gamma-th consecutive spike; the last spike lands in an empty window.
    std::vector<UpdateStatus> status;
    for (int s = 0; s < gamma + 1; ++s) {
      RangeMeasurement spike = ranges[i++];
      spike.d += 1.0;
      status.push_back(est.process_range(spike).status);
    }
    for (int s = 0; s + 1 < gamma; ++s) EXPECT_EQ(status[s], UpdateStatus::Rejected);
    EXPECT_EQ(status[gamma - 1], UpdateStatus::RestartRequired);
    EXPECT_EQ(status[gamma], UpdateStatus::Buffering);
    EXPECT_FALSE(est.bootstrapped());
    EXPECT_FALSE(est.latest().has_value());
  }
}

TEST(Estimator, RestartThresholdOverride) {
  EstimatorConfig cfg;
  cfg.gamma = 3.0;
  cfg.max_rejections = 7.0;
  cfg.gate_gamma = 10.0;
  EXPECT_DOUBLE_EQ(cfg.restart_threshold(), 7.0);
  EXPECT_DOUBLE_EQ(cfg.gate_multiplier(), 10.0);
}

TEST(Estimator, BootstrapConvergesFromRandomGuesses) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  Vec3 lo, hi;
  anchors.bounding_box(lo, hi);
  std::mt19937_64 rng(77);
  int success = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = std::uniform_real_distribution<double>(lo[k] + 0.5, hi[k] - 0.2)(rng);
    EstimatorConfig cfg = noiseless_config();
    cfg.seed = seed;
    Estimator est(cfg, anchors);
    Update u;
    for (const auto& m : noiseless_ranges(static_spec(p, 0.4), anchors)) {
      u = est.process_range(m);
      if (u.status == UpdateStatus::Bootstrapped) break;
    }
    ASSERT_EQ(u.status, UpdateStatus::Bootstrapped);
    if ((u.estimate->p - p).norm() < 1e-3) ++success;
  }
  EXPECT_GE(success, 95);
}

TEST(Estimator, CoplanarAnchorsWarn) {
  const AnchorSet flat({{0, {0, 0, 0}}, {1, {5, 0, 0}}, {2, {0, 5, 0}}, {3, {5, 5, 0}}});
  Estimator est(noiseless_config(), flat);
  const auto ranges = noiseless_ranges(static_spec(Vec3(1, 2, 1), 1.0), flat);
  Update u;
  for (std::size_t i = 0; i < 10; ++i) u = est.process_range(ranges[i]);
  ASSERT_EQ(u.status, UpdateStatus::Bootstrapped);
  ASSERT_EQ(u.warnings.size(), 1u);
  EXPECT_NE(u.warnings[0].find("insufficient geometry"), std::string::npos);
}

TEST(Estimator, StreamValidation) {
  Estimator est(noiseless_config(), preset_anchors("paper-indoor"));
  est.process_range({1.0, 0, 3.0});
  EXPECT_THROW(est.process_range({1.0, 1, 3.0}), StreamError);
  EXPECT_THROW(est.process_range({2.0, 9, 3.0}), StreamError);
  EXPECT_THROW(est.process_range_orientation({3.0, 0, 3.0}, {3.0, Mat3::Identity()}), ConfigError);
}

TEST(Estimator, ConfigValidation) {
  EstimatorConfig cfg;
  cfg.window = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.f = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.xi = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(FusedEstimator, IdentityRotationsMatchRangeOnly) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  TrajectorySpec spec;
  spec.duration = 5.0;
  const auto ranges = noiseless_ranges(spec, anchors);
  EstimatorConfig cfg = noiseless_config();
  Estimator plain(cfg, anchors);
  cfg.mode = EstimatorMode::RangeOrientation;
  Estimator fused(cfg, anchors);
  for (const auto& m : ranges) {
    const Update a = plain.process_range(m);
    const Update b = fused.process_range_orientation(m, {m.t, Mat3::Identity()});
    ASSERT_EQ(a.status, b.status);
    if (a.estimate) EXPECT_LT((a.estimate->p - b.estimate->p).norm(), 1e-3);
  }
}

TEST(FusedEstimator, StaticConstantRotationHasZeroSmoothnessResidual) {
  const AnchorSet anchors = preset_anchors("paper-indoor");
  const Mat3 R = exp_so3(Vec3(0.1, -0.2, 0.7));
  EstimatorConfig cfg = noiseless_config();
  cfg.mode = EstimatorMode::RangeOrientation;
  Estimator est(cfg, anchors);
  for (const auto& m : noiseless_ranges(static_spec(Vec3(0.3, 0.3, 1.0), 1.0), anchors)) {
    est.process_range_orientation(m, {m.t, R});
  }
  const FactorGraph& g = *est.last_graph();
  PoseState poses;
  for (const auto& e : est.snapshot().entries) poses.push_back(e.pose);
  for (const Edge& edge : g.edges()) {
    if (const auto* s = std::get_if<PoseSmoothnessEdge>(&edge)) {
      const std::size_t c = *g.slot_of(s->curr);
      const Pose prev = g.slot_of(s->prev) ? poses[*g.slot_of(s->prev)] : g.find(s->prev)->value;
      EXPECT_LT(pose_smoothness_residual(poses[c], prev, s->factor).norm(), 1e-6);
    }
  }
}

TEST(FusedEstimator, NoiselessRotatingTrajectory) {
  TrajectorySpec spec;
  spec.shape = TrajectoryShape::Helix;
  spec.tilt = 0.2;
  spec.duration = 20.0;
  const Trajectory traj(spec);
  const AnchorSet anchors = preset_anchors("paper-indoor");
  NoiseSpec noise;
  noise.eta = 0.0;
  const auto ranges = simulate_ranges(traj.sample(spec.rate), anchors, noise, 0);
  const auto synced = synchronize(ranges, simulate_orientation(traj, kDefaultImuRate, noise, 0));
  EstimatorConfig cfg = noiseless_config();
  cfg.mode = EstimatorMode::RangeOrientation;
  Estimator est(cfg, anchors);
  double e_o = 0.0;
  std::size_t k = 0;
  for (const auto& s : synced) {
    const Update u = est.process_range_orientation(s.range, s.orientation);
    if (!u.estimate) continue;
    e_o += (u.estimate->R.value() * traj.rotation(s.range.t).transpose() - Mat3::Identity()).norm();
    ++k;
  }
  ASSERT_GT(k, 500u);
  EXPECT_LT(e_o / static_cast<double>(k), 0.01);
}
