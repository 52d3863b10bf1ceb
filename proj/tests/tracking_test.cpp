#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "esvo/error.hpp"
#include "esvo/simulator.hpp"
#include "esvo/tracking.hpp"

namespace esvo {
namespace {

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an esvo::Error";
  return ErrorCode::kInvalidArgument;
}

const CameraModel kCam(200.0, 200.0, 120.0, 90.0, 240, 180);

TimeSurface surface_from(auto value) {
  std::vector<double> v(static_cast<std::size_t>(kCam.width) * kCam.height);
  for (int y = 0; y < kCam.height; ++y)
    for (int x = 0; x < kCam.width; ++x) v[static_cast<std::size_t>(y) * kCam.width + x] = value(x, y);
  return TimeSurface(kCam.width, kCam.height, 0.0, 0.03, std::move(v));
}

TrackingProblem problem_with(std::vector<Eigen::Vector2d> pixels, double rho, TimeSurface target) {
  TrackingProblem p;
  for (const auto& x : pixels) p.points.push_back({x, rho, back_project(kCam, x, rho)});
  p.target = std::move(target);
  p.cam = kCam;
  return p;
}

std::vector<std::size_t> all_of(const TrackingProblem& p) {
  std::vector<std::size_t> idx(p.points.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

TEST(WarpPoint, ZeroMotionIsIdentity) {
  const Eigen::Vector2d x(37.25, 101.5);
  EXPECT_TRUE(warp_point(x, 0.7, {}, kCam).isApprox(x, 1e-12));
}

TEST(WarpPoint, PrincipalRayInvariantUnderForwardMotion) {
  const Eigen::Vector2d c(kCam.cx, kCam.cy);
  EXPECT_TRUE(warp_point(c, 0.5, {Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 0, -0.5)}, kCam).isApprox(c, 1e-12));
}

TEST(WarpPoint, LateralTranslation) {
  const Eigen::Vector2d x = warp_point({kCam.cx + 20, kCam.cy}, 0.5, {Eigen::Vector3d::Zero(), {0.1, 0, 0}}, kCam);
  EXPECT_NEAR(x.x(), kCam.cx + 30, 1e-12);
  EXPECT_NEAR(x.y(), kCam.cy, 1e-12);
}

TEST(WarpPoint, InvalidWarps) {
  EXPECT_EQ(error_code_of([] { warp_point({kCam.cx, kCam.cy}, 0.5, {Eigen::Vector3d::Zero(), {0, 0, -3}}, kCam); }),
            ErrorCode::kWarpInvalid);
  EXPECT_EQ(error_code_of([] { warp_point({kCam.cx, kCam.cy}, 0.5, {Eigen::Vector3d::Zero(), {5, 0, 0}}, kCam); }),
            ErrorCode::kWarpInvalid);
}

TEST(Huber, Weights) {
  EXPECT_DOUBLE_EQ(huber_weight(0.0, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(huber_weight(-10.0, 10.0), 1.0);
  EXPECT_DOUBLE_EQ(huber_weight(20.0, 10.0), 0.5);
  EXPECT_THROW(huber_weight(1.0, 0.0), Error);
}

TEST(TrackingResiduals, PerfectAlignmentIsZero) {
  // Minimum (edge) at every integer pixel with x % 8 == 0, ramping up in between.
  const TimeSurface target = surface_from([](int x, int) { return 30.0 * (x % 8); });
  std::vector<Eigen::Vector2d> px;
  for (int i = 1; i < 25; ++i) px.emplace_back(8.0 * i, 20.0 + 5 * i);
  const TrackingProblem p = problem_with(px, 0.5, target);
  const auto r = tracking_residuals(p, {}, {}, all_of(p));
  ASSERT_TRUE(r.ok());
  for (double v : r->residuals) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(TrackingResiduals, EmptyBatchFails) {
  const TrackingProblem p = problem_with({{50, 50}}, 0.5, surface_from([](int x, int) { return 1.0 * x; }));
  const auto r = tracking_residuals(p, {}, {}, {});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure(), Failure::kInsufficientSupport);
}

TEST(TrackingResiduals, FlatTargetHasNoSupport) {
  std::vector<Eigen::Vector2d> px;
  for (int i = 0; i < 50; ++i) px.emplace_back(20 + 4 * i, 30 + 2 * i);
  const TrackingProblem p = problem_with(px, 0.5, surface_from([](int, int) { return 255.0; }));
  const auto r = tracking_residuals(p, {}, {}, all_of(p));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure(), Failure::kInsufficientSupport);
  EXPECT_EQ(error_code_of([&] { track(p, TrackerConfig{}); }), ErrorCode::kInsufficientSupport);
}

TEST(TrackingResiduals, JacobianMatchesCentralDifferencesOnAffineTarget) {
  // An affine surface is its own bilinear interpolant, so every point is smooth.
  const TimeSurface target = surface_from([](int x, int y) { return 0.7 * x - 0.4 * y + 60.0; });
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(30.0, 150.0);
  std::vector<Eigen::Vector2d> px;
  for (int i = 0; i < 100; ++i) px.emplace_back(u(rng) + 30.0, u(rng));
  const TrackingProblem p = problem_with(px, 0.6, target);
  const MotionParams theta{{0.01, -0.02, 0.005}, {0.03, 0.01, -0.02}};
  const auto batch = all_of(p);
  const auto base = tracking_residuals(p, theta, {}, batch);
  ASSERT_TRUE(base.ok());
  constexpr double kDelta = 1e-6;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 6; ++k) {
    Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
    d[k] = kDelta;
    const auto plus = tracking_residuals(p, theta, MotionParams::from_vector(d), batch);
    const auto minus = tracking_residuals(p, theta, MotionParams::from_vector(-d), batch);
    ASSERT_TRUE(plus.ok() && minus.ok());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!base->valid[i]) continue;
      const double fd = (plus->residuals[i] - minus->residuals[i]) / (2 * kDelta);
      num += (base->jacobian[i](k) - fd) * (base->jacobian[i](k) - fd);
      den += fd * fd;
    }
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
}

// Simulated general motion over the three-plane scene; reference map from
// ground-truth depth at the active pixels.
class SimTracking : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    rig_ = new StereoRig(default_sim_rig());
    scene_ = new SceneConfig(SceneConfig::three_planes());
    SimTrajectory traj;
    traj.primitive = MotionPrimitive::kGeneral;
    traj.duration = 0.5;
    sim_ = new SimulationOutput(simulate_events(*scene_, traj, *rig_));
  }
  static void TearDownTestSuite() {
    delete sim_;
    delete scene_;
    delete rig_;
  }

  static TimeSurface left_surface(double t) {
    LastEventMap m(rig_->left.width, rig_->left.height);
    const auto end = std::upper_bound(sim_->left.begin(), sim_->left.end(), t,
                                      [](double v, const Event& e) { return v < e.t; });
    m.ingest(std::span<const Event>(sim_->left.begin(), end));
    return render(m, t, 0.03);
  }

  static SemiDenseDepthMap reference_map(double t) {
    const TimeSurface ts = left_surface(t);
    const SE3 pose = sim_->ground_truth.interpolate(t);
    SemiDenseDepthMap map(ts.width(), ts.height(), t, pose);
    for (int y = 0; y < ts.height(); ++y)
      for (int x = 0; x < ts.width(); ++x) {
        if (!(ts.at(x, y) > 50.0)) continue;
        const auto rho = ground_truth_inverse_depth(*scene_, pose, rig_->left, Eigen::Vector2d(x, y));
        if (rho) map.at(x, y) = InverseDepthEstimate{*rho, 0.01, 2.207, Eigen::Vector2d(x, y), t};
      }
    return map;
  }

  static double rotation_deg(const SE3& a, const SE3& b) { return (a.inverse() * b).rotation_angle() * 180.0 / M_PI; }

  static StereoRig* rig_;
  static SceneConfig* scene_;
  static SimulationOutput* sim_;
};

StereoRig* SimTracking::rig_ = nullptr;
SceneConfig* SimTracking::scene_ = nullptr;
SimulationOutput* SimTracking::sim_ = nullptr;

TEST_F(SimTracking, IdentityRegistration) {
  const double t = 0.3;
  const SemiDenseDepthMap map = reference_map(t);
  const TrackingProblem p =
      TrackingProblem::from_map(map, rig_->left, TrackingProblem::make_target(left_surface(t)));
  TrackerConfig config;
  config.stochastic = false;
  const TrackResult r = track(p, config);
  EXPECT_LT(r.theta.vector().norm(), 1e-3);
}

TEST_F(SimTracking, FullBatchCostDoesNotIncrease) {
  const double t_ref = 0.3, t_cur = 0.32;
  const SemiDenseDepthMap map = reference_map(t_ref);
  const SE3 G_true = sim_->ground_truth.interpolate(t_cur).inverse() * map.pose();
  const SE3 start = SE3::from_axis_angle(Eigen::Vector3d(1, 1, 0).normalized(), 0.3 * M_PI / 180.0,
                                         Eigen::Vector3d(0.002, -0.002, 0.001)) *
                    G_true;
  const TrackingProblem p = TrackingProblem::from_map(map, rig_->left,
                                                      TrackingProblem::make_target(left_surface(t_cur)),
                                                      cayley_from_se3(start));
  TrackerConfig config;
  config.stochastic = false;
  double previous = registration_cost(p, p.theta0);
  for (int iters = 1; iters <= 8; ++iters) {
    config.max_iterations = iters;
    const TrackResult r = track(p, config);
    const double cost = registration_cost(p, r.theta);
    EXPECT_LE(cost, previous + 1e-9 * previous) << "after " << iters << " iterations";
    previous = cost;
  }
}

TEST_F(SimTracking, RecoversPerturbedPose) {
  const double t_ref = 0.3, t_cur = 0.32;
  const SemiDenseDepthMap map = reference_map(t_ref);
  const SE3 T_world_cur = sim_->ground_truth.interpolate(t_cur);
  const SE3 G_true = T_world_cur.inverse() * map.pose();
  const SE3 perturbation = SE3::from_axis_angle(Eigen::Vector3d(1, -1, 1).normalized(), M_PI / 180.0,
                                                Eigen::Vector3d(0.01, 0.0, 0.0));
  const TrackingProblem p = TrackingProblem::from_map(
      map, rig_->left, TrackingProblem::make_target(left_surface(t_cur)), cayley_from_se3(perturbation * G_true));
  TrackerConfig config;
  config.stochastic = false;
  config.max_iterations = 100;
  const TrackResult r = track(p, config);
  EXPECT_LT(rotation_deg(r.pose, T_world_cur), 0.2);
  EXPECT_LT((r.pose.translation - T_world_cur.translation).norm(), 0.005);
}

TEST_F(SimTracking, StochasticModeIsDeterministicForFixedSeed) {
  const double t_ref = 0.3, t_cur = 0.31;
  const SemiDenseDepthMap map = reference_map(t_ref);
  const TrackingProblem p =
      TrackingProblem::from_map(map, rig_->left, TrackingProblem::make_target(left_surface(t_cur)));
  TrackerConfig config;
  config.seed = 17;
  const TrackResult a = track(p, config);
  const TrackResult b = track(p, config);
  EXPECT_EQ(a.theta.vector(), b.theta.vector());
}

}  // namespace
}  // namespace esvo
