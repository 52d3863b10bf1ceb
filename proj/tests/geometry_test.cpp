#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "esvo/error.hpp"
#include "esvo/geometry.hpp"

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

const CameraModel kCam(200.0, 200.0, 173.0, 130.0, 346, 260);

TEST(Cayley, ZeroIsIdentity) {
  const SE3 T = se3_from_cayley({});
  EXPECT_TRUE(T.rotation.isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  EXPECT_EQ(T.translation, Eigen::Vector3d::Zero());
}

TEST(Cayley, UnitXIsQuarterTurn) {
  const SE3 T = se3_from_cayley({Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::Zero()});
  const Eigen::Matrix3d expected = Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_TRUE(T.rotation.isApprox(expected, 1e-12));
  EXPECT_NEAR(T.rotation_angle(), M_PI / 2, 1e-12);
}

TEST(Cayley, PureTranslation) {
  const SE3 T = se3_from_cayley({Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 2, 3)});
  EXPECT_TRUE((T * Eigen::Vector3d::Zero()).isApprox(Eigen::Vector3d(1, 2, 3)));
}

TEST(Cayley, InverseExamples) {
  EXPECT_EQ(cayley_from_se3(SE3::identity()).vector(), (Eigen::Matrix<double, 6, 1>::Zero()));
  const MotionParams c = cayley_from_se3(SE3::from_axis_angle(Eigen::Vector3d::UnitX(), M_PI / 2));
  EXPECT_TRUE(c.cayley.isApprox(Eigen::Vector3d(1, 0, 0), 1e-12));
}

TEST(Cayley, RoundTripRandomSmallRotations) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    MotionParams p{Eigen::Vector3d(n(rng), n(rng), n(rng)), Eigen::Vector3d(n(rng), n(rng), n(rng))};
    const MotionParams q = cayley_from_se3(se3_from_cayley(p));
    worst = std::max(worst, (p.vector() - q.vector()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Cayley, HalfTurnIsSingular) {
  EXPECT_EQ(error_code_of([] { cayley_from_se3(SE3::from_axis_angle(Eigen::Vector3d::UnitZ(), M_PI)); }),
            ErrorCode::kCayleySingularity);
}

TEST(Project, PrincipalRay) {
  for (double z : {0.3, 1.0, 17.0}) EXPECT_TRUE(project(kCam, {0, 0, z}).isApprox(Eigen::Vector2d(173, 130)));
}

TEST(Project, PinholeArithmetic) {
  EXPECT_TRUE(project(kCam, {0.5, 0.0, 2.0}).isApprox(Eigen::Vector2d(223, 130)));
}

TEST(Project, BehindCamera) {
  EXPECT_EQ(error_code_of([] { project(kCam, {0.1, 0.1, 0.0}); }), ErrorCode::kBehindCamera);
}

TEST(BackProject, PrincipalPoint) {
  EXPECT_TRUE(back_project(kCam, {173, 130}, 0.5).isApprox(Eigen::Vector3d(0, 0, 2)));
}

TEST(BackProject, RoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d x(345 * u(rng), 259 * u(rng));
    const double rho = 0.1 + 3.0 * u(rng);
    worst = std::max(worst, (project(kCam, back_project(kCam, x, rho)) - x).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(BackProject, NonPositiveInverseDepth) {
  EXPECT_EQ(error_code_of([] { back_project(kCam, {10, 10}, 0.0); }), ErrorCode::kNonPositiveInverseDepth);
}

TEST(CameraModel, ValidateRejectsBadIntrinsics) {
  EXPECT_EQ(error_code_of([] { CameraModel(0.0, 200, 10, 10, 20, 20).validate(); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { CameraModel(200, 200, 30, 10, 20, 20).validate(); }), ErrorCode::kInvalidArgument);
}

TEST(Trajectory, KnotQueryIsExact) {
  TrajectoryDB traj;
  const SE3 a = SE3::from_axis_angle(Eigen::Vector3d(1, 2, 3).normalized(), 0.3, Eigen::Vector3d(0.1, 0.2, 0.3));
  traj.append(0.0, SE3::identity());
  traj.append(1.0, a);
  const SE3 q = traj.interpolate(1.0);
  EXPECT_EQ(q.rotation, a.rotation);
  EXPECT_EQ(q.translation, a.translation);
}

TEST(Trajectory, MidpointTranslation) {
  TrajectoryDB traj;
  traj.append(0.0, SE3::identity());
  traj.append(2.0, SE3::from_translation({2, 0, 0}));
  EXPECT_TRUE(traj.interpolate(1.0).translation.isApprox(Eigen::Vector3d(1, 0, 0)));
}

TEST(Trajectory, MidpointSlerp) {
  TrajectoryDB traj;
  traj.append(0.0, SE3::identity());
  traj.append(1.0, SE3::from_axis_angle(Eigen::Vector3d::UnitZ(), M_PI / 2));
  const Eigen::Matrix3d expected = Eigen::AngleAxisd(M_PI / 4, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_TRUE(traj.interpolate(0.5).rotation.isApprox(expected, 1e-12));
}

TEST(Trajectory, ClampsOutsideSpan) {
  TrajectoryDB traj;
  traj.append(1.0, SE3::from_translation({1, 0, 0}));
  traj.append(2.0, SE3::from_translation({2, 0, 0}));
  EXPECT_DOUBLE_EQ(traj.interpolate(0.0).translation.x(), 1.0);
  EXPECT_DOUBLE_EQ(traj.interpolate(5.0).translation.x(), 2.0);
}

TEST(Trajectory, EmptyHasNoPoses) {
  EXPECT_EQ(error_code_of([] { TrajectoryDB().interpolate(0.0); }), ErrorCode::kNoPoses);
}

TEST(Trajectory, AppendOnlyMonotonic) {
  TrajectoryDB traj;
  traj.append(1.0, {});
  EXPECT_EQ(error_code_of([&] { traj.append(1.0, {}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(traj.size(), 1u);
}

TEST(StereoRig, RectifiedBaseline) {
  const StereoRig rig = StereoRig::rectified(kCam, kCam, 0.15);
  EXPECT_DOUBLE_EQ(rig.baseline(), 0.15);
  // A point on the left principal ray at 2 m appears fx*b/Z pixels to the left in the right camera.
  const Eigen::Vector2d xr = project(rig.right, rig.T_right_left * Eigen::Vector3d(0, 0, 2));
  EXPECT_NEAR(xr.x(), 173.0 - 200.0 * 0.15 / 2.0, 1e-12);
}

}  // namespace
}  // namespace esvo
