#include "esvo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "esvo/error.hpp"

namespace esvo {

CameraModel::CameraModel(double fx_, double fy_, double cx_, double cy_, int width_, int height_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(width_), height(height_) {
  validate();
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "camera focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::kInvalidArgument, "camera resolution must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
    throw Error(ErrorCode::kInvalidArgument, "principal point outside image");
}

SE3 SE3::from_axis_angle(const Eigen::Vector3d& axis, double angle, const Eigen::Vector3d& t) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t};
}

double SE3::rotation_angle() const {
  const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near 0; use the sine from the skew part there.
  const Eigen::Vector3d w(rotation(2, 1) - rotation(1, 2), rotation(0, 2) - rotation(2, 0),
                          rotation(1, 0) - rotation(0, 1));
  return std::atan2(0.5 * w.norm(), c);
}

StereoRig StereoRig::rectified(const CameraModel& left, const CameraModel& right, double baseline) {
  if (!(baseline > 0.0)) throw Error(ErrorCode::kInvalidArgument, "baseline must be positive");
  left.validate();
  right.validate();
  return {left, right, SE3::from_translation({-baseline, 0.0, 0.0})};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d rotation_from_cayley(const Eigen::Vector3d& c) {
  // Closed form of (I + [c]x)(I - [c]x)^-1.
  const double n2 = c.squaredNorm();
  const Eigen::Matrix3d R =
      (1.0 - n2) * Eigen::Matrix3d::Identity() + 2.0 * c * c.transpose() + 2.0 * skew(c);
  return R / (1.0 + n2);
}

SE3 se3_from_cayley(const MotionParams& theta) {
  return {rotation_from_cayley(theta.cayley), theta.translation};
}

MotionParams cayley_from_se3(const SE3& T) {
  constexpr double kMinDistanceFromPi = 1e-6;
  if (T.rotation_angle() > std::numbers::pi - kMinDistanceFromPi)
    throw Error(ErrorCode::kCayleySingularity, "cayley singularity: rotation angle at 180 degrees");
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  // [c]x = (R - I)(R + I)^-1
  const Eigen::Matrix3d C = (T.rotation - I) * (T.rotation + I).inverse();
  MotionParams theta;
  theta.cayley = Eigen::Vector3d(0.5 * (C(2, 1) - C(1, 2)), 0.5 * (C(0, 2) - C(2, 0)),
                                 0.5 * (C(1, 0) - C(0, 1)));
  theta.translation = T.translation;
  return theta;
}

Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& P) {
  if (!(P.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "behind camera");
  return {cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z()};
}

Eigen::Vector3d back_project(const CameraModel& cam, const Eigen::Vector2d& x, double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::kNonPositiveInverseDepth, "non-positive inverse depth");
  return bearing(cam, x) / rho;
}

void TrajectoryDB::append(double t, const SE3& pose) {
  if (!std::isfinite(t)) throw Error(ErrorCode::kInvalidArgument, "non-finite pose timestamp");
  if (!knots_.empty() && !(t > knots_.back().t))
    throw Error(ErrorCode::kInvalidArgument,
                "trajectory timestamps must be strictly increasing (got " + std::to_string(t) +
                    " after " + std::to_string(knots_.back().t) + ")");
  knots_.push_back({t, pose});
}

SE3 TrajectoryDB::interpolate(double t) const {
  if (knots_.empty()) throw Error(ErrorCode::kNoPoses, "no poses");
  if (t <= knots_.front().t) return knots_.front().pose;
  if (t >= knots_.back().t) return knots_.back().pose;

  const auto upper = std::upper_bound(knots_.begin(), knots_.end(), t,
                                      [](double value, const Knot& k) { return value < k.t; });
  const Knot& b = *upper;
  const Knot& a = *(upper - 1);
  if (t == a.t) return a.pose;
  const double alpha = (t - a.t) / (b.t - a.t);

  const Eigen::Quaterniond qa = a.pose.quaternion();
  const Eigen::Quaterniond qb = b.pose.quaternion();
  SE3 out;
  out.rotation = qa.slerp(alpha, qb).toRotationMatrix();
  out.translation = (1.0 - alpha) * a.pose.translation + alpha * b.pose.translation;
  return out;
}

SE3 interpolate_pose(const TrajectoryDB& traj, double t) { return traj.interpolate(t); }

}  // namespace esvo
