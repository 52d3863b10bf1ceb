#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace esvo {

/// Pinhole camera on undistorted, rectified pixel coordinates.
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  CameraModel() = default;
  CameraModel(double fx, double fy, double cx, double cy, int width, int height);

  /// Throws kInvalidArgument if the intrinsics violate fx,fy > 0 or put the
  /// principal point outside the image.
  void validate() const;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1;
  }
};

/// Rigid transform. Applied to a point as R * p + t.
struct SE3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  SE3() = default;
  SE3(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) : rotation(R), translation(t) {}
  SE3(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q.normalized().toRotationMatrix()), translation(t) {}

  static SE3 identity() { return {}; }
  static SE3 from_translation(const Eigen::Vector3d& t) { return {Eigen::Matrix3d::Identity(), t}; }
  static SE3 from_axis_angle(const Eigen::Vector3d& axis, double angle,
                             const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

  SE3 operator*(const SE3& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  SE3 inverse() const {
    const Eigen::Matrix3d Rt = rotation.transpose();
    return {Rt, -Rt * translation};
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation).normalized(); }

  /// Geodesic rotation angle in radians, in [0, pi].
  double rotation_angle() const;
};

/// Cayley rotation vector plus translation: the tracker's 6-vector.
struct MotionParams {
  Eigen::Vector3d cayley = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << cayley, translation;
    return v;
  }
  static MotionParams from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return {v.head<3>(), v.tail<3>()};
  }
};

struct StereoRig {
  CameraModel left;
  CameraModel right;
  SE3 T_right_left;

  /// Rectified rig with the right camera displaced by `baseline` along +x of
  /// the left camera, i.e. T_right_left = (I, (-baseline, 0, 0)).
  static StereoRig rectified(const CameraModel& left, const CameraModel& right, double baseline);

  double baseline() const { return -T_right_left.translation.x(); }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// R = (I + [c]x)(I - [c]x)^-1, rotation angle 2*atan(|c|).
SE3 se3_from_cayley(const MotionParams& theta);
Eigen::Matrix3d rotation_from_cayley(const Eigen::Vector3d& c);

/// Inverse of se3_from_cayley. Throws kCayleySingularity for rotations at
/// (or numerically indistinguishable from) 180 degrees.
MotionParams cayley_from_se3(const SE3& T);

/// Throws kBehindCamera when P.z <= 0.
Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& P);

/// Throws kNonPositiveInverseDepth when rho <= 0.
Eigen::Vector3d back_project(const CameraModel& cam, const Eigen::Vector2d& x, double rho);

/// Normalized viewing ray ((u-cx)/fx, (v-cy)/fy, 1).
inline Eigen::Vector3d bearing(const CameraModel& cam, const Eigen::Vector2d& x) {
  return {(x.x() - cam.cx) / cam.fx, (x.y() - cam.cy) / cam.fy, 1.0};
}

/// Time-indexed poses with strictly increasing timestamps.
class TrajectoryDB {
 public:
  struct Knot {
    double t;
    SE3 pose;
  };

  TrajectoryDB() = default;

  /// Throws kInvalidArgument unless t is strictly after the last knot.
  void append(double t, const SE3& pose);

  bool empty() const { return knots_.empty(); }
  std::size_t size() const { return knots_.size(); }
  const std::vector<Knot>& knots() const { return knots_; }
  const Knot& front() const { return knots_.front(); }
  const Knot& back() const { return knots_.back(); }

  /// Decoupled interpolation between the bracketing knots: linear in
  /// translation, slerp in rotation. Queries outside the span clamp to the
  /// nearest endpoint. Throws kNoPoses when empty.
  SE3 interpolate(double t) const;

 private:
  std::vector<Knot> knots_;
};

SE3 interpolate_pose(const TrajectoryDB& traj, double t);

}  // namespace esvo
