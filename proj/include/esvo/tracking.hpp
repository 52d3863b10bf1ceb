#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "esvo/error.hpp"
#include "esvo/geometry.hpp"
#include "esvo/mapping.hpp"
#include "esvo/time_surface.hpp"

namespace esvo {

struct TrackerConfig {
  int batch_size = 300;
  int max_iterations = 5;
  double huber_delta = 10.0;
  double lm_lambda = 1e-3;
  std::uint64_t seed = 0;
  /// When false every iteration uses the whole support set.
  bool stochastic = true;
  double min_step = 1e-8;

  void validate() const;
};

/// A reference-map point: pixel, inverse depth and its back-projection.
struct MapPoint {
  Eigen::Vector2d pixel;
  double rho;
  Eigen::Vector3d position;  // reference camera frame
};

/// Registration of a reference semi-dense map against a target surface.
///
/// G(theta) maps points from the reference camera frame into the current one,
/// so the current left-camera pose is T_world_ref * G(theta)^-1.
struct TrackingProblem {
  std::vector<MapPoint> points;
  SE3 T_world_ref;
  TimeSurface target;  // blurred negative of the current left surface
  CameraModel cam;
  MotionParams theta0;

  /// Builds the support set from every populated cell of `map`.
  static TrackingProblem from_map(const SemiDenseDepthMap& map, const CameraModel& cam, TimeSurface target,
                                  const MotionParams& theta0 = {});

  /// Blurs the negative of `left_surface` with `kernel_size`.
  static TimeSurface make_target(const TimeSurface& left_surface, int kernel_size = 5);
};

/// pi(G(theta) * pi^-1(x, rho)). Throws kWarpInvalid for
/// points behind the camera or outside the image.
Eigen::Vector2d warp_point(const Eigen::Vector2d& x, double rho, const MotionParams& theta, const CameraModel& cam);

struct TrackingResiduals {
  std::vector<double> residuals;
  std::vector<Eigen::Matrix<double, 1, 6>> jacobian;
  std::vector<std::uint8_t> valid;
  int informative = 0;  // valid points with a non-zero Jacobian row
};

/// Residual per point = target sampled at W(W(x, rho; delta); theta). Points
/// that leave the image keep the "no edge" value 255 and are masked. The
/// Jacobian is with respect to delta, linearized at delta = 0. Fewer than six
/// informative points give kInsufficientSupport.
Result<TrackingResiduals> tracking_residuals(const TrackingProblem& problem, const MotionParams& theta,
                                             const MotionParams& delta, std::span<const std::size_t> batch);

/// 1 inside [-delta, delta], delta / |r| outside. Throws for delta <= 0.
double huber_weight(double r, double delta);

/// Sum of squared target values at the warped support (the registration
/// objective), with off-image points counted at 255.
double registration_cost(const TrackingProblem& problem, const MotionParams& theta);

struct TrackResult {
  SE3 pose;  // current left camera in world
  MotionParams theta;
  double cost = 0.0;
  int iterations = 0;
};

/// Forward-compositional Levenberg-Marquardt with Huber IRLS weights and
/// stochastic batches. Throws kInsufficientSupport / kDiverged.
TrackResult track(const TrackingProblem& problem, const TrackerConfig& config);

}  // namespace esvo
