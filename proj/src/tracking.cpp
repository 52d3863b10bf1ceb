#include "esvo/tracking.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace esvo {

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

constexpr double kNoEdgeValue = 255.0;

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Eigen::Vector3d& P) {
  const double iz = 1.0 / P.z();
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0.0, -cam.fx * P.x() * iz * iz,
       0.0, cam.fy * iz, -cam.fy * P.y() * iz * iz;
  return J;
}

}  // namespace

void TrackerConfig::validate() const {
  if (batch_size < 6) throw Error(ErrorCode::kInvalidArgument, "tracker batch size must be >= 6");
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "tracker iterations must be >= 1");
  if (!(huber_delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "huber delta must be positive");
  if (!(lm_lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "LM damping must be non-negative");
}

TrackingProblem TrackingProblem::from_map(const SemiDenseDepthMap& map, const CameraModel& cam, TimeSurface target,
                                          const MotionParams& theta0) {
  TrackingProblem problem;
  for (const InverseDepthEstimate& e : map.estimates()) {
    if (!(e.mu > 0.0)) continue;
    problem.points.push_back({e.pixel, e.mu, bearing(cam, e.pixel) / e.mu});
  }
  problem.T_world_ref = map.pose();
  problem.target = std::move(target);
  problem.cam = cam;
  problem.theta0 = theta0;
  return problem;
}

TimeSurface TrackingProblem::make_target(const TimeSurface& left_surface, int kernel_size) {
  return blur(negative(left_surface), kernel_size);
}

Eigen::Vector2d warp_point(const Eigen::Vector2d& x, double rho, const MotionParams& theta, const CameraModel& cam) {
  if (!(rho > 0.0)) throw Error(ErrorCode::kNonPositiveInverseDepth, "non-positive inverse depth");
  const Eigen::Vector3d P = se3_from_cayley(theta) * (bearing(cam, x) / rho);
  if (!(P.z() > 0.0)) throw Error(ErrorCode::kWarpInvalid, "warp invalid: point behind camera");
  const Eigen::Vector2d out(cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z());
  if (!cam.contains(out)) throw Error(ErrorCode::kWarpInvalid, "warp invalid: outside image");
  return out;
}

Result<TrackingResiduals> tracking_residuals(const TrackingProblem& problem, const MotionParams& theta,
                                             const MotionParams& delta, std::span<const std::size_t> batch) {
  const SE3 G = se3_from_cayley(theta);
  const SE3 G_total = G * se3_from_cayley(delta);
  const CameraModel& cam = problem.cam;

  TrackingResiduals out;
  out.residuals.assign(batch.size(), kNoEdgeValue);
  out.jacobian.assign(batch.size(), Eigen::Matrix<double, 1, 6>::Zero());
  out.valid.assign(batch.size(), 0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const MapPoint& mp = problem.points.at(batch[k]);
    const Eigen::Vector3d P = G_total * mp.position;
    if (!(P.z() > 0.0)) continue;
    const Eigen::Vector2d x(cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z());
    const auto s = problem.target.sample_with_gradient(x);
    if (!s) continue;
    out.residuals[k] = s->value;
    out.valid[k] = 1;

    // d/d(delta) of pi(G(theta) G(delta) P) at delta = 0, with
    // G(delta) P ~ P + 2 c x P + t.
    const Eigen::Vector3d Pc = G * mp.position;
    Eigen::Matrix<double, 3, 6> dP;
    dP.leftCols<3>() = -2.0 * G.rotation * skew(mp.position);
    dP.rightCols<3>() = G.rotation;
    out.jacobian[k] = s->gradient.transpose() * projection_jacobian(cam, Pc) * dP;
    if (out.jacobian[k].squaredNorm() > 0.0) ++out.informative;
  }
  if (out.informative < 6) return Failure::kInsufficientSupport;
  return out;
}

double huber_weight(double r, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "huber delta must be positive");
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

namespace {

double batch_cost(const TrackingProblem& problem, const SE3& G, std::span<const std::size_t> batch) {
  const CameraModel& cam = problem.cam;
  double cost = 0.0;
  for (std::size_t idx : batch) {
    const Eigen::Vector3d P = G * problem.points[idx].position;
    double r = kNoEdgeValue;
    if (P.z() > 0.0) {
      const Eigen::Vector2d x(cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z());
      if (const auto v = problem.target.sample(x)) r = *v;
    }
    cost += r * r;
  }
  return cost;
}

}  // namespace

double registration_cost(const TrackingProblem& problem, const MotionParams& theta) {
  std::vector<std::size_t> all(problem.points.size());
  std::iota(all.begin(), all.end(), 0);
  return batch_cost(problem, se3_from_cayley(theta), all);
}

TrackResult track(const TrackingProblem& problem, const TrackerConfig& config) {
  config.validate();
  if (problem.points.size() < 6)
    throw Error(ErrorCode::kInsufficientSupport, "insufficient support: reference map too small");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> all(problem.points.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::size_t> batch;

  MotionParams theta = problem.theta0;
  double lambda = config.lm_lambda;
  int iterations = 0;
  for (int it = 0; it < config.max_iterations; ++it) {
    if (config.stochastic && static_cast<std::size_t>(config.batch_size) < all.size()) {
      batch.clear();
      std::sample(all.begin(), all.end(), std::back_inserter(batch), config.batch_size, rng);
    } else {
      batch = all;
    }

    const auto res = tracking_residuals(problem, theta, MotionParams{}, batch);
    if (!res) throw Error(ErrorCode::kInsufficientSupport, "insufficient support");

    Matrix6d H = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    double cost_before = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const double r = res->residuals[k];
      cost_before += r * r;
      if (!res->valid[k]) continue;
      const double w = huber_weight(r, config.huber_delta);
      const auto& J = res->jacobian[k];
      H.noalias() += w * J.transpose() * J;
      g.noalias() += w * J.transpose() * r;
    }
    Matrix6d A = H;
    A.diagonal() += lambda * H.diagonal() + Vector6d::Constant(1e-12 * std::max(1.0, H.diagonal().maxCoeff()));
    const Vector6d step = A.ldlt().solve(-g);
    if (!step.allFinite()) throw Error(ErrorCode::kDiverged, "diverged");
    iterations = it + 1;

    const SE3 G_new = se3_from_cayley(theta) * se3_from_cayley(MotionParams::from_vector(step));
    const double cost_after = batch_cost(problem, G_new, batch);
    if (cost_after < cost_before) {
      theta = cayley_from_se3(G_new);
      lambda /= 10.0;
      if (step.norm() < config.min_step) break;
    } else {
      lambda *= 10.0;
    }
  }

  TrackResult result;
  result.theta = theta;
  result.cost = registration_cost(problem, theta);
  if (!std::isfinite(result.cost)) throw Error(ErrorCode::kDiverged, "diverged");
  result.pose = problem.T_world_ref * se3_from_cayley(theta).inverse();
  result.iterations = iterations;
  return result;
}

}  // namespace esvo
