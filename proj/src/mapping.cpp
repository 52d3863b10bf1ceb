#include "esvo/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <tuple>

namespace esvo {

void PatchConfig::validate() const {
  if (size < 3 || size % 2 == 0) throw Error(ErrorCode::kInvalidArgument, "patch size must be odd and >= 3");
}

void MapperConfig::validate() const {
  patch.validate();
  model.validate();
  if (!(rho_min > 0.0) || !(rho_max > rho_min))
    throw Error(ErrorCode::kInvalidArgument, "inverse depth interval must satisfy 0 < rho_min < rho_max");
  if (disparity_min < 0 || disparity_max < disparity_min)
    throw Error(ErrorCode::kInvalidArgument, "bad disparity range");
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  if (workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
}

double zncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorCode::kInvalidArgument, "patch size mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw Error(ErrorCode::kDegeneratePatch, "degenerate patch");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Result<DisparityMatch> init_inverse_depth(const Eigen::Vector2i& pixel, const StereoObservation& obs,
                                          const StereoRig& rig, int disparity_min, int disparity_max,
                                          const PatchConfig& patch, double threshold) {
  const int h = patch.half();
  const int w = obs.left.width();
  const int H = obs.left.height();
  const int x = pixel.x();
  const int y = pixel.y();
  if (x - h < 0 || x + h >= w || y - h < 0 || y + h >= H) return Failure::kPatchOutOfBounds;

  const int n = patch.area();
  std::vector<double> left(n);
  double mean = 0.0;
  for (int dy = -h, k = 0; dy <= h; ++dy)
    for (int dx = -h; dx <= h; ++dx, ++k) {
      left[k] = obs.left.at(x + dx, y + dy);
      mean += left[k];
    }
  mean /= n;
  double norm2 = 0.0;
  for (double& v : left) {
    v -= mean;
    norm2 += v * v;
  }
  if (!(norm2 > 0.0)) return Failure::kNoMatch;

  int best_d = -1;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> right(n);
  for (int d = disparity_min; d <= disparity_max; ++d) {
    const int xr = x - d;
    if (xr - h < 0 || xr + h >= obs.right.width()) continue;
    double rmean = 0.0;
    for (int dy = -h, k = 0; dy <= h; ++dy)
      for (int dx = -h; dx <= h; ++dx, ++k) {
        right[k] = obs.right.at(xr + dx, y + dy);
        rmean += right[k];
      }
    rmean /= n;
    double rnorm2 = 0.0, cross = 0.0;
    for (int k = 0; k < n; ++k) {
      const double v = right[k] - rmean;
      rnorm2 += v * v;
      cross += v * left[k];
    }
    if (!(rnorm2 > 0.0)) continue;
    const double score = cross / std::sqrt(norm2 * rnorm2);
    if (score > best) {
      best = score;
      best_d = d;
    }
  }
  if (best_d < 0 || best < threshold) return Failure::kNoMatch;
  return DisparityMatch{best_d, best, best_d / (rig.left.fx * rig.baseline())};
}

namespace {

struct WarpedCenter {
  Eigen::Vector2d pixel;
  Eigen::Vector2d d_pixel_d_rho;
};

// x = pi(R f + rho t): scaling the camera-frame point by rho leaves the
// projection unchanged and makes the dependence on rho affine.
std::optional<WarpedCenter> warp_center(const CameraModel& cam, const Eigen::Vector3d& Rf,
                                        const Eigen::Vector3d& t, double rho) {
  const Eigen::Vector3d Q = Rf + rho * t;
  if (!(Q.z() > 0.0)) return std::nullopt;
  const double iz = 1.0 / Q.z();
  WarpedCenter out;
  out.pixel = {cam.cx + cam.fx * Q.x() * iz, cam.cy + cam.fy * Q.y() * iz};
  out.d_pixel_d_rho = {cam.fx * (t.x() * Q.z() - Q.x() * t.z()) * iz * iz,
                       cam.fy * (t.y() * Q.z() - Q.y() * t.z()) * iz * iz};
  return out;
}

}  // namespace

Result<PatchEvaluation> evaluate_patch(const Eigen::Vector2d& pixel, double rho, const StereoObservation& obs,
                                       const SE3& T_ct_cte, const StereoRig& rig, const PatchConfig& patch,
                                       bool with_jacobian) {
  const Eigen::Vector3d f = bearing(rig.left, pixel);
  const SE3 T_right = rig.T_right_left * T_ct_cte;
  const auto c1 = warp_center(rig.left, T_ct_cte.rotation * f, T_ct_cte.translation, rho);
  const auto c2 = warp_center(rig.right, T_right.rotation * f, T_right.translation, rho);
  if (!c1 || !c2) return Failure::kBehindCamera;

  const int h = patch.half();
  const int n = patch.area();
  PatchEvaluation out;
  out.residuals.assign(n, 0.0);
  if (with_jacobian) out.jacobian.assign(n, 0.0);
  out.valid.assign(n, 0);
  out.activity.assign(n, 0.0);
  out.left_center = c1->pixel;
  out.right_center = c2->pixel;

  for (int dy = -h, k = 0; dy <= h; ++dy) {
    for (int dx = -h; dx <= h; ++dx, ++k) {
      const Eigen::Vector2d offset(dx, dy);
      if (with_jacobian) {
        const auto s1 = obs.left.sample_with_gradient(c1->pixel + offset);
        if (!s1) continue;
        const auto s2 = obs.right.sample_with_gradient(c2->pixel + offset);
        if (!s2) continue;
        out.residuals[k] = s1->value - s2->value;
        out.activity[k] = std::max(s1->value, s2->value);
        out.jacobian[k] = s1->gradient.dot(c1->d_pixel_d_rho) - s2->gradient.dot(c2->d_pixel_d_rho);
      } else {
        const auto v1 = obs.left.sample(c1->pixel + offset);
        if (!v1) continue;
        const auto v2 = obs.right.sample(c2->pixel + offset);
        if (!v2) continue;
        out.residuals[k] = *v1 - *v2;
        out.activity[k] = std::max(*v1, *v2);
      }
      out.valid[k] = 1;
      ++out.valid_count;
    }
  }
  if (2 * out.valid_count < n) return Failure::kInsufficientSupport;
  return out;
}

Result<PatchEvaluation> residual_vector(const Event& event, double rho, const StereoObservation& obs,
                                        const SE3& T_ct_cte, const StereoRig& rig, const PatchConfig& patch) {
  return evaluate_patch(Eigen::Vector2d(event.x, event.y), rho, obs, T_ct_cte, rig, patch, false);
}

Result<std::vector<double>> depth_jacobian(const Event& event, double rho, const StereoObservation& obs,
                                           const SE3& T_ct_cte, const StereoRig& rig,
                                           const PatchConfig& patch) {
  auto eval = evaluate_patch(Eigen::Vector2d(event.x, event.y), rho, obs, T_ct_cte, rig, patch, true);
  if (!eval) return eval.failure();
  return std::move(eval.value().jacobian);
}

Uncertainty estimate_uncertainty(double /*rho*/, std::span<const double> jacobian, const ResidualModel& model) {
  double jj = 0.0;
  for (double j : jacobian) jj += j * j;
  if (!(jj > 0.0)) throw Error(ErrorCode::kUnobservableDepth, "unobservable depth");
  return {model.scale * model.scale / jj, model.dof};
}

double variance_of(const InverseDepthEstimate& e) {
  const double s = student_t_stddev(e.scale, e.dof);
  return s * s;
}

Result<DepthSolution> refine_inverse_depth(const Event& event, double rho0, const StereoObservation& obs,
                                           const SE3& T_ct_cte, const StereoRig& rig, const MapperConfig& config) {
  const Eigen::Vector2d pixel(event.x, event.y);
  const ResidualModel& model = config.model;
  double rho = std::clamp(rho0, config.rho_min, config.rho_max);

  DepthSolution solution;
  PatchEvaluation eval;
  for (int it = 0; it < config.max_iterations; ++it) {
    auto r = evaluate_patch(pixel, rho, obs, T_ct_cte, rig, config.patch, true);
    if (!r) return r.failure();
    eval = std::move(r.value());

    double jwr = 0.0, jwj = 0.0;
    for (std::size_t i = 0; i < eval.residuals.size(); ++i) {
      if (!eval.valid[i]) continue;
      double weight = 1.0;
      if (config.robust) {
        const double z = (eval.residuals[i] - model.mu) / model.scale;
        weight = (model.dof + 1.0) / (model.dof + z * z);
      }
      jwr += weight * eval.jacobian[i] * eval.residuals[i];
      jwj += weight * eval.jacobian[i] * eval.jacobian[i];
    }
    if (!(jwj > 0.0)) return Failure::kUnobservableDepth;

    const double delta = -jwr / jwj;
    rho += delta;
    solution.iterations = it + 1;
    if (!(rho >= config.rho_min && rho <= config.rho_max)) return Failure::kDiverged;
    if (std::abs(delta) < config.convergence_tolerance * std::max(rho, config.rho_min)) break;
  }

  double cost = 0.0;
  for (std::size_t i = 0; i < eval.residuals.size(); ++i)
    if (eval.valid[i]) cost += eval.residuals[i] * eval.residuals[i];
  if (config.max_rms_sigmas > 0.0 && model.dof > 2.0) {
    const double limit = config.max_rms_sigmas * student_t_stddev(model.scale, model.dof);
    if (cost > limit * limit * eval.valid_count) return Failure::kInconsistent;
  }

  // Jacobian of the last linearization (|delta| below tolerance at convergence).
  const Uncertainty u = estimate_uncertainty(rho, eval.jacobian, model);
  solution.estimate.mu = rho;
  solution.estimate.scale = std::sqrt(u.scale2);
  solution.estimate.dof = u.dof;
  solution.estimate.pixel = pixel;
  solution.estimate.t = event.t;
  solution.cost = cost;
  return solution;
}

Result<InverseDepthEstimate> estimate_inverse_depth(const Event& event, const StereoObservation& obs,
                                                    const SE3& T_ct_cte, const StereoRig& rig,
                                                    const MapperConfig& config) {
  // Only disparities that can map into the search interval are swept.
  const double fb = rig.left.fx * rig.baseline();
  const int d_lo = std::max(config.disparity_min, static_cast<int>(std::floor(fb * config.rho_min)) - 1);
  const int d_hi = std::min(config.disparity_max, static_cast<int>(std::ceil(fb * config.rho_max)) + 1);
  const auto init = init_inverse_depth(Eigen::Vector2i(event.x, event.y), obs, rig, std::max(0, d_lo), d_hi,
                                       config.patch, config.zncc_threshold);
  if (!init) return init.failure();
  auto solution = refine_inverse_depth(event, init->rho, obs, T_ct_cte, rig, config);
  if (!solution) return solution.failure();
  return solution->estimate;
}

Result<PropagatedEstimate> propagate_estimate(const InverseDepthEstimate& e, const SE3& T_target_source,
                                              const CameraModel& cam) {
  // rho' = rho / ((R f)_z + rho t_z)
  const Eigen::Vector3d Rf = T_target_source.rotation * bearing(cam, e.pixel);
  const double tz = T_target_source.translation.z();
  const Eigen::Vector3d P = Rf / e.mu + T_target_source.translation;
  if (!(P.z() > 0.0)) return Failure::kBehindCamera;
  const Eigen::Vector2d pixel(cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z());
  if (!cam.contains(pixel)) return Failure::kOutsideImage;

  const double denom = Rf.z() + e.mu * tz;
  PropagatedEstimate out;
  out.pixel = pixel;
  out.estimate = e;
  out.estimate.mu = 1.0 / P.z();
  out.estimate.scale = e.scale * std::abs(Rf.z() / (denom * denom));
  out.estimate.pixel = pixel;
  return out;
}

SemiDenseDepthMap::SemiDenseDepthMap(int width, int height, double t, const SE3& T_world_cam)
    : width_(width), height_(height), t_(t), pose_(T_world_cam),
      cells_(static_cast<std::size_t>(width) * height) {}

std::size_t SemiDenseDepthMap::size() const {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); }));
}

std::vector<InverseDepthEstimate> SemiDenseDepthMap::estimates() const {
  std::vector<InverseDepthEstimate> out;
  for (const auto& c : cells_)
    if (c) out.push_back(*c);
  return out;
}

std::vector<Eigen::Vector3d> SemiDenseDepthMap::points(const CameraModel& cam) const {
  std::vector<Eigen::Vector3d> out;
  for (const auto& c : cells_)
    if (c) out.push_back(bearing(cam, c->pixel) / c->mu);
  return out;
}

void fuse_into_map(SemiDenseDepthMap& map, const Eigen::Vector2d& pixel, const InverseDepthEstimate& e,
                   FusionStats* stats) {
  if (!(e.scale > 0.0) || !(e.dof > 2.0) || !std::isfinite(e.mu)) return;
  const double incoming_var = variance_of(e);
  const int x0 = static_cast<int>(std::floor(pixel.x()));
  const int y0 = static_cast<int>(std::floor(pixel.y()));
  FusionStats local;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int x = x0 + dx;
      const int y = y0 + dy;
      if (x < 0 || y < 0 || x >= map.width() || y >= map.height()) continue;
      auto& cell = map.at(x, y);
      InverseDepthEstimate placed = e;
      placed.pixel = Eigen::Vector2d(x, y);
      placed.t = map.t();
      if (!cell) {
        cell = placed;
        ++local.assigned;
        continue;
      }
      const double sigma_b = student_t_stddev(cell->scale, cell->dof);
      if (e.mu >= cell->mu - 2.0 * sigma_b && e.mu <= cell->mu + 2.0 * sigma_b) {
        const StudentT post = filter_update(e.distribution(), cell->distribution());
        cell->mu = post.mu;
        cell->scale = post.scale;
        cell->dof = post.dof;
        cell->t = map.t();
        ++local.fused;
      } else if (incoming_var < variance_of(*cell)) {
        cell = placed;
        ++local.replaced;
      } else {
        ++local.kept;
      }
    }
  }
  if (stats) *stats += local;
}

EstimateSet estimate_observation(std::span<const Event> events, const StereoObservation& obs,
                                 const TrajectoryDB& traj, const StereoRig& rig, const MapperConfig& config,
                                 MappingStats* stats) {
  config.validate();
  const SE3 T_world_obs = traj.interpolate(obs.t);
  const SE3 T_obs_world = T_world_obs.inverse();

  std::vector<std::optional<InverseDepthEstimate>> results(events.size());
  std::vector<SE3> poses(events.size());
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      poses[i] = traj.interpolate(events[i].t);
      const auto r = estimate_inverse_depth(events[i], obs, T_obs_world * poses[i], rig, config);
      if (r) results[i] = *r;
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(1, events.size()));
  if (workers <= 1) {
    work(0, events.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (events.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(events.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }

  EstimateSet set;
  set.t = obs.t;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!results[i]) continue;
    set.estimates.push_back(*results[i]);
    set.T_world_event.push_back(poses[i]);
  }
  if (stats) {
    stats->attempted += events.size();
    stats->converged += set.estimates.size();
  }
  return set;
}

SemiDenseDepthMap fuse_estimate_sets(std::span<const EstimateSet> sets, double t, const SE3& T_world_target,
                                     const CameraModel& cam, FusionStats* stats) {
  SemiDenseDepthMap map(cam.width, cam.height, t, T_world_target);
  const SE3 T_target_world = T_world_target.inverse();
  for (const EstimateSet& set : sets) {
    std::vector<std::size_t> order(set.estimates.size());
    std::iota(order.begin(), order.end(), 0);
    const auto key = [&](std::size_t i) {
      const auto& e = set.estimates[i];
      return std::make_tuple(e.pixel.y(), e.pixel.x(), e.t, e.mu, e.scale);
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    for (std::size_t i : order) {
      const auto p = propagate_estimate(set.estimates[i], T_target_world * set.T_world_event[i], cam);
      if (!p) continue;
      fuse_into_map(map, p->pixel, p->estimate, stats);
    }
  }
  return map;
}

SemiDenseDepthMap build_depth_map(std::span<const MappingInput> inputs, const TrajectoryDB& traj,
                                  const StereoRig& rig, const MapperConfig& config, MappingStats* stats) {
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "build_depth_map needs at least one observation");
  std::vector<EstimateSet> sets;
  sets.reserve(inputs.size());
  MappingStats local;
  for (const MappingInput& in : inputs)
    sets.push_back(estimate_observation(in.events, *in.observation, traj, rig, config, &local));
  const double t = inputs.back().observation->t;
  SemiDenseDepthMap map = fuse_estimate_sets(sets, t, traj.interpolate(t), rig.left, &local.fusion);
  if (stats) {
    stats->attempted += local.attempted;
    stats->converged += local.converged;
    stats->fusion += local.fusion;
  }
  if (map.empty()) throw Error(ErrorCode::kEmptyMap, "empty map");
  return map;
}

Mapper::Mapper(StereoRig rig, MapperConfig config, std::size_t window)
    : rig_(std::move(rig)), config_(std::move(config)), window_(window) {
  config_.validate();
  if (window_ == 0) throw Error(ErrorCode::kInvalidArgument, "fusion window must be >= 1");
}

SemiDenseDepthMap Mapper::update(std::span<const Event> events, const StereoObservation& obs,
                                 const TrajectoryDB& traj, MappingStats* stats) {
  MappingStats local;
  sets_.push_back(estimate_observation(events, obs, traj, rig_, config_, &local));
  while (sets_.size() > window_) sets_.pop_front();
  const std::vector<EstimateSet> window(sets_.begin(), sets_.end());
  SemiDenseDepthMap map = fuse_estimate_sets(window, obs.t, traj.interpolate(obs.t), rig_.left, &local.fusion);
  if (stats) {
    stats->attempted += local.attempted;
    stats->converged += local.converged;
    stats->fusion += local.fusion;
  }
  if (map.empty()) throw Error(ErrorCode::kEmptyMap, "empty map");
  return map;
}

}  // namespace esvo
