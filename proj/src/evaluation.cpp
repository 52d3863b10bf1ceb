#include "esvo/evaluation.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "esvo/error.hpp"
#include "esvo/pipeline.hpp"

namespace esvo {

AssociatedPoses associate(const TrajectoryDB& est, const TrajectoryDB& gt, double tolerance) {
  AssociatedPoses out;
  const auto& g = gt.knots();
  if (g.empty()) return out;
  for (const auto& k : est.knots()) {
    auto it = std::lower_bound(g.begin(), g.end(), k.t, [](const TrajectoryDB::Knot& a, double t) { return a.t < t; });
    const TrajectoryDB::Knot* best = nullptr;
    if (it != g.end()) best = &*it;
    if (it != g.begin() && (!best || k.t - std::prev(it)->t < best->t - k.t)) best = &*std::prev(it);
    if (!best || std::abs(best->t - k.t) > tolerance) continue;
    out.t.push_back(k.t);
    out.est.push_back(k.pose);
    out.gt.push_back(best->pose);
  }
  return out;
}

SE3 align_rigid(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.size() < 3)
    throw Error(ErrorCode::kNoOverlap, "no overlap: alignment needs at least three pairs");
  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Eigen::Matrix3d W = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) W += (dst[i] - mu_d) * (src[i] - mu_s).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) S(2, 2) = -1.0;
  SE3 A;
  A.rotation = svd.matrixU() * S * svd.matrixV().transpose();
  A.translation = mu_d - A.rotation * mu_s;
  return A;
}

double evaluate_ate(const TrajectoryDB& est, const TrajectoryDB& gt, double tolerance) {
  const AssociatedPoses pairs = associate(est, gt, tolerance);
  if (pairs.t.size() < 3) throw Error(ErrorCode::kNoOverlap, "no overlap between trajectories");
  std::vector<Eigen::Vector3d> src, dst;
  for (std::size_t i = 0; i < pairs.t.size(); ++i) {
    src.push_back(pairs.est[i].translation);
    dst.push_back(pairs.gt[i].translation);
  }
  const SE3 A = align_rigid(src, dst);
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (A * src[i] - dst[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

RelativePoseError evaluate_rpe(const TrajectoryDB& est, const TrajectoryDB& gt, double delta, double tolerance) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "RPE interval must be positive");
  const AssociatedPoses p = associate(est, gt, tolerance);
  RelativePoseError out;
  double sum_r = 0.0, sum_t = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    // First associated pose at least delta later, accepted if within tolerance.
    j = std::max(j, i + 1);
    while (j < p.t.size() && p.t[j] < p.t[i] + delta - tolerance) ++j;
    if (j >= p.t.size()) break;
    if (std::abs(p.t[j] - p.t[i] - delta) > tolerance) continue;
    const double span = p.t[j] - p.t[i];
    const SE3 gt_rel = p.gt[i].inverse() * p.gt[j];
    const SE3 est_rel = p.est[i].inverse() * p.est[j];
    const SE3 E = gt_rel.inverse() * est_rel;
    const double angle_deg = E.rotation_angle() * 180.0 / std::numbers::pi / span;
    const double trans = E.translation.norm() / span;
    sum_r += angle_deg * angle_deg;
    sum_t += trans * trans;
    ++out.pairs;
  }
  if (out.pairs == 0) throw Error(ErrorCode::kNoOverlap, "no overlap: no pose pair spans the RPE interval");
  out.rotation_deg_per_s = std::sqrt(sum_r / static_cast<double>(out.pairs));
  out.translation_m_per_s = std::sqrt(sum_t / static_cast<double>(out.pairs));
  return out;
}

EvaluationReport evaluate_trajectory(const TrajectoryDB& est, const TrajectoryDB& gt, double rpe_delta) {
  EvaluationReport r;
  r.ate_rms = evaluate_ate(est, gt);
  r.rpe = evaluate_rpe(est, gt, rpe_delta);
  r.series = associate(est, gt);
  return r;
}

DepthErrorStats depth_error(const SemiDenseDepthMap& map, const FloatMap& gt, double depth_range) {
  if (map.width() != gt.width || map.height() != gt.height)
    throw Error(ErrorCode::kInvalidArgument, "depth map and ground truth differ in size");
  if (!(depth_range > 0.0)) throw Error(ErrorCode::kInvalidArgument, "depth range must be positive");
  std::vector<double> errors;
  std::size_t with_gt = 0;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const double rho_gt = gt.at(x, y);
      if (!std::isfinite(rho_gt) || !(rho_gt > 0.0)) continue;
      ++with_gt;
      const auto& e = map.at(x, y);
      if (!e || !(e->mu > 0.0)) continue;
      errors.push_back(std::abs(1.0 / e->mu - 1.0 / rho_gt));
    }
  }
  DepthErrorStats s;
  s.count = errors.size();
  if (errors.empty()) return s;
  const double n = static_cast<double>(errors.size());
  for (double e : errors) s.mean += e;
  s.mean /= n;
  for (double e : errors) s.stddev += (e - s.mean) * (e - s.mean);
  s.stddev = std::sqrt(s.stddev / n);
  const auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
  std::nth_element(errors.begin(), mid, errors.end());
  s.median = *mid;
  if (errors.size() % 2 == 0) s.median = 0.5 * (s.median + *std::max_element(errors.begin(), mid));
  s.relative = s.mean / depth_range;
  s.density = with_gt ? n / static_cast<double>(with_gt) : 0.0;
  return s;
}

std::vector<double> harvest_residuals(const SimulationOutput& sim, const SceneConfig& scene, const StereoRig& rig,
                                      const ResidualHarvestOptions& options) {
  if (sim.ground_truth.empty()) throw Error(ErrorCode::kNoPoses, "simulation has no ground-truth poses");
  LastEventMap left(rig.left.width, rig.left.height), right(rig.right.width, rig.right.height);
  const double t_end = sim.ground_truth.back().t;
  std::size_t li = 0, ri = 0;
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double t = options.first_observation + k * options.observation_period;
    if (t > t_end) break;
    std::size_t lj = li, rj = ri;
    while (lj < sim.left.size() && sim.left[lj].t <= t) ++lj;
    while (rj < sim.right.size() && sim.right[rj].t <= t) ++rj;
    left.ingest(std::span<const Event>(sim.left).subspan(li, lj - li));
    right.ingest(std::span<const Event>(sim.right).subspan(ri, rj - ri));
    li = lj;
    ri = rj;
    const StereoObservation obs{t, render(left, t, options.eta), render(right, t, options.eta)};
    const SE3 T_world_obs = sim.ground_truth.interpolate(t);
    const std::vector<Event> events =
        select_mapping_events(std::span<const Event>(sim.left).first(li), options.events_per_observation,
                              options.event_pool, options.seed + static_cast<std::uint64_t>(k));
    for (const Event& e : events) {
      const SE3 T_world_event = sim.ground_truth.interpolate(e.t);
      const auto rho = ground_truth_inverse_depth(scene, T_world_event, rig.left, Eigen::Vector2d(e.x, e.y));
      if (!rho) continue;
      const auto patch = evaluate_patch(Eigen::Vector2d(e.x, e.y), *rho, obs, T_world_obs.inverse() * T_world_event,
                                        rig, options.patch, false);
      if (!patch) continue;
      for (std::size_t i = 0; i < patch->residuals.size(); ++i)
        if (patch->valid[i] && patch->activity[i] > options.activity_threshold) out.push_back(patch->residuals[i]);
    }
  }
  return out;
}

}  // namespace esvo
