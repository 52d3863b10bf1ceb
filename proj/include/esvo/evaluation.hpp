#pragma once

#include <Eigen/Core>

#include <vector>

#include "esvo/geometry.hpp"
#include "esvo/io.hpp"
#include "esvo/mapping.hpp"
#include "esvo/simulator.hpp"

namespace esvo {

/// Estimated and ground-truth poses paired by nearest timestamp.
struct AssociatedPoses {
  std::vector<double> t;
  std::vector<SE3> est;
  std::vector<SE3> gt;
};

/// Pairs every estimated knot with the nearest ground-truth knot within
/// `tolerance` seconds.
AssociatedPoses associate(const TrajectoryDB& est, const TrajectoryDB& gt, double tolerance = 0.01);

/// Least-squares rigid transform A with A * src ~ dst (closed form, SVD of
/// the cross-covariance). Needs at least three points.
SE3 align_rigid(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst);

/// RMS of translation residuals after rigid alignment, in metres.
/// Throws kNoOverlap with fewer than three associated poses.
double evaluate_ate(const TrajectoryDB& est, const TrajectoryDB& gt, double tolerance = 0.01);

struct RelativePoseError {
  double rotation_deg_per_s = 0.0;
  double translation_m_per_s = 0.0;
  std::size_t pairs = 0;
};

/// RMS of the relative pose error over intervals of `delta` seconds,
/// normalised per second. Throws kNoOverlap when no pair spans delta.
RelativePoseError evaluate_rpe(const TrajectoryDB& est, const TrajectoryDB& gt, double delta = 1.0,
                               double tolerance = 0.01);

struct EvaluationReport {
  double ate_rms = 0.0;
  RelativePoseError rpe;
  AssociatedPoses series;
};

EvaluationReport evaluate_trajectory(const TrajectoryDB& est, const TrajectoryDB& gt, double rpe_delta = 1.0);

/// Depth accuracy of a semi-dense map against a ground-truth inverse-depth
/// image at the same pose. Errors are absolute depth differences in metres.
struct DepthErrorStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
  double relative = 0.0;  // mean / depth_range
  double density = 0.0;   // compared pixels / pixels with ground truth
};

DepthErrorStats depth_error(const SemiDenseDepthMap& map, const FloatMap& gt_inverse_depth, double depth_range);

struct ResidualHarvestOptions {
  double eta = 0.030;
  double first_observation = 0.2;  // s
  double observation_period = 0.1;  // s
  int events_per_observation = 200;
  int event_pool = 10000;
  /// Patch pixels where neither surface exceeds this value carry no
  /// information (no recent event on either side) and are skipped.
  double activity_threshold = 50.0;
  PatchConfig patch;
  std::uint64_t seed = 1;
};

/// Temporal residuals at ground-truth inverse depth and poses: for sampled
/// events, the stereo patch residuals of their observation.
std::vector<double> harvest_residuals(const SimulationOutput& sim, const SceneConfig& scene, const StereoRig& rig,
                                      const ResidualHarvestOptions& options = {});

}  // namespace esvo
