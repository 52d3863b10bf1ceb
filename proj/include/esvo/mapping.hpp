#pragma once

#include <Eigen/Core>

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "esvo/error.hpp"
#include "esvo/geometry.hpp"
#include "esvo/student_t.hpp"
#include "esvo/time_surface.hpp"

namespace esvo {

struct PatchConfig {
  int size = 25;  // odd, >= 3

  void validate() const;
  int half() const { return size / 2; }
  int area() const { return size * size; }
};

struct MapperConfig {
  PatchConfig patch;
  double rho_min = 1.0 / 10.0;
  double rho_max = 1.0 / 0.3;
  double zncc_threshold = 0.7;
  int disparity_min = 0;
  int disparity_max = 60;
  /// Student's t IRLS when true, plain least squares when false.
  bool robust = true;
  int max_iterations = 10;
  double convergence_tolerance = 1e-6;
  /// A converged estimate is rejected when the RMS of its patch residuals
  /// exceeds this many residual-model standard deviations (wrong matches,
  /// points the right camera cannot see). <= 0 or a dof <= 2 disables it.
  double max_rms_sigmas = 1.0;
  ResidualModel model = kSimulationResidualModel;
  int workers = 1;

  void validate() const;
};

struct InverseDepthEstimate {
  double mu = 0.0;     // inverse depth, 1/m
  double scale = 0.0;  // 1/m
  double dof = 0.0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double t = 0.0;

  StudentT distribution() const { return {mu, scale, dof}; }
};

/// Residuals r_i = T_left(x1_i) - T_right(x2_i) over the patch, optionally
/// with dr_i/drho. Invalid (out-of-image) entries hold 0 and are masked.
struct PatchEvaluation {
  std::vector<double> residuals;
  std::vector<double> jacobian;
  std::vector<std::uint8_t> valid;
  std::vector<double> activity;  // larger of the two surface samples
  int valid_count = 0;
  Eigen::Vector2d left_center;
  Eigen::Vector2d right_center;
};

/// Zero-normalized cross-correlation in [-1, 1]. Throws kDegeneratePatch if
/// either patch has zero variance and kInvalidArgument on a size mismatch.
double zncc(std::span<const double> a, std::span<const double> b);

struct DisparityMatch {
  int disparity;
  double score;
  double rho;
};

/// Integer-disparity ZNCC sweep along the (horizontal) epipolar line:
/// the left patch at `pixel` against right patches at (x - d, y).
Result<DisparityMatch> init_inverse_depth(const Eigen::Vector2i& pixel, const StereoObservation& obs,
                                          const StereoRig& rig, int disparity_min, int disparity_max,
                                          const PatchConfig& patch, double threshold);

/// Event pixel warped to the observation time by T_ct_cte (event camera at
/// t - eps to camera at t) and into the right camera by the rig extrinsic.
Result<PatchEvaluation> evaluate_patch(const Eigen::Vector2d& pixel, double rho, const StereoObservation& obs,
                                       const SE3& T_ct_cte, const StereoRig& rig, const PatchConfig& patch,
                                       bool with_jacobian);

/// Needs at least half of the patch to be valid (kInsufficientSupport).
Result<PatchEvaluation> residual_vector(const Event& event, double rho, const StereoObservation& obs,
                                        const SE3& T_ct_cte, const StereoRig& rig, const PatchConfig& patch);

/// dr/drho by the chain rule; invalid entries are 0.
Result<std::vector<double>> depth_jacobian(const Event& event, double rho, const StereoObservation& obs,
                                           const SE3& T_ct_cte, const StereoRig& rig,
                                           const PatchConfig& patch);

struct Uncertainty {
  double scale2;
  double dof;
};

/// scale^2 = s_r^2 / |J|^2, dof = nu_r. Throws kUnobservableDepth for J = 0.
Uncertainty estimate_uncertainty(double rho, std::span<const double> jacobian, const ResidualModel& model);

/// nu / (nu - 2) * s^2. Throws kUndefinedVariance for nu <= 2.
double variance_of(const InverseDepthEstimate& e);

struct DepthSolution {
  InverseDepthEstimate estimate;
  int iterations = 0;
  double cost = 0.0;  // sum of squared valid residuals at the solution
};

/// Gauss-Newton / IRLS refinement from a given starting inverse depth.
/// Fails with kInconsistent when the converged residuals fail the RMS gate.
Result<DepthSolution> refine_inverse_depth(const Event& event, double rho0, const StereoObservation& obs,
                                           const SE3& T_ct_cte, const StereoRig& rig, const MapperConfig& config);

/// ZNCC initialization followed by `refine_inverse_depth`.
Result<InverseDepthEstimate> estimate_inverse_depth(const Event& event, const StereoObservation& obs,
                                                    const SE3& T_ct_cte, const StereoRig& rig,
                                                    const MapperConfig& config);

struct PropagatedEstimate {
  Eigen::Vector2d pixel;
  InverseDepthEstimate estimate;
};

/// Moves an estimate into another camera frame. The scale is mapped through
/// |d rho_new / d rho_old| at the mean; the dof is unchanged.
Result<PropagatedEstimate> propagate_estimate(const InverseDepthEstimate& e, const SE3& T_target_source,
                                              const CameraModel& cam);

/// Semi-dense inverse depth anchored at a left-camera pose.
class SemiDenseDepthMap {
 public:
  SemiDenseDepthMap() = default;
  SemiDenseDepthMap(int width, int height, double t, const SE3& T_world_cam);

  int width() const { return width_; }
  int height() const { return height_; }
  double t() const { return t_; }
  const SE3& pose() const { return pose_; }

  const std::optional<InverseDepthEstimate>& at(int x, int y) const {
    return cells_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::optional<InverseDepthEstimate>& at(int x, int y) {
    return cells_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  /// Populated cells in row-major order.
  std::vector<InverseDepthEstimate> estimates() const;
  /// Points in the map's camera frame.
  std::vector<Eigen::Vector3d> points(const CameraModel& cam) const;

 private:
  int width_ = 0;
  int height_ = 0;
  double t_ = 0.0;
  SE3 pose_;
  std::vector<std::optional<InverseDepthEstimate>> cells_;
};

struct FusionStats {
  std::size_t assigned = 0;
  std::size_t fused = 0;     // compatible hypotheses merged by the t-filter
  std::size_t replaced = 0;  // incompatible, incoming had the smaller variance
  std::size_t kept = 0;      // incompatible, incumbent kept

  FusionStats& operator+=(const FusionStats& o) {
    assigned += o.assigned;
    fused += o.fused;
    replaced += o.replaced;
    kept += o.kept;
    return *this;
  }
};

/// Assign / fuse / replace at the four pixels around `pixel`.
void fuse_into_map(SemiDenseDepthMap& map, const Eigen::Vector2d& pixel, const InverseDepthEstimate& e,
                   FusionStats* stats = nullptr);

struct MappingStats {
  std::size_t attempted = 0;
  std::size_t converged = 0;
  FusionStats fusion;
};

/// Depth estimates of one observation, with the left-camera world pose at
/// each event time so they can be propagated later.
struct EstimateSet {
  double t = 0.0;
  std::vector<InverseDepthEstimate> estimates;
  std::vector<SE3> T_world_event;
};

EstimateSet estimate_observation(std::span<const Event> events, const StereoObservation& obs,
                                 const TrajectoryDB& traj, const StereoRig& rig, const MapperConfig& config,
                                 MappingStats* stats = nullptr);

/// Propagates every set (oldest first) into the target frame and fuses. Within
/// a set, estimates are fused in a canonical order so the result does not
/// depend on the order events were supplied in.
SemiDenseDepthMap fuse_estimate_sets(std::span<const EstimateSet> sets, double t, const SE3& T_world_target,
                                     const CameraModel& cam, FusionStats* stats = nullptr);

struct MappingInput {
  const StereoObservation* observation;
  std::span<const Event> events;
};

/// Estimates per event per observation, propagated to the newest observation
/// and fused. Throws kEmptyMap when nothing converged.
SemiDenseDepthMap build_depth_map(std::span<const MappingInput> inputs, const TrajectoryDB& traj,
                                  const StereoRig& rig, const MapperConfig& config,
                                  MappingStats* stats = nullptr);

/// Sliding-window mapper: keeps the estimate sets of the last `window`
/// observations and fuses them into the newest frame on every update.
class Mapper {
 public:
  Mapper(StereoRig rig, MapperConfig config, std::size_t window);

  /// Throws kEmptyMap when the fused window holds no estimates.
  SemiDenseDepthMap update(std::span<const Event> events, const StereoObservation& obs,
                           const TrajectoryDB& traj, MappingStats* stats = nullptr);
  void reset() { sets_.clear(); }
  std::size_t window() const { return window_; }
  const MapperConfig& config() const { return config_; }

 private:
  StereoRig rig_;
  MapperConfig config_;
  std::size_t window_;
  std::deque<EstimateSet> sets_;
};

}  // namespace esvo
