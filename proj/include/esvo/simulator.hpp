#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esvo/geometry.hpp"
#include "esvo/io.hpp"
#include "esvo/time_surface.hpp"

namespace esvo {

enum class TexturePattern {
  kRandomCells,   // independent binary cells
  kCheckerboard,
  kVerticalStep,  // dark for u < 0, bright for u >= 0
};

/// Plane Z = depth (world frame) with a binary pattern on a possibly rotated
/// grid anchored at (origin_x, origin_y).
struct TexturedPlane {
  double depth = 2.0;
  double x_min = -5.0, x_max = 5.0;
  double y_min = -5.0, y_max = 5.0;
  double cell_size = 0.1;
  double angle = 0.0;  // grid rotation, radians
  double origin_x = 0.0, origin_y = 0.0;
  TexturePattern pattern = TexturePattern::kRandomCells;
  std::uint64_t seed = 1;
  double dark = 0.2;
  double bright = 0.8;
};

/// How the three default planes share the image of the default rig.
enum class PlaneLayout {
  kRows,     // horizontal bands: boundaries stay put under x-translation
  kColumns,  // vertical bands: boundaries stay put under y-translation
};

struct SceneConfig {
  std::vector<TexturedPlane> planes;
  double background = 0.5;
  /// Side of the square box filter applied at each pixel, in pixels; values
  /// above 1 stand in for optical blur.
  double filter_px = 1.0;

  /// Throws kInvalidArgument for empty scenes or non-positive intensities.
  void validate() const;

  /// Fronto-parallel planes at 1.0, 1.5 and 2.2 m with random textures on
  /// grids rotated to give edges in several orientations. Seen from the
  /// identity pose through the default rig, the planes occupy three bands
  /// separated by 16 px of empty background, so no 25 px patch straddles two
  /// depths.
  static SceneConfig three_planes(std::uint64_t seed = 7, PlaneLayout layout = PlaneLayout::kRows);
  /// A single plane; handy for closed-form checks.
  static SceneConfig single_plane(double depth, TexturePattern pattern, double cell_size, std::uint64_t seed = 7);
};

enum class MotionPrimitive { kTranslateX, kTranslateY, kTranslateZ, kRotateZ, kGeneral };

MotionPrimitive parse_motion(const std::string& name);
std::string to_string(MotionPrimitive m);

/// Smooth left-camera trajectory in the world (= first left camera) frame.
struct SimTrajectory {
  MotionPrimitive primitive = MotionPrimitive::kTranslateX;
  double duration = 5.0;
  double linear_speed = 0.3;   // m/s for translations
  double angular_speed = 0.5;  // rad/s for rotate-z
  double amplitude = 0.15;     // m, general motion
  bool reversed = false;       // play the path backwards
  SE3 start;

  SE3 pose_at(double t) const;
};

struct IntensityImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Box-filtered projection of the plane patterns seen from T_world_cam.
/// Throws kCameraInsidePlane when the optical centre lies on a plane.
IntensityImage render_intensity(const SceneConfig& scene, const SE3& T_world_cam, const CameraModel& cam);

/// Inverse depth of the nearest plane hit along the pixel ray, if any.
std::optional<double> ground_truth_inverse_depth(const SceneConfig& scene, const SE3& T_world_cam,
                                                 const CameraModel& cam, const Eigen::Vector2d& pixel);

/// Whole-image version of ground_truth_inverse_depth (NaN = no surface).
FloatMap ground_truth_inverse_depth_map(const SceneConfig& scene, const SE3& T_world_cam, const CameraModel& cam,
                                        double t);

struct SimulationOptions {
  double contrast_threshold = 0.3;
  double frame_rate = 1000.0;
  double timestamp_jitter = 0.0;  // std dev in seconds, 0 = ideal
  std::uint64_t seed = 0;
  std::vector<double> depth_sample_times;
};

struct SimulationOutput {
  std::vector<Event> left;
  std::vector<Event> right;
  TrajectoryDB ground_truth;  // left camera, one knot per rendered frame
  std::vector<FloatMap> ground_truth_inverse_depth;  // at depth_sample_times
};

/// Ideal DVS: a pixel fires whenever its log intensity crosses a multiple of
/// the contrast threshold, with timestamps interpolated linearly inside the
/// frame interval. Throws kFrameRateTooLow when the image moves by a pixel or
/// more between frames, kInvalidArgument for a non-positive threshold.
SimulationOutput simulate_events(const SceneConfig& scene, const SimTrajectory& traj, const StereoRig& rig,
                                 const SimulationOptions& options = {});

/// Default simulated rig: 240x180, f = 200 px, 15 cm baseline.
StereoRig default_sim_rig();

}  // namespace esvo
