#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esvo/geometry.hpp"
#include "esvo/mapping.hpp"
#include "esvo/time_surface.hpp"
#include "esvo/tracking.hpp"

namespace esvo {

enum class RunMode {
  kTracking,     // full loop: tracking and mapping interleaved
  kGroundTruth,  // mapping only, fed with ground-truth poses
};

struct SystemConfig {
  double eta = 0.030;           // s, time-surface decay
  double surface_rate = 100.0;  // Hz
  double mapping_rate = 20.0;   // Hz
  int fusion_window = 20;       // observations fused per map (M + 1)
  int event_budget = 1000;      // events per mapping update ...
  int event_pool = 10000;       // ... drawn from this many most recent ones
  double active_threshold = 50.0;  // surface value marking an active pixel
  int bootstrap_min_active = 500;
  /// Typical converged scale of the mapper; bootstrap depths get 5x this.
  double typical_scale = 0.01;
  int max_tracking_failures = 10;
  int target_blur = 5;
  std::uint64_t seed = 1;
  RunMode mode = RunMode::kTracking;
  TrackerConfig tracker;
  MapperConfig mapper;

  // File-based runs. Relative paths resolve against the config file.
  std::filesystem::path calibration;
  std::filesystem::path events_left;
  std::filesystem::path events_right;
  std::filesystem::path gt_poses;
  std::filesystem::path output_dir = "esvo_out";

  void validate() const;
};

/// Applies key=value settings. Throws kParse on unknown keys or bad values.
SystemConfig parse_system_config(const std::map<std::string, std::string>& values,
                                 const std::filesystem::path& base_dir = {});
SystemConfig read_system_config(const std::filesystem::path& path);
/// Every key understood by parse_system_config, with its current value.
std::map<std::string, std::string> to_key_values(const SystemConfig& config);

/// Dense ZNCC disparity sweep over the active left pixels. Throws
/// kCannotBootstrap when either surface has too few active pixels.
SemiDenseDepthMap bootstrap(const StereoObservation& obs, const StereoRig& rig, const SystemConfig& config,
                            const SE3& T_world_cam = {});

struct VoResult {
  TrajectoryDB trajectory;
  std::vector<SemiDenseDepthMap> window_maps;  // one per completed fusion window, plus the last
  std::vector<Eigen::Vector3d> cloud;          // world frame
  std::size_t observations = 0;
  std::size_t tracking_failures = 0;
  std::size_t reinitializations = 0;
  std::size_t mapping_updates = 0;
  MappingStats mapping;
};

/// Runs the system over time-sorted event streams. In ground-truth mode
/// `gt` supplies every pose; otherwise the first pose is the identity.
VoResult run_vo(const std::vector<Event>& left, const std::vector<Event>& right, const StereoRig& rig,
                const SystemConfig& config, const TrajectoryDB* gt = nullptr, std::ostream* log = nullptr);

/// File-based run: reads the inputs named in `config`, writes
/// trajectory.txt, depth_NNNN.txt / sigma_NNNN.txt and cloud.ply.
VoResult run_vo(const SystemConfig& config, std::ostream* log = nullptr);

/// Picks `budget` of the latest `pool` events (seeded, without
/// replacement) and returns them time-sorted.
std::vector<Event> select_mapping_events(std::span<const Event> recent, int budget, int pool, std::uint64_t seed);

struct BenchReport {
  double surface_ms = 0.0;        // render + negative + blur, one camera
  double refinements_500_ms = 0.0;
  double track_ms = 0.0;          // one 300-point x 5-iteration solve
  double mapping_update_ms = 0.0;  // one observation, full event budget
};

/// Times the main stages on a short simulated sequence.
BenchReport run_benchmark(std::uint64_t seed = 1);

}  // namespace esvo
