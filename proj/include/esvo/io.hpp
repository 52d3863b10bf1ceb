#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esvo/geometry.hpp"
#include "esvo/mapping.hpp"
#include "esvo/time_surface.hpp"

namespace esvo {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Throws kParse on malformed or trailing text.
double parse_double(const std::string& text);
long long parse_integer(const std::string& text);

/// key=value lines; blank lines and '#' comments are skipped. Throws kParse
/// on lines without '=' and on duplicate keys.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

// Calibration: fx_l fy_l cx_l cy_l fx_r fy_r cx_r cy_r width height baseline_m.
StereoRig read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const StereoRig& rig);

/// Streams "t x y p" lines (p in {0, 1}) without loading the whole file.
class EventFileReader {
 public:
  explicit EventFileReader(const std::filesystem::path& path);

  /// Next event, or nullopt at end of file. Throws kParse on a malformed line.
  std::optional<Event> next();
  /// Appends all events with t <= t_end to `out`.
  void read_until(double t_end, std::vector<Event>& out);
  bool done();

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_no_ = 0;
  std::optional<Event> pending_;
};

std::vector<Event> read_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, const std::vector<Event>& events);
std::string format_event(const Event& e);
Event parse_event(const std::string& line);

/// One "t tx ty tz qx qy qz qw" record.
struct PoseRecord {
  double t;
  Eigen::Vector3d translation;
  Eigen::Quaterniond rotation;

  bool operator==(const PoseRecord& o) const {
    return t == o.t && translation == o.translation && rotation.coeffs() == o.rotation.coeffs();
  }
};

std::vector<PoseRecord> read_pose_records(const std::filesystem::path& path);
void write_pose_records(const std::filesystem::path& path, const std::vector<PoseRecord>& records);
TrajectoryDB read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, const TrajectoryDB& traj);
std::vector<PoseRecord> to_pose_records(const TrajectoryDB& traj);

/// Header "width height t", then one row of values per image row; NaN marks
/// empty pixels.
struct FloatMap {
  int width = 0;
  int height = 0;
  double t = 0.0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const FloatMap& o) const;  // NaN == NaN for this purpose
};

FloatMap read_float_map(const std::filesystem::path& path);
void write_float_map(const std::filesystem::path& path, const FloatMap& map);

FloatMap inverse_depth_map(const SemiDenseDepthMap& map);
/// Standard deviation of each populated cell.
FloatMap sigma_map(const SemiDenseDepthMap& map);

/// ASCII PLY with "x y z" vertices.
void write_ply(const std::filesystem::path& path, const std::vector<Eigen::Vector3d>& points);
std::vector<Eigen::Vector3d> read_ply(const std::filesystem::path& path);

}  // namespace esvo
