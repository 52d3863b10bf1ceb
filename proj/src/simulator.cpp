#include "esvo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "esvo/error.hpp"

namespace esvo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double cell_value(const TexturedPlane& plane, long long i, long long j) {
  switch (plane.pattern) {
    case TexturePattern::kRandomCells: {
      const std::uint64_t h = splitmix64(plane.seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x632be59bd9b4e019ULL ^
                                                                 static_cast<std::uint64_t>(j)));
      return static_cast<double>(h & 1ULL);
    }
    case TexturePattern::kCheckerboard:
      return static_cast<double>(((i + j) % 2 + 2) % 2);
    case TexturePattern::kVerticalStep:
      return i >= 0 ? 1.0 : 0.0;
  }
  return 0.0;
}

// Mean of the cell pattern over an axis-aligned box of side `width` (in cell
// units) centred at (u, v).
double box_filtered(const TexturedPlane& plane, double u, double v, double width) {
  const double half = 0.5 * width;
  const double u0 = u - half, u1 = u + half;
  const double v0 = v - half, v1 = v + half;
  const long long i0 = static_cast<long long>(std::floor(u0));
  const long long i1 = static_cast<long long>(std::floor(u1));
  const long long j0 = static_cast<long long>(std::floor(v0));
  const long long j1 = static_cast<long long>(std::floor(v1));
  double acc = 0.0;
  for (long long j = j0; j <= j1; ++j) {
    const double oy = std::min(v1, static_cast<double>(j + 1)) - std::max(v0, static_cast<double>(j));
    if (oy <= 0.0) continue;
    for (long long i = i0; i <= i1; ++i) {
      const double ox = std::min(u1, static_cast<double>(i + 1)) - std::max(u0, static_cast<double>(i));
      if (ox <= 0.0) continue;
      acc += ox * oy * cell_value(plane, i, j);
    }
  }
  return acc / (width * width);
}

struct Hit {
  double depth;  // camera-frame z
  const TexturedPlane* plane;
  Eigen::Vector2d world_xy;
};

std::optional<Hit> intersect(const SceneConfig& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  std::optional<Hit> best;
  for (const TexturedPlane& plane : scene.planes) {
    if (std::abs(dir.z()) < 1e-12) continue;
    const double s = (plane.depth - origin.z()) / dir.z();
    if (!(s > 0.0)) continue;
    if (best && s >= best->depth) continue;
    const double X = origin.x() + s * dir.x();
    const double Y = origin.y() + s * dir.y();
    if (X < plane.x_min || X > plane.x_max || Y < plane.y_min || Y > plane.y_max) continue;
    best = Hit{s, &plane, {X, Y}};
  }
  return best;
}

void check_not_inside(const SceneConfig& scene, const Eigen::Vector3d& o) {
  for (const TexturedPlane& p : scene.planes)
    if (std::abs(o.z() - p.depth) < 1e-9 && o.x() >= p.x_min && o.x() <= p.x_max && o.y() >= p.y_min &&
        o.y() <= p.y_max)
      throw Error(ErrorCode::kCameraInsidePlane, "camera inside plane");
}

double shade(const Hit& hit, double footprint) {
  const TexturedPlane& p = *hit.plane;
  const double dx = hit.world_xy.x() - p.origin_x;
  const double dy = hit.world_xy.y() - p.origin_y;
  const double c = std::cos(p.angle), s = std::sin(p.angle);
  const double u = (c * dx + s * dy) / p.cell_size;
  const double v = (-s * dx + c * dy) / p.cell_size;
  const double coverage = box_filtered(p, u, v, footprint / p.cell_size);
  return p.dark + (p.bright - p.dark) * coverage;
}

// Renders log intensity (and optionally inverse depth) for every pixel.
void render_into(const SceneConfig& scene, const SE3& T_world_cam, const CameraModel& cam,
                 const std::vector<Eigen::Vector3d>& bearings, std::vector<double>* log_intensity,
                 std::vector<double>* inverse_depth) {
  check_not_inside(scene, T_world_cam.translation);
  const double inv_f = 2.0 * scene.filter_px / (cam.fx + cam.fy);
  const Eigen::Vector3d& o = T_world_cam.translation;
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    const Eigen::Vector3d d = T_world_cam.rotation * bearings[i];
    const auto hit = intersect(scene, o, d);
    if (log_intensity) (*log_intensity)[i] = std::log(hit ? shade(*hit, hit->depth * inv_f) : scene.background);
    if (inverse_depth) (*inverse_depth)[i] = hit ? 1.0 / hit->depth : std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<Eigen::Vector3d> pixel_bearings(const CameraModel& cam) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) out.push_back(bearing(cam, Eigen::Vector2d(x, y)));
  return out;
}

// Largest image motion between two poses over a coarse pixel grid.
double max_displacement(const SceneConfig& scene, const SE3& a, const SE3& b, const CameraModel& cam) {
  constexpr int kStep = 8;
  const SE3 T_b_a = b.inverse() * a;
  double worst = 0.0;
  for (int y = 0; y < cam.height; y += kStep) {
    for (int x = 0; x < cam.width; x += kStep) {
      const Eigen::Vector2d px(x, y);
      const Eigen::Vector3d d = a.rotation * bearing(cam, px);
      const auto hit = intersect(scene, a.translation, d);
      if (!hit) continue;
      const Eigen::Vector3d P = T_b_a * (bearing(cam, px) * hit->depth);
      if (!(P.z() > 0.0)) return std::numeric_limits<double>::infinity();
      const Eigen::Vector2d q(cam.cx + cam.fx * P.x() / P.z(), cam.cy + cam.fy * P.y() / P.z());
      worst = std::max(worst, (q - px).norm());
    }
  }
  return worst;
}

}  // namespace

void SceneConfig::validate() const {
  if (planes.empty()) throw Error(ErrorCode::kInvalidArgument, "scene has no planes");
  if (!(background > 0.0)) throw Error(ErrorCode::kInvalidArgument, "background intensity must be positive");
  if (!(filter_px > 0.0)) throw Error(ErrorCode::kInvalidArgument, "filter width must be positive");
  for (const auto& p : planes) {
    if (!(p.dark > 0.0) || !(p.bright > 0.0)) throw Error(ErrorCode::kInvalidArgument, "intensities must be positive");
    if (!(p.cell_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cell size must be positive");
    if (!(p.x_max > p.x_min) || !(p.y_max > p.y_min)) throw Error(ErrorCode::kInvalidArgument, "empty plane extent");
  }
}

SceneConfig SceneConfig::three_planes(std::uint64_t seed, PlaneLayout layout) {
  // Band limits in pixels of the default rig (f = 200, c = (120, 90)),
  // converted to metres at each plane's depth.
  const bool rows = layout == PlaneLayout::kRows;
  const double f = 200.0;
  const double c = rows ? 90.0 : 120.0;
  const double extent = rows ? 180.0 : 240.0;
  const double band = (extent - 32.0) / 3.0;
  auto at = [&](double depth, double px) { return depth * (px - c) / f; };

  auto make = [&](double depth, double lo_px, double hi_px, double cell, double angle, std::uint64_t s) {
    TexturedPlane p;
    p.depth = depth;
    const double lo = lo_px <= 0.0 ? -8.0 : at(depth, lo_px);
    const double hi = hi_px >= extent ? 8.0 : at(depth, hi_px);
    if (rows) {
      p.x_min = -8.0, p.x_max = 8.0, p.y_min = lo, p.y_max = hi;
    } else {
      p.x_min = lo, p.x_max = hi, p.y_min = -8.0, p.y_max = 8.0;
    }
    p.cell_size = cell;
    p.angle = angle;
    p.seed = splitmix64(seed + s);
    return p;
  };
  SceneConfig scene;
  scene.planes = {make(1.5, 0.0, band, 0.11, -0.5, 2),
                  make(2.2, band + 16.0, 2.0 * band + 16.0, 0.16, 0.35, 1),
                  make(1.0, 2.0 * band + 32.0, extent, 0.075, 0.8, 3)};
  return scene;
}

SceneConfig SceneConfig::single_plane(double depth, TexturePattern pattern, double cell_size, std::uint64_t seed) {
  SceneConfig scene;
  TexturedPlane p;
  p.depth = depth;
  p.x_min = -50.0, p.x_max = 50.0, p.y_min = -50.0, p.y_max = 50.0;
  p.cell_size = cell_size;
  p.pattern = pattern;
  p.seed = seed;
  scene.planes = {p};
  return scene;
}

MotionPrimitive parse_motion(const std::string& name) {
  if (name == "translate-x") return MotionPrimitive::kTranslateX;
  if (name == "translate-y") return MotionPrimitive::kTranslateY;
  if (name == "translate-z") return MotionPrimitive::kTranslateZ;
  if (name == "rotate-z") return MotionPrimitive::kRotateZ;
  if (name == "general") return MotionPrimitive::kGeneral;
  throw Error(ErrorCode::kInvalidArgument, "unknown motion primitive '" + name + "'");
}

std::string to_string(MotionPrimitive m) {
  switch (m) {
    case MotionPrimitive::kTranslateX: return "translate-x";
    case MotionPrimitive::kTranslateY: return "translate-y";
    case MotionPrimitive::kTranslateZ: return "translate-z";
    case MotionPrimitive::kRotateZ: return "rotate-z";
    case MotionPrimitive::kGeneral: return "general";
  }
  return "unknown";
}

SE3 SimTrajectory::pose_at(double t) const {
  const double s = reversed ? duration - t : t;
  SE3 rel;
  switch (primitive) {
    case MotionPrimitive::kTranslateX: rel = SE3::from_translation({linear_speed * s, 0.0, 0.0}); break;
    case MotionPrimitive::kTranslateY: rel = SE3::from_translation({0.0, linear_speed * s, 0.0}); break;
    case MotionPrimitive::kTranslateZ: rel = SE3::from_translation({0.0, 0.0, linear_speed * s}); break;
    case MotionPrimitive::kRotateZ: rel = SE3::from_axis_angle(Eigen::Vector3d::UnitZ(), angular_speed * s); break;
    case MotionPrimitive::kGeneral: {
      // Incommensurate sinusoids on every axis; starts at the identity.
      const double w = 2.0 * std::numbers::pi / 2.5;
      const Eigen::Vector3d trans(amplitude * std::sin(w * s), 0.6 * amplitude * std::sin(1.3 * w * s),
                                  0.4 * amplitude * std::sin(0.7 * w * s));
      const Eigen::Vector3d rot(0.06 * std::sin(1.1 * w * s), 0.08 * std::sin(0.9 * w * s),
                                0.10 * std::sin(0.8 * w * s));
      const double angle = rot.norm();
      rel.translation = trans;
      rel.rotation = angle > 0.0 ? Eigen::AngleAxisd(angle, rot / angle).toRotationMatrix()
                                 : Eigen::Matrix3d::Identity();
      break;
    }
  }
  return start * rel;
}

IntensityImage render_intensity(const SceneConfig& scene, const SE3& T_world_cam, const CameraModel& cam) {
  scene.validate();
  IntensityImage img{cam.width, cam.height, std::vector<double>(static_cast<std::size_t>(cam.width) * cam.height)};
  render_into(scene, T_world_cam, cam, pixel_bearings(cam), &img.values, nullptr);
  for (double& v : img.values) v = std::exp(v);
  return img;
}

std::optional<double> ground_truth_inverse_depth(const SceneConfig& scene, const SE3& T_world_cam,
                                                 const CameraModel& cam, const Eigen::Vector2d& pixel) {
  const auto hit = intersect(scene, T_world_cam.translation, T_world_cam.rotation * bearing(cam, pixel));
  if (!hit) return std::nullopt;
  return 1.0 / hit->depth;
}

FloatMap ground_truth_inverse_depth_map(const SceneConfig& scene, const SE3& T_world_cam, const CameraModel& cam,
                                        double t) {
  FloatMap map{cam.width, cam.height, t, std::vector<double>(static_cast<std::size_t>(cam.width) * cam.height)};
  render_into(scene, T_world_cam, cam, pixel_bearings(cam), nullptr, &map.values);
  return map;
}

StereoRig default_sim_rig() {
  const CameraModel cam(200.0, 200.0, 120.0, 90.0, 240, 180);
  return StereoRig::rectified(cam, cam, 0.15);
}

SimulationOutput simulate_events(const SceneConfig& scene, const SimTrajectory& traj, const StereoRig& rig,
                                 const SimulationOptions& options) {
  scene.validate();
  if (!(options.contrast_threshold > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "contrast threshold must be positive");
  if (!(options.frame_rate > 0.0) || !(traj.duration > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "frame rate and duration must be positive");

  const double C = options.contrast_threshold;
  const double dt = 1.0 / options.frame_rate;
  const int frames = static_cast<int>(std::llround(traj.duration * options.frame_rate));
  const SE3 T_left_right = rig.T_right_left.inverse();
  const std::size_t n = static_cast<std::size_t>(rig.left.width) * rig.left.height;

  struct CameraState {
    const CameraModel* cam;
    std::vector<Eigen::Vector3d> bearings;
    std::vector<double> log_prev, log_now;
    std::vector<long long> level;
    std::vector<Event>* out;
  };
  SimulationOutput result;
  CameraState cams[2] = {{&rig.left, pixel_bearings(rig.left), {}, {}, {}, &result.left},
                         {&rig.right, pixel_bearings(rig.right), {}, {}, {}, &result.right}};
  if (rig.right.width != rig.left.width || rig.right.height != rig.left.height)
    throw Error(ErrorCode::kInvalidArgument, "stereo cameras must share a resolution");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> jitter(0.0, options.timestamp_jitter > 0.0 ? options.timestamp_jitter : 1.0);

  SE3 prev_left = traj.pose_at(0.0);
  for (auto& c : cams) {
    c.log_prev.resize(n);
    c.log_now.resize(n);
    c.level.resize(n);
    const SE3 pose = (&c == &cams[0]) ? prev_left : prev_left * T_left_right;
    render_into(scene, pose, *c.cam, c.bearings, &c.log_prev, nullptr);
    for (std::size_t i = 0; i < n; ++i) c.level[i] = static_cast<long long>(std::floor(c.log_prev[i] / C));
  }
  result.ground_truth.append(0.0, prev_left);

  std::vector<Event> frame_events;
  for (int k = 1; k <= frames; ++k) {
    const double t0 = (k - 1) * dt;
    const double t1 = k * dt;
    const SE3 left_pose = traj.pose_at(t1);
    const SE3 right_pose = left_pose * T_left_right;
    if (max_displacement(scene, prev_left, left_pose, rig.left) >= 1.0 ||
        max_displacement(scene, prev_left * T_left_right, right_pose, rig.right) >= 1.0)
      throw Error(ErrorCode::kFrameRateTooLow, "frame rate too low: image motion of a pixel or more per frame");

    for (int ci = 0; ci < 2; ++ci) {
      CameraState& c = cams[ci];
      render_into(scene, ci == 0 ? left_pose : right_pose, *c.cam, c.bearings, &c.log_now, nullptr);
      frame_events.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double L0 = c.log_prev[i];
        const double L1 = c.log_now[i];
        const long long target = static_cast<long long>(std::floor(L1 / C));
        long long& level = c.level[i];
        if (target == level) continue;
        const auto x = static_cast<std::uint16_t>(i % c.cam->width);
        const auto y = static_cast<std::uint16_t>(i / c.cam->width);
        const int step = target > level ? 1 : -1;
        while (level != target) {
          // Rising: crossing of (level+1)*C. Falling: crossing of level*C.
          const double crossing = step > 0 ? (level + 1) * C : level * C;
          const double alpha = std::clamp((crossing - L0) / (L1 - L0), 0.0, 1.0);
          double t = t0 + alpha * dt;
          if (options.timestamp_jitter > 0.0) t = std::clamp(t + jitter(rng), 0.0, traj.duration);
          frame_events.push_back({t, x, y, static_cast<std::int8_t>(step)});
          level += step;
        }
      }
      std::stable_sort(frame_events.begin(), frame_events.end(),
                       [](const Event& a, const Event& b) { return a.t < b.t; });
      c.out->insert(c.out->end(), frame_events.begin(), frame_events.end());
      std::swap(c.log_prev, c.log_now);
    }
    result.ground_truth.append(t1, left_pose);
    prev_left = left_pose;
  }

  // Jitter can move an event across frame boundaries.
  if (options.timestamp_jitter > 0.0) {
    const auto by_time = [](const Event& a, const Event& b) { return a.t < b.t; };
    std::stable_sort(result.left.begin(), result.left.end(), by_time);
    std::stable_sort(result.right.begin(), result.right.end(), by_time);
  }

  for (double ts : options.depth_sample_times)
    result.ground_truth_inverse_depth.push_back(
        ground_truth_inverse_depth_map(scene, traj.pose_at(ts), rig.left, ts));
  return result;
}

}  // namespace esvo
