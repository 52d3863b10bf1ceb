#include "esvo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "esvo/error.hpp"
#include "esvo/io.hpp"
#include "esvo/simulator.hpp"

namespace esvo {

void SystemConfig::validate() const {
  if (!(eta > 0.0)) throw Error(ErrorCode::kInvalidDecay, "eta must be positive");
  if (!(surface_rate > 0.0) || !(mapping_rate > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "rates must be positive");
  if (fusion_window < 1) throw Error(ErrorCode::kInvalidArgument, "fusion window must be >= 1");
  if (event_budget < 1 || event_pool < event_budget)
    throw Error(ErrorCode::kInvalidArgument, "event budget must be >= 1 and not exceed the event pool");
  if (bootstrap_min_active < 1) throw Error(ErrorCode::kInvalidArgument, "bootstrap_min_active must be >= 1");
  if (!(typical_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "typical_scale must be positive");
  if (max_tracking_failures < 0) throw Error(ErrorCode::kInvalidArgument, "max_tracking_failures must be >= 0");
  if (target_blur < 1 || target_blur % 2 == 0) throw Error(ErrorCode::kInvalidArgument, "target_blur must be odd");
  tracker.validate();
  mapper.validate();
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kParse, "parse error: expected a boolean, got '" + v + "'");
}

int parse_int(const std::string& v) { return static_cast<int>(parse_integer(v)); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  const std::filesystem::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

using Setter = std::function<void(SystemConfig&, const std::string&, const std::filesystem::path&)>;
using Getter = std::function<std::string(const SystemConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class T>
Field number(T SystemConfig::*member) {
  return {[member](SystemConfig& c, const std::string& v, const std::filesystem::path&) {
            if constexpr (std::is_floating_point_v<T>) c.*member = parse_double(v);
            else c.*member = static_cast<T>(parse_integer(v));
          },
          [member](const SystemConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field path_field(std::filesystem::path SystemConfig::*member) {
  return {[member](SystemConfig& c, const std::string& v, const std::filesystem::path& base) {
            c.*member = resolve(base, v);
          },
          [member](const SystemConfig& c) { return (c.*member).string(); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["eta"] = number(&SystemConfig::eta);
    f["surface_rate"] = number(&SystemConfig::surface_rate);
    f["mapping_rate"] = number(&SystemConfig::mapping_rate);
    f["fusion_window"] = number(&SystemConfig::fusion_window);
    f["event_budget"] = number(&SystemConfig::event_budget);
    f["event_pool"] = number(&SystemConfig::event_pool);
    f["active_threshold"] = number(&SystemConfig::active_threshold);
    f["bootstrap_min_active"] = number(&SystemConfig::bootstrap_min_active);
    f["typical_scale"] = number(&SystemConfig::typical_scale);
    f["max_tracking_failures"] = number(&SystemConfig::max_tracking_failures);
    f["target_blur"] = number(&SystemConfig::target_blur);
    f["seed"] = number(&SystemConfig::seed);
    f["mode"] = {[](SystemConfig& c, const std::string& v, const std::filesystem::path&) {
                   if (v == "track") c.mode = RunMode::kTracking;
                   else if (v == "gt") c.mode = RunMode::kGroundTruth;
                   else throw Error(ErrorCode::kParse, "parse error: mode must be 'track' or 'gt'");
                 },
                 [](const SystemConfig& c) { return std::string(c.mode == RunMode::kTracking ? "track" : "gt"); }};
    f["calibration"] = path_field(&SystemConfig::calibration);
    f["events_left"] = path_field(&SystemConfig::events_left);
    f["events_right"] = path_field(&SystemConfig::events_right);
    f["gt_poses"] = path_field(&SystemConfig::gt_poses);
    f["output_dir"] = path_field(&SystemConfig::output_dir);

    f["tracker.batch_size"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.batch_size = parse_int(v); },
                               [](const SystemConfig& c) { return std::to_string(c.tracker.batch_size); }};
    f["tracker.max_iterations"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.max_iterations = parse_int(v); },
                                   [](const SystemConfig& c) { return std::to_string(c.tracker.max_iterations); }};
    f["tracker.huber_delta"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.huber_delta = parse_double(v); },
                                [](const SystemConfig& c) { return format_double(c.tracker.huber_delta); }};
    f["tracker.lm_lambda"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.lm_lambda = parse_double(v); },
                              [](const SystemConfig& c) { return format_double(c.tracker.lm_lambda); }};
    f["tracker.stochastic"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.stochastic = parse_bool(v); },
                               [](const SystemConfig& c) { return std::string(c.tracker.stochastic ? "true" : "false"); }};
    f["tracker.seed"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.tracker.seed = static_cast<std::uint64_t>(parse_integer(v)); },
                         [](const SystemConfig& c) { return std::to_string(c.tracker.seed); }};

    f["mapper.patch_size"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.patch.size = parse_int(v); },
                              [](const SystemConfig& c) { return std::to_string(c.mapper.patch.size); }};
    f["mapper.rho_min"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.rho_min = parse_double(v); },
                           [](const SystemConfig& c) { return format_double(c.mapper.rho_min); }};
    f["mapper.rho_max"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.rho_max = parse_double(v); },
                           [](const SystemConfig& c) { return format_double(c.mapper.rho_max); }};
    f["mapper.zncc_threshold"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.zncc_threshold = parse_double(v); },
                                  [](const SystemConfig& c) { return format_double(c.mapper.zncc_threshold); }};
    f["mapper.disparity_min"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.disparity_min = parse_int(v); },
                                 [](const SystemConfig& c) { return std::to_string(c.mapper.disparity_min); }};
    f["mapper.disparity_max"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.disparity_max = parse_int(v); },
                                 [](const SystemConfig& c) { return std::to_string(c.mapper.disparity_max); }};
    f["mapper.robust"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.robust = parse_bool(v); },
                          [](const SystemConfig& c) { return std::string(c.mapper.robust ? "true" : "false"); }};
    f["mapper.max_iterations"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.max_iterations = parse_int(v); },
                                  [](const SystemConfig& c) { return std::to_string(c.mapper.max_iterations); }};
    f["mapper.convergence_tolerance"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.convergence_tolerance = parse_double(v); },
                                         [](const SystemConfig& c) { return format_double(c.mapper.convergence_tolerance); }};
    f["mapper.max_rms_sigmas"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.max_rms_sigmas = parse_double(v); },
                                  [](const SystemConfig& c) { return format_double(c.mapper.max_rms_sigmas); }};
    f["mapper.residual_mu"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.model.mu = parse_double(v); },
                               [](const SystemConfig& c) { return format_double(c.mapper.model.mu); }};
    f["mapper.residual_scale"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.model.scale = parse_double(v); },
                                  [](const SystemConfig& c) { return format_double(c.mapper.model.scale); }};
    f["mapper.residual_dof"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.model.dof = parse_double(v); },
                                [](const SystemConfig& c) { return format_double(c.mapper.model.dof); }};
    f["mapper.workers"] = {[](SystemConfig& c, const std::string& v, const auto&) { c.mapper.workers = parse_int(v); },
                           [](const SystemConfig& c) { return std::to_string(c.mapper.workers); }};
    return f;
  }();
  return table;
}

void log_line(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n';
}

}  // namespace

SystemConfig parse_system_config(const std::map<std::string, std::string>& values,
                                 const std::filesystem::path& base_dir) {
  SystemConfig config;
  for (const auto& [key, value] : values) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error(ErrorCode::kParse, "parse error: unknown config key '" + key + "'");
    it->second.set(config, value, base_dir);
  }
  config.validate();
  return config;
}

SystemConfig read_system_config(const std::filesystem::path& path) {
  return parse_system_config(read_key_values(path), path.parent_path());
}

std::map<std::string, std::string> to_key_values(const SystemConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

SemiDenseDepthMap bootstrap(const StereoObservation& obs, const StereoRig& rig, const SystemConfig& config,
                            const SE3& T_world_cam) {
  const int left_active = count_active(obs.left, config.active_threshold);
  const int right_active = count_active(obs.right, config.active_threshold);
  if (left_active < config.bootstrap_min_active || right_active < config.bootstrap_min_active)
    throw Error(ErrorCode::kCannotBootstrap, "cannot bootstrap: " + std::to_string(left_active) + "/" +
                                                 std::to_string(right_active) + " active pixels");
  const MapperConfig& mc = config.mapper;
  SemiDenseDepthMap map(obs.left.width(), obs.left.height(), obs.t, T_world_cam);
  for (int y = 0; y < obs.left.height(); ++y) {
    for (int x = 0; x < obs.left.width(); ++x) {
      if (!(obs.left.at(x, y) > config.active_threshold)) continue;
      const auto match =
          init_inverse_depth({x, y}, obs, rig, mc.disparity_min, mc.disparity_max, mc.patch, mc.zncc_threshold);
      if (!match || !(match->rho >= mc.rho_min) || !(match->rho <= mc.rho_max)) continue;
      InverseDepthEstimate e;
      e.mu = match->rho;
      e.scale = 5.0 * config.typical_scale;
      e.dof = mc.model.dof;
      e.pixel = Eigen::Vector2d(x, y);
      e.t = obs.t;
      map.at(x, y) = e;
    }
  }
  if (map.empty()) throw Error(ErrorCode::kCannotBootstrap, "cannot bootstrap: no pixel matched");
  return map;
}

std::vector<Event> select_mapping_events(std::span<const Event> recent, int budget, int pool, std::uint64_t seed) {
  const std::size_t n = std::min(recent.size(), static_cast<std::size_t>(pool));
  const std::span<const Event> tail = recent.subspan(recent.size() - n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::vector<std::size_t> chosen;
  std::mt19937_64 rng(seed);
  std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), static_cast<std::size_t>(budget), rng);
  std::vector<Event> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(tail[i]);  // std::sample keeps the input order
  return out;
}

VoResult run_vo(const std::vector<Event>& left, const std::vector<Event>& right, const StereoRig& rig,
                const SystemConfig& config, const TrajectoryDB* gt, std::ostream* log) {
  config.validate();
  rig.left.validate();
  rig.right.validate();
  const bool gt_mode = config.mode == RunMode::kGroundTruth;
  if (gt_mode && (!gt || gt->empty())) throw Error(ErrorCode::kNoPoses, "ground-truth mode needs poses");
  if (left.empty() || right.empty()) throw Error(ErrorCode::kCannotBootstrap, "cannot bootstrap: no events");

  const double t_start = std::min(left.front().t, right.front().t);
  const double t_end = std::max(left.back().t, right.back().t);
  const double period = 1.0 / config.surface_rate;
  const int mapping_every = std::max(1, static_cast<int>(std::lround(config.surface_rate / config.mapping_rate)));

  LastEventMap left_map(rig.left.width, rig.left.height);
  LastEventMap right_map(rig.right.width, rig.right.height);
  ObservationHistory history;
  std::deque<Event> recent;
  std::size_t li = 0, ri = 0;

  VoResult result;
  Mapper mapper(rig, config.mapper, static_cast<std::size_t>(config.fusion_window));
  std::optional<SemiDenseDepthMap> map;
  SE3 pose;  // latest left-camera pose; identity fixes the gauge
  bool initialized = false;
  int consecutive_failures = 0;
  std::vector<Event> window_events;

  auto keep_map = [&](const SemiDenseDepthMap& m) {
    result.window_maps.push_back(m);
    for (const Eigen::Vector3d& p : m.points(rig.left)) result.cloud.push_back(m.pose() * p);
  };

  for (long long k = 1;; ++k) {
    const double t = t_start + static_cast<double>(k) * period;
    if (t > t_end + period) break;

    std::size_t lj = li;
    while (lj < left.size() && left[lj].t <= t) ++lj;
    left_map.ingest(std::span<const Event>(left).subspan(li, lj - li));
    for (std::size_t i = li; i < lj; ++i) recent.push_back(left[i]);
    while (recent.size() > static_cast<std::size_t>(config.event_pool)) recent.pop_front();
    li = lj;
    std::size_t rj = ri;
    while (rj < right.size() && right[rj].t <= t) ++rj;
    right_map.ingest(std::span<const Event>(right).subspan(ri, rj - ri));
    ri = rj;

    history.push({t, render(left_map, t, config.eta), render(right_map, t, config.eta)});
    const auto obs = history.latest();
    ++result.observations;

    if (!initialized) {
      if (gt_mode) pose = gt->interpolate(t);
      try {
        map = bootstrap(*obs, rig, config, pose);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kCannotBootstrap) throw;
        continue;
      }
      initialized = true;
      consecutive_failures = 0;
      mapper.reset();
      result.trajectory.append(t, pose);
      std::ostringstream msg;
      msg << "bootstrap at t=" << t << " with " << map->size() << " points";
      log_line(log, msg.str());
      continue;
    }

    if (gt_mode) {
      pose = gt->interpolate(t);
      result.trajectory.append(t, pose);
    } else {
      try {
        const MotionParams theta0 = cayley_from_se3(pose.inverse() * map->pose());
        const TrackingProblem problem = TrackingProblem::from_map(
            *map, rig.left, TrackingProblem::make_target(obs->left, config.target_blur), theta0);
        TrackerConfig tc = config.tracker;
        tc.seed = config.tracker.seed + static_cast<std::uint64_t>(k);
        pose = track(problem, tc).pose;
        result.trajectory.append(t, pose);
        consecutive_failures = 0;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientSupport && e.code() != ErrorCode::kDiverged &&
            e.code() != ErrorCode::kCayleySingularity)
          throw;
        ++result.tracking_failures;
        if (++consecutive_failures > config.max_tracking_failures) {
          log_line(log, "tracking lost at t=" + format_double(t) + ", re-initializing");
          initialized = false;
          ++result.reinitializations;
        }
        continue;
      }
    }

    if (k % mapping_every == 0) {
      window_events.assign(recent.begin(), recent.end());
      const std::vector<Event> events = select_mapping_events(window_events, config.event_budget,
                                                              config.event_pool,
                                                              config.seed + static_cast<std::uint64_t>(k));
      try {
        map = mapper.update(events, *obs, gt_mode ? *gt : result.trajectory, &result.mapping);
        ++result.mapping_updates;
        if (result.mapping_updates % static_cast<std::size_t>(config.fusion_window) == 0) keep_map(*map);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyMap) throw;
        log_line(log, "mapping produced no estimates at t=" + format_double(t));
      }
    }
  }

  if (!initialized && result.trajectory.empty())
    throw Error(ErrorCode::kCannotBootstrap, "cannot bootstrap: surfaces never became active enough");
  if (map && (result.window_maps.empty() || result.window_maps.back().t() != map->t())) keep_map(*map);
  return result;
}

VoResult run_vo(const SystemConfig& config, std::ostream* log) {
  const StereoRig rig = read_calibration(config.calibration);
  const std::vector<Event> left = read_events(config.events_left);
  const std::vector<Event> right = read_events(config.events_right);
  std::optional<TrajectoryDB> gt;
  if (config.mode == RunMode::kGroundTruth) gt = read_trajectory(config.gt_poses);

  VoResult result = run_vo(left, right, rig, config, gt ? &*gt : nullptr, log);

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + config.output_dir.string() + ": " + ec.message());
  write_trajectory(config.output_dir / "trajectory.txt", result.trajectory);
  for (std::size_t i = 0; i < result.window_maps.size(); ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".txt";
    write_float_map(config.output_dir / ("depth_" + name.str()), inverse_depth_map(result.window_maps[i]));
    write_float_map(config.output_dir / ("sigma_" + name.str()), sigma_map(result.window_maps[i]));
  }
  write_ply(config.output_dir / "cloud.ply", result.cloud);
  return result;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

BenchReport run_benchmark(std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::three_planes(seed);
  SimTrajectory traj;
  traj.primitive = MotionPrimitive::kTranslateX;
  traj.duration = 0.25;
  const SimulationOutput sim = simulate_events(scene, traj, rig);

  const double t_obs = traj.duration;
  const double eta = SystemConfig{}.eta;
  LastEventMap lm(rig.left.width, rig.left.height), rm(rig.right.width, rig.right.height);
  lm.ingest(sim.left);
  rm.ingest(sim.right);

  BenchReport report;
  auto start = clock::now();
  TimeSurface left_ts = render(lm, t_obs, eta);
  const TimeSurface target = TrackingProblem::make_target(left_ts, 5);
  report.surface_ms = elapsed_ms(start);
  const StereoObservation obs{t_obs, std::move(left_ts), render(rm, t_obs, eta)};

  // Refinement from ground-truth starts around the newest events.
  MapperConfig mc;
  const SE3 T_world_obs = sim.ground_truth.interpolate(t_obs);
  std::vector<std::pair<Event, double>> work;
  for (auto it = sim.left.rbegin(); it != sim.left.rend() && work.size() < 500; ++it) {
    const auto rho = ground_truth_inverse_depth(scene, sim.ground_truth.interpolate(it->t), rig.left,
                                                Eigen::Vector2d(it->x, it->y));
    if (rho) work.emplace_back(*it, *rho);
  }
  start = clock::now();
  for (const auto& [e, rho] : work) {
    const SE3 T = T_world_obs.inverse() * sim.ground_truth.interpolate(e.t);
    (void)refine_inverse_depth(e, rho, obs, T, rig, mc);
  }
  report.refinements_500_ms = elapsed_ms(start) * 500.0 / static_cast<double>(std::max<std::size_t>(1, work.size()));

  SemiDenseDepthMap map(rig.left.width, rig.left.height, t_obs, T_world_obs);
  for (int y = 0; y < rig.left.height; ++y)
    for (int x = 0; x < rig.left.width; ++x) {
      if (!(obs.left.at(x, y) > 50.0)) continue;
      const auto rho = ground_truth_inverse_depth(scene, T_world_obs, rig.left, Eigen::Vector2d(x, y));
      if (rho) map.at(x, y) = InverseDepthEstimate{*rho, 0.01, mc.model.dof, Eigen::Vector2d(x, y), t_obs};
    }
  MotionParams theta0;
  theta0.cayley = Eigen::Vector3d(0.002, -0.003, 0.001);
  theta0.translation = Eigen::Vector3d(0.005, 0.003, -0.004);
  const TrackingProblem problem = TrackingProblem::from_map(map, rig.left, target, theta0);
  TrackerConfig tc;
  tc.seed = seed;
  start = clock::now();
  (void)track(problem, tc);
  report.track_ms = elapsed_ms(start);

  TrajectoryDB gt = sim.ground_truth;
  const std::vector<Event> events = select_mapping_events(sim.left, 1000, 10000, seed);
  start = clock::now();
  MappingStats stats;
  (void)estimate_observation(events, obs, gt, rig, mc, &stats);
  report.mapping_update_ms = elapsed_ms(start);
  return report;
}

}  // namespace esvo
