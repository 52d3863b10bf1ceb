// esvo command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "esvo/error.hpp"
#include "esvo/evaluation.hpp"
#include "esvo/io.hpp"
#include "esvo/pipeline.hpp"
#include "esvo/simulator.hpp"

namespace {

namespace fs = std::filesystem;
using namespace esvo;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kIo:
    case ErrorCode::kNoOverlap:
    case ErrorCode::kNoPoses:
    case ErrorCode::kPixelOutOfRange:
    case ErrorCode::kNonMonotonicStream:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kCannotBootstrap:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

void print_summary(const VoResult& r, const SystemConfig& config) {
  std::cout << "observations: " << r.observations << "\n"
            << "poses: " << r.trajectory.size() << "\n"
            << "mapping updates: " << r.mapping_updates << "\n"
            << "depth estimates: " << r.mapping.converged << " of " << r.mapping.attempted << "\n"
            << "tracking failures: " << r.tracking_failures << "\n"
            << "re-initializations: " << r.reinitializations << "\n"
            << "cloud points: " << r.cloud.size() << "\n"
            << "output: " << config.output_dir.string() << "\n";
}

int cmd_run(const std::string& config_path, bool quiet) {
  const SystemConfig config = read_system_config(config_path);
  const VoResult r = run_vo(config, quiet ? nullptr : &std::cerr);
  print_summary(r, config);
  return 0;
}

int cmd_map(const std::string& config_path, const std::string& gt_poses, bool quiet) {
  auto values = read_key_values(config_path);
  values["mode"] = "gt";
  SystemConfig config = parse_system_config(values, fs::path(config_path).parent_path());
  config.gt_poses = gt_poses;
  const VoResult r = run_vo(config, quiet ? nullptr : &std::cerr);
  print_summary(r, config);
  return 0;
}

SceneConfig scene_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "three-planes") return SceneConfig::three_planes(seed, PlaneLayout::kRows);
  if (name == "three-planes-columns") return SceneConfig::three_planes(seed, PlaneLayout::kColumns);
  if (name == "plane") return SceneConfig::single_plane(2.0, TexturePattern::kRandomCells, 0.1, seed);
  throw Error(ErrorCode::kInvalidArgument, "unknown scene '" + name + "'");
}

struct SimArgs {
  std::string scene = "three-planes";
  std::string motion = "translate-x";
  std::string out;
  double duration = 5.0;
  double speed = SimTrajectory{}.linear_speed;
  double angular_speed = SimTrajectory{}.angular_speed;
  double jitter = 0.0;
  double depth_every = 0.5;
  std::uint64_t seed = 0;
};

int cmd_sim(const SimArgs& a) {
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = scene_by_name(a.scene, 7);
  SimTrajectory traj;
  traj.primitive = parse_motion(a.motion);
  traj.duration = a.duration;
  traj.linear_speed = a.speed;
  traj.angular_speed = a.angular_speed;
  SimulationOptions options;
  options.timestamp_jitter = a.jitter;
  options.seed = a.seed;
  if (a.depth_every > 0.0)
    for (double t = a.depth_every; t <= a.duration + 1e-9; t += a.depth_every) options.depth_sample_times.push_back(t);

  const SimulationOutput sim = simulate_events(scene, traj, rig, options);

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out.string() + ": " + ec.message());
  write_calibration(out / "calib.txt", rig);
  write_events(out / "events_left.txt", sim.left);
  write_events(out / "events_right.txt", sim.right);
  write_trajectory(out / "gt_trajectory.txt", sim.ground_truth);
  for (std::size_t i = 0; i < sim.ground_truth_inverse_depth.size(); ++i) {
    std::ostringstream name;
    name << "gt_depth_" << std::setw(4) << std::setfill('0') << i << ".txt";
    write_float_map(out / name.str(), sim.ground_truth_inverse_depth[i]);
  }

  // A run configuration next to the data; paths are relative to it.
  SystemConfig config;
  auto values = to_key_values(config);
  values["calibration"] = "calib.txt";
  values["events_left"] = "events_left.txt";
  values["events_right"] = "events_right.txt";
  values["gt_poses"] = "gt_trajectory.txt";
  values["output_dir"] = "esvo_out";
  std::ofstream cfg(out / "config.txt");
  if (!cfg) throw Error(ErrorCode::kIo, "cannot write " + (out / "config.txt").string());
  cfg << "# esvo run configuration for simulated " << a.scene << " / " << a.motion << "\n";
  for (const auto& [k, v] : values) cfg << k << "=" << v << "\n";
  if (!cfg) throw Error(ErrorCode::kIo, "cannot write " + (out / "config.txt").string());

  std::cout << "events: " << sim.left.size() << " left, " << sim.right.size() << " right\n"
            << "poses: " << sim.ground_truth.size() << "\n"
            << "depth maps: " << sim.ground_truth_inverse_depth.size() << "\n"
            << "written to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, double delta) {
  const TrajectoryDB est = read_trajectory(est_path);
  const TrajectoryDB gt = read_trajectory(gt_path);
  const EvaluationReport r = evaluate_trajectory(est, gt, delta);
  std::cout << std::fixed << std::setprecision(6) << "associated poses: " << r.series.t.size() << "\n"
            << "ATE RMS [m]: " << r.ate_rms << "\n"
            << "RPE rotation RMS [deg/s]: " << r.rpe.rotation_deg_per_s << "\n"
            << "RPE translation RMS [m/s]: " << r.rpe.translation_m_per_s << "\n"
            << "RPE pairs (delta " << delta << " s): " << r.rpe.pairs << "\n";
  return 0;
}

int cmd_bench() {
  const BenchReport r = run_benchmark();
  std::cout << std::fixed << std::setprecision(3) << "time surface (render + negative + blur) [ms]: " << r.surface_ms
            << "\n"
            << "500 depth refinements [ms]: " << r.refinements_500_ms << "\n"
            << "track solve, 300 points x 5 iterations [ms]: " << r.track_ms << "\n"
            << "mapping update, 1000 events [ms]: " << r.mapping_update_ms << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo event-camera visual odometry"};
  app.require_subcommand(1);

  bool quiet = false;
  std::string config_path, gt_poses;
  auto* run = app.add_subcommand("run", "Run tracking and mapping on event files");
  run->add_option("--config", config_path, "key=value configuration file")->required();
  run->add_flag("--quiet", quiet, "Suppress progress messages");

  auto* map = app.add_subcommand("map", "Mapping only, with ground-truth poses");
  map->add_option("--gt-poses", gt_poses, "Trajectory file (t tx ty tz qx qy qz qw)")->required();
  map->add_option("--config", config_path, "key=value configuration file")->required();
  map->add_flag("--quiet", quiet, "Suppress progress messages");

  SimArgs sim_args;
  auto* sim = app.add_subcommand("sim", "Generate a simulated stereo event sequence");
  sim->add_option("--scene", sim_args.scene, "three-planes | three-planes-columns | plane")->capture_default_str();
  sim->add_option("--motion", sim_args.motion, "translate-x | translate-y | translate-z | rotate-z | general")
      ->capture_default_str();
  sim->add_option("--out", sim_args.out, "Output directory")->required();
  sim->add_option("--duration", sim_args.duration, "Seconds")->capture_default_str();
  sim->add_option("--speed", sim_args.speed, "Linear speed [m/s]")->capture_default_str();
  sim->add_option("--angular-speed", sim_args.angular_speed, "Angular speed [rad/s]")->capture_default_str();
  sim->add_option("--jitter", sim_args.jitter, "Timestamp jitter std dev [s]")->capture_default_str();
  sim->add_option("--depth-every", sim_args.depth_every, "Ground-truth depth map period [s], 0 = none")
      ->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "Jitter seed")->capture_default_str();

  std::string est_path, gt_path;
  double rpe_delta = 1.0;
  auto* eval = app.add_subcommand("eval", "ATE / RPE of an estimated trajectory");
  eval->add_option("--est", est_path, "Estimated trajectory")->required();
  eval->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  eval->add_option("--rpe-delta", rpe_delta, "RPE interval [s]")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Throughput of the main stages");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, quiet);
    if (*map) return cmd_map(config_path, gt_poses, quiet);
    if (*sim) return cmd_sim(sim_args);
    if (*eval) return cmd_eval(est_path, gt_path, rpe_delta);
    if (*bench) return cmd_bench();
  } catch (const Error& e) {
    std::cerr << "esvo: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "esvo: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
