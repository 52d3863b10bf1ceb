#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "esvo/error.hpp"
#include "esvo/simulator.hpp"

namespace esvo {
namespace {

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an esvo::Error";
  return ErrorCode::kInvalidArgument;
}

SceneConfig step_scene(double depth, double edge_x) {
  SceneConfig scene = SceneConfig::single_plane(depth, TexturePattern::kVerticalStep, 0.1);
  scene.planes[0].origin_x = edge_x;
  return scene;
}

std::vector<int> counts(const std::vector<Event>& events, const CameraModel& cam, int polarity) {
  std::vector<int> c(static_cast<std::size_t>(cam.width) * cam.height, 0);
  for (const Event& e : events)
    if (e.polarity == polarity) ++c[static_cast<std::size_t>(e.y) * cam.width + e.x];
  return c;
}

TEST(Scene, StepEdgeAtPrincipalPoint) {
  const StereoRig rig = default_sim_rig();
  const IntensityImage img = render_intensity(step_scene(2.0, 0.0), SE3::identity(), rig.left);
  const int cx = static_cast<int>(rig.left.cx), cy = static_cast<int>(rig.left.cy);
  EXPECT_LT(img.at(cx - 3, cy), img.at(cx + 3, cy));
}

TEST(Scene, DoublingDepthHalvesProjectedSize) {
  // Edge 0.1 m right of the axis: f * 0.1 / Z pixels from the principal point.
  const StereoRig rig = default_sim_rig();
  const int cx = static_cast<int>(rig.left.cx), cy = static_cast<int>(rig.left.cy);
  const IntensityImage near = render_intensity(step_scene(1.0, 0.1), SE3::identity(), rig.left);
  const IntensityImage far = render_intensity(step_scene(2.0, 0.1), SE3::identity(), rig.left);
  EXPECT_LT(near.at(cx + 17, cy), near.at(cx + 23, cy));  // edge at +20 px
  EXPECT_LT(far.at(cx + 7, cy), far.at(cx + 13, cy));     // edge at +10 px
  EXPECT_DOUBLE_EQ(near.at(cx + 7, cy), near.at(cx + 17, cy));
}

TEST(Scene, LookingAwaySeesBackground) {
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::three_planes();
  const IntensityImage img =
      render_intensity(scene, SE3::from_axis_angle(Eigen::Vector3d::UnitY(), M_PI), rig.left);
  for (double v : img.values) EXPECT_DOUBLE_EQ(v, scene.background);
}

TEST(Scene, CameraInsidePlane) {
  const StereoRig rig = default_sim_rig();
  EXPECT_EQ(error_code_of([&] {
              render_intensity(step_scene(2.0, 0.0), SE3::from_translation({0, 0, 2.0}), rig.left);
            }),
            ErrorCode::kCameraInsidePlane);
}

TEST(GroundTruth, InverseDepthExamples) {
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::single_plane(2.0, TexturePattern::kRandomCells, 0.1);
  EXPECT_NEAR(*ground_truth_inverse_depth(scene, {}, rig.left, {13, 77}), 0.5, 1e-12);
  EXPECT_NEAR(*ground_truth_inverse_depth(scene, SE3::from_translation({0, 0, 0.5}), rig.left, {100, 60}), 1 / 1.5,
              1e-12);
  EXPECT_FALSE(ground_truth_inverse_depth(scene, SE3::from_axis_angle(Eigen::Vector3d::UnitY(), M_PI), rig.left,
                                          {100, 60})
                   .has_value());
}

TEST(Simulate, StaticTrajectoryIsSilent) {
  SimTrajectory traj;
  traj.duration = 0.2;
  traj.linear_speed = 0.0;
  const SimulationOutput out = simulate_events(SceneConfig::three_planes(), traj, default_sim_rig());
  EXPECT_TRUE(out.left.empty());
  EXPECT_TRUE(out.right.empty());
  EXPECT_EQ(out.ground_truth.size(), 201u);
}

TEST(Simulate, StepEdgeFiresOncePerLevel) {
  // Dark (0.2) | bright (0.8) edge moving right by 30 px/s at 2 m, 12 px in
  // total: pixels it sweeps go bright -> dark and pass the log levels
  // -0.3, -0.6, ..., -1.5 once each.
  const StereoRig rig = default_sim_rig();
  SimTrajectory traj;
  traj.duration = 0.4;
  traj.linear_speed = -0.3;
  const SimulationOutput out = simulate_events(step_scene(2.0, 0.0), traj, rig);
  const int cx = static_cast<int>(rig.left.cx), cy = static_cast<int>(rig.left.cy);
  const int expected = static_cast<int>(std::floor(std::log(0.8) / 0.3) - std::floor(std::log(0.2) / 0.3));
  ASSERT_EQ(expected, 5);
  const std::vector<int> pos = counts(out.left, rig.left, 1);
  const std::vector<int> neg = counts(out.left, rig.left, -1);
  const auto at = [&](const std::vector<int>& c, int x) { return c[static_cast<std::size_t>(cy) * rig.left.width + x]; };
  for (int x = cx + 2; x <= cx + 10; ++x) {
    EXPECT_EQ(at(neg, x), expected) << "x = " << x;
    EXPECT_EQ(at(pos, x), 0) << "x = " << x;
  }
  for (int x = cx - 10; x <= cx - 2; ++x) EXPECT_EQ(at(neg, x) + at(pos, x), 0) << "x = " << x;
  for (int x = cx + 15; x <= cx + 25; ++x) EXPECT_EQ(at(neg, x) + at(pos, x), 0) << "x = " << x;
}

TEST(Simulate, StreamsAreSortedAndInBounds) {
  SimTrajectory traj;
  traj.duration = 0.2;
  SimulationOptions options;
  options.timestamp_jitter = 0.001;
  options.seed = 5;
  const StereoRig rig = default_sim_rig();
  const SimulationOutput out = simulate_events(SceneConfig::three_planes(), traj, rig, options);
  ASSERT_FALSE(out.left.empty());
  for (const auto* stream : {&out.left, &out.right}) {
    EXPECT_TRUE(std::is_sorted(stream->begin(), stream->end(),
                               [](const Event& a, const Event& b) { return a.t < b.t; }));
    for (const Event& e : *stream) {
      ASSERT_LT(e.x, rig.left.width);
      ASSERT_LT(e.y, rig.left.height);
    }
  }
}

TEST(Simulate, MirroredTrajectoryFlipsPolarities) {
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::three_planes();
  SimTrajectory fwd;
  fwd.duration = 0.3;
  SimTrajectory back = fwd;
  back.reversed = true;
  const SimulationOutput a = simulate_events(scene, fwd, rig);
  const SimulationOutput b = simulate_events(scene, back, rig);
  ASSERT_FALSE(a.left.empty());
  EXPECT_EQ(counts(a.left, rig.left, 1), counts(b.left, rig.left, -1));
  EXPECT_EQ(counts(a.left, rig.left, -1), counts(b.left, rig.left, 1));
}

TEST(Simulate, EventCountScalesWithSpeed) {
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::three_planes();
  SimTrajectory slow;
  slow.duration = 0.4;
  slow.linear_speed = 0.2;
  SimTrajectory fast = slow;
  fast.linear_speed = 0.4;
  const double n_slow = static_cast<double>(simulate_events(scene, slow, rig).left.size());
  const double n_fast = static_cast<double>(simulate_events(scene, fast, rig).left.size());
  EXPECT_NEAR(n_fast / n_slow, 2.0, 0.2);
}

TEST(Simulate, RightStreamIsDisparityShiftedLeftStream) {
  // Fronto-parallel plane at 2 m: disparity f * b / Z = 15 px everywhere.
  const StereoRig rig = default_sim_rig();
  const SceneConfig scene = SceneConfig::single_plane(2.0, TexturePattern::kRandomCells, 0.1);
  SimTrajectory traj;
  traj.duration = 0.3;
  const SimulationOutput out = simulate_events(scene, traj, rig);
  const int d = static_cast<int>(std::lround(rig.left.fx * rig.baseline() / 2.0));
  ASSERT_EQ(d, 15);
  const std::vector<int> l = counts(out.left, rig.left, 1);
  const std::vector<int> r = counts(out.right, rig.right, 1);
  int compared = 0, equal = 0;
  for (int y = 0; y < rig.left.height; ++y)
    for (int x = d + 10; x < rig.left.width - 10; ++x) {
      const std::size_t il = static_cast<std::size_t>(y) * rig.left.width + x;
      const std::size_t ir = static_cast<std::size_t>(y) * rig.left.width + (x - d);
      if (l[il] == 0 && r[ir] == 0) continue;
      ++compared;
      if (l[il] == r[ir]) ++equal;
    }
  ASSERT_GT(compared, 1000);
  EXPECT_GE(equal, 0.99 * compared);
}

TEST(Simulate, GroundTruthDepthMapsAtRequestedTimes) {
  SimTrajectory traj;
  traj.duration = 0.2;
  SimulationOptions options;
  options.depth_sample_times = {0.1, 0.2};
  const StereoRig rig = default_sim_rig();
  const SimulationOutput out =
      simulate_events(SceneConfig::single_plane(2.0, TexturePattern::kRandomCells, 0.1), traj, rig, options);
  ASSERT_EQ(out.ground_truth_inverse_depth.size(), 2u);
  EXPECT_DOUBLE_EQ(out.ground_truth_inverse_depth[1].t, 0.2);
  EXPECT_NEAR(out.ground_truth_inverse_depth[0].at(100, 80), 0.5, 1e-12);
}

TEST(Simulate, FrameRateTooLow) {
  SimTrajectory traj;
  traj.duration = 0.1;
  traj.linear_speed = 20.0;  // 2000 px/s at 2 m
  SimulationOptions options;
  options.frame_rate = 1000.0;
  EXPECT_EQ(error_code_of([&] {
              simulate_events(SceneConfig::single_plane(2.0, TexturePattern::kRandomCells, 0.1), traj,
                              default_sim_rig(), options);
            }),
            ErrorCode::kFrameRateTooLow);
}

TEST(Motion, ParseNames) {
  for (auto m : {MotionPrimitive::kTranslateX, MotionPrimitive::kTranslateY, MotionPrimitive::kTranslateZ,
                 MotionPrimitive::kRotateZ, MotionPrimitive::kGeneral})
    EXPECT_EQ(parse_motion(to_string(m)), m);
  EXPECT_THROW(parse_motion("wobble"), Error);
}

}  // namespace
}  // namespace esvo
