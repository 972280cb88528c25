#pragma once

// Scenario files and the built-in scene suites.
//
// A scenario is a JSON document:
//
//   {
//     "name": "meadow",
//     "camera":    {"focal_length_px": 150, "width": 160, "height": 120,
//                   "principal_x": 80, "principal_y": 60},          (principal point optional)
//     "plane":     {"slope_a": 0, "slope_b": 0, "base_height_offset": 0,
//                   "material": "grass"},
//     "materials": [{"name": "grass", "base_color": [0.2, 0.5, 0.2],
//                    "noise_amplitude": 0.1, "noise_scale": 20,
//                    "stripe_amplitude": 0, "stripe_frequency": 0,
//                    "stripe_orientation": 0}],
//     "obstacles": [{"center": [4, 0], "extent": [1, 1], "height": 0.9,
//                    "material": "crate"}],
//     "trajectory": {"waypoints": [[0, 0], [15, 0]], "height": 3,
//                    "speed": 0.6, "frame_rate": 20, "max_frames": 500,
//                    "angular_rates": [0, 0, 0]},
//     "noise":     {"flow_sigma": 0.00067, "corner_budget": 100,
//                   "sampling": "uniform"},
//     "seed": 7
//   }
//
// Lengths are meters, angles radians, rates rad/s. Materials are referenced
// by name. "noise.flow_sigma" may be replaced by
// "noise.sigma_obstacle_height": the flow noise is then the excess flow of
// an obstacle that tall at the trajectory height and speed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowssl/flowsim.hpp"

namespace flowssl::scenario {

struct Trajectory {
  std::vector<flowsim::Waypoint> waypoints;
  double height = 3.0;
  double speed = 0.6;
  double frame_rate = 20.0;
  int max_frames = 0;  // 0 = whole path
  flowsim::AngularRates rates;
};

struct ScenarioSpec {
  std::string name = "scene";
  flowsim::CameraIntrinsics camera;
  flowsim::Scene scene;
  Trajectory trajectory;
  flowsim::FlowSamplingConfig flow;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<flowsim::EgoState> states() const;
};

ScenarioSpec parse_scenario(const std::string& json_text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioSpec& spec);

/// Nine scenes with distinct ground/obstacle materials along a straight
/// 15 m flight at 3 m, 0.6 m/s.
std::vector<ScenarioSpec> evaluation_suite(std::uint64_t seed);

/// Two-material scene (mottled grey floor, dark boxes) used for holdout and
/// as the familiar environment of the shift test.
ScenarioSpec familiar_scene(std::uint64_t seed);

/// Same layout idea with unseen materials (brown carpet, green boxes).
ScenarioSpec unfamiliar_scene(std::uint64_t seed);

/// Level ground with one box; used by the threshold-separation study.
ScenarioSpec single_box_scene(double height, std::uint64_t seed);

}  // namespace flowssl::scenario
