#pragma once

// Synthetic world for the flow/appearance pipeline: a nadir pinhole camera
// over a (possibly sloped) textured ground plane with box obstacles.
//
// Frames and sign conventions
//   * World X, Y are horizontal; elevation is measured upward.
//   * The camera looks straight down. Its optical axis (depth) points at
//     the ground, image x is aligned with world X and image y with world Y.
//   * Normalized image coordinates are pixel offsets from the principal
//     point divided by the focal length in pixels.
//   * EgoState::velocity.z is the velocity along the optical axis, i.e.
//     positive when descending toward the ground. With this convention a
//     noise-free level plane yields u = -Vx/h + (Vz/h) x.
//   * Flow is expressed as a rate of normalized coordinates (1/s).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowssl::flowsim {

struct CameraIntrinsics {
  double focal_length_px = 150.0;
  int width = 160;
  int height = 120;
  std::optional<double> principal_x;  // pixels, defaults to width / 2
  std::optional<double> principal_y;  // pixels, defaults to height / 2

  double cx() const { return principal_x.value_or(0.5 * width); }
  double cy() const { return principal_y.value_or(0.5 * height); }

  // Throws InvalidArgument on f <= 0 or an image smaller than 64x64.
  void validate() const;

  // Normalized coordinates of a (continuous) pixel position.
  double normalized_x(double px) const { return (px - cx()) / focal_length_px; }
  double normalized_y(double py) const { return (py - cy()) / focal_length_px; }
};

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Procedural texture: base color + value noise + stripes, per material.
struct Material {
  std::string name;
  Rgb base_color{0.5, 0.5, 0.5};
  double noise_amplitude = 0.1;   // in [0,1]
  double noise_scale = 20.0;      // lattice cells per meter
  double stripe_amplitude = 0.0;  // in [0,1]
  double stripe_frequency = 0.0;  // cycles per meter
  double stripe_orientation = 0.0;  // radians

  void validate() const;
};

/// Ground elevation(X, Y) = base_height_offset - slope_a X - slope_b Y.
/// This orientation makes the depth below a camera at height h grow as
/// h + a dX + b dY, which is the planar model of the flow equations.
struct ScenePlane {
  double slope_a = 0.0;
  double slope_b = 0.0;
  double base_height_offset = 0.0;
  int material_id = 0;

  double elevation(double x, double y) const {
    return base_height_offset - slope_a * x - slope_b * y;
  }
  void validate() const;
};

/// Axis-aligned box standing on the plane; its top is flat at
/// plane elevation(center) + height.
struct BoxObstacle {
  double center_x = 0.0, center_y = 0.0;
  double extent_x = 1.0, extent_y = 1.0;  // full side lengths, meters
  double height = 0.5;
  int material_id = 0;

  void validate() const;
};

struct Scene {
  ScenePlane plane;
  std::vector<Material> materials;
  std::vector<BoxObstacle> obstacles;

  double max_obstacle_height() const;
  // Checks component invariants and material references.
  void validate() const;
};

struct Velocity {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct AngularRates {
  double p = 0.0, q = 0.0, r = 0.0;
  AngularRates operator+(const AngularRates& o) const { return {p + o.p, q + o.q, r + o.r}; }
  AngularRates operator-(const AngularRates& o) const { return {p - o.p, q - o.q, r - o.r}; }
};

struct EgoState {
  double x = 0.0, y = 0.0;
  double height = 3.0;  // above the ground plane at the nadir point
  Velocity velocity;
  AngularRates rates;
};

struct FlowRecord {
  double x = 0.0, y = 0.0;  // normalized image coordinates
  double u = 0.0, v = 0.0;  // normalized flow, 1/s
  double depth_truth = 0.0;
  bool on_obstacle_truth = false;
};

struct FlowObservation {
  std::int64_t frame_id = 0;
  EgoState ego;
  std::vector<FlowRecord> records;
};

/// Row-major three-channel image with values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height) : width_(width), height_(height),
      data_(static_cast<std::size_t>(width) * height * 3, 0.0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int col, int row, int channel) const {
    return data_[index(col, row, channel)];
  }
  double& at(int col, int row, int channel) { return data_[index(col, row, channel)]; }
  void set(int col, int row, const Rgb& c) {
    auto i = index(col, row, 0);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int col, int row, int channel) const {
    return (static_cast<std::size_t>(row) * width_ + col) * 3 + channel;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// First surface along the ray through a normalized image point.
struct SurfaceHit {
  double depth = 0.0;  // along the optical axis
  double world_x = 0.0, world_y = 0.0;
  int material_id = 0;
  int obstacle_index = -1;  // -1 for the ground plane
};

std::optional<SurfaceHit> cast_ray(const Scene& scene, const EgoState& ego, double x,
                                   double y);

/// Texture value of a material at a world location. Deterministic in
/// (material, material_id, world position, seed), clamped to [0,1].
Rgb texture_color(const Material& material, int material_id, double world_x,
                  double world_y, std::uint64_t seed);

/// Translational + rotational motion field at a point of known depth.
std::array<double, 2> motion_field(const EgoState& ego, double x, double y, double depth);

/// Rotational (depth-independent) part of the motion field.
std::array<double, 2> rotational_flow(const AngularRates& rates, double x, double y);

Image render_view(const Scene& scene, const CameraIntrinsics& camera, const EgoState& ego,
                  std::uint64_t seed);

/// Per-pixel obstacle index (-1 ground, -2 no surface), row-major.
std::vector<int> surface_labels(const Scene& scene, const CameraIntrinsics& camera,
                                const EgoState& ego);

enum class FeatureSampling { uniform, texture_weighted };

struct FlowSamplingConfig {
  int corner_budget = 100;
  double noise_sigma = 0.0;
  FeatureSampling sampling = FeatureSampling::uniform;
  // Only used by texture_weighted: luminance gradient (per pixel) that is
  // accepted with probability one.
  double gradient_reference = 0.05;
};

inline constexpr int kMinCornerBudget = 10;

FlowObservation observe_flow(const Scene& scene, const CameraIntrinsics& camera,
                             const EgoState& ego, const FlowSamplingConfig& config,
                             std::uint64_t seed, std::int64_t frame_id = 0);

struct Waypoint {
  double x = 0.0, y = 0.0;
};

/// Constant-height, constant-speed piecewise-linear flight sampled at
/// frame_rate. A sample that falls exactly on a corner already carries the
/// direction of the next leg.
std::vector<EgoState> scan_trajectory(const std::vector<Waypoint>& waypoints, double height,
                                      double speed, double frame_rate);

}  // namespace flowssl::flowsim
