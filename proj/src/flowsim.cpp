#include "flowssl/flowsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "flowssl/errors.hpp"
#include "flowssl/seed.hpp"

namespace flowssl::flowsim {

namespace {

bool finite(double v) { return std::isfinite(v); }

double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t key) {
  std::uint64_t h = mix64(key ^ static_cast<std::uint64_t>(ix));
  h = mix64(h ^ (static_cast<std::uint64_t>(iy) * 0x9e3779b97f4a7c15ULL));
  return unit_interval(h);
}

double value_noise(double gx, double gy, std::uint64_t key) {
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx0);
  const auto iy = static_cast<std::int64_t>(fy0);
  const double tx = gx - fx0;
  const double ty = gy - fy0;
  const double sx = tx * tx * (3.0 - 2.0 * tx);
  const double sy = ty * ty * (3.0 - 2.0 * ty);
  const double v00 = lattice_value(ix, iy, key);
  const double v10 = lattice_value(ix + 1, iy, key);
  const double v01 = lattice_value(ix, iy + 1, key);
  const double v11 = lattice_value(ix + 1, iy + 1, key);
  const double a = v00 + sx * (v10 - v00);
  const double b = v01 + sx * (v11 - v01);
  return a + sy * (b - a);
}

double luminance(const Rgb& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

void check_ego(const Scene& scene, const EgoState& ego) {
  if (!(ego.height > 0.0) || !finite(ego.height)) {
    throw InvalidArgument("ego height must be positive");
  }
  if (!finite(ego.x) || !finite(ego.y) || !finite(ego.velocity.x) ||
      !finite(ego.velocity.y) || !finite(ego.velocity.z) || !finite(ego.rates.p) ||
      !finite(ego.rates.q) || !finite(ego.rates.r)) {
    throw InvalidArgument("ego state must be finite");
  }
  const double cam_alt = scene.plane.elevation(ego.x, ego.y) + ego.height;
  for (const auto& box : scene.obstacles) {
    const double top = scene.plane.elevation(box.center_x, box.center_y) + box.height;
    if (top >= cam_alt) {
      throw InvalidArgument("camera must be above every obstacle top");
    }
  }
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(focal_length_px > 0.0) || !finite(focal_length_px)) {
    throw InvalidArgument("focal length must be positive");
  }
  if (width < 64 || height < 64) {
    throw InvalidArgument("image must be at least 64x64 pixels");
  }
}

void Material::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(base_color.r) || !in_unit(base_color.g) || !in_unit(base_color.b)) {
    throw InvalidArgument("material '" + name + "': base color outside [0,1]");
  }
  if (!in_unit(noise_amplitude) || !in_unit(stripe_amplitude)) {
    throw InvalidArgument("material '" + name + "': amplitudes must lie in [0,1]");
  }
  if (!(noise_scale > 0.0) || !(stripe_frequency >= 0.0) || !finite(stripe_orientation)) {
    throw InvalidArgument("material '" + name + "': invalid noise or stripe parameters");
  }
}

void ScenePlane::validate() const {
  if (!(std::abs(slope_a) < 1.0) || !(std::abs(slope_b) < 1.0)) {
    throw InvalidArgument("plane slopes must satisfy |a|, |b| < 1");
  }
  if (!finite(base_height_offset)) throw InvalidArgument("plane offset must be finite");
}

void BoxObstacle::validate() const {
  if (!(height > 0.0) || !(extent_x > 0.0) || !(extent_y > 0.0)) {
    throw InvalidArgument("obstacle height and extents must be positive");
  }
  if (!finite(center_x) || !finite(center_y)) {
    throw InvalidArgument("obstacle center must be finite");
  }
}

double Scene::max_obstacle_height() const {
  double h = 0.0;
  for (const auto& b : obstacles) h = std::max(h, b.height);
  return h;
}

void Scene::validate() const {
  plane.validate();
  const auto n = static_cast<int>(materials.size());
  for (const auto& m : materials) m.validate();
  if (plane.material_id < 0 || plane.material_id >= n) {
    throw InvalidArgument("plane references an unknown material");
  }
  for (const auto& b : obstacles) {
    b.validate();
    if (b.material_id < 0 || b.material_id >= n) {
      throw InvalidArgument("obstacle references an unknown material");
    }
  }
}

std::optional<SurfaceHit> cast_ray(const Scene& scene, const EgoState& ego, double x,
                                   double y) {
  const auto& plane = scene.plane;
  const double cam_alt = plane.elevation(ego.x, ego.y) + ego.height;

  std::optional<SurfaceHit> best;
  const double denom = 1.0 - plane.slope_a * x - plane.slope_b * y;
  double t_plane = std::numeric_limits<double>::infinity();
  if (denom > 1e-9) {
    t_plane = ego.height / denom;
    best = SurfaceHit{t_plane, ego.x + x * t_plane, ego.y + y * t_plane, plane.material_id, -1};
  }

  for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
    const auto& box = scene.obstacles[i];
    const double top = plane.elevation(box.center_x, box.center_y) + box.height;
    const double t = cam_alt - top;
    if (!(t > 0.0) || t >= t_plane) continue;
    if (best && t >= best->depth) continue;
    const double wx = ego.x + x * t;
    const double wy = ego.y + y * t;
    if (std::abs(wx - box.center_x) <= 0.5 * box.extent_x &&
        std::abs(wy - box.center_y) <= 0.5 * box.extent_y) {
      best = SurfaceHit{t, wx, wy, box.material_id, static_cast<int>(i)};
    }
  }
  return best;
}

Rgb texture_color(const Material& material, int material_id, double world_x, double world_y,
                  std::uint64_t seed) {
  const std::uint64_t key = derive_seed(seed, "texture", static_cast<std::uint64_t>(material_id));
  const double n = value_noise(world_x * material.noise_scale, world_y * material.noise_scale, key);
  double offset = material.noise_amplitude * (2.0 * n - 1.0);
  if (material.stripe_amplitude > 0.0 && material.stripe_frequency > 0.0) {
    const double along = world_x * std::cos(material.stripe_orientation) +
                         world_y * std::sin(material.stripe_orientation);
    offset += material.stripe_amplitude *
              std::sin(2.0 * std::numbers::pi * material.stripe_frequency * along);
  }
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {clamp01(material.base_color.r + offset), clamp01(material.base_color.g + offset),
          clamp01(material.base_color.b + offset)};
}

std::array<double, 2> rotational_flow(const AngularRates& w, double x, double y) {
  return {x * y * w.p - (1.0 + x * x) * w.q + y * w.r,
          (1.0 + y * y) * w.p - x * y * w.q - x * w.r};
}

std::array<double, 2> motion_field(const EgoState& ego, double x, double y, double depth) {
  const auto& v = ego.velocity;
  const auto rot = rotational_flow(ego.rates, x, y);
  return {(-v.x + x * v.z) / depth + rot[0], (-v.y + y * v.z) / depth + rot[1]};
}

Image render_view(const Scene& scene, const CameraIntrinsics& camera, const EgoState& ego,
                  std::uint64_t seed) {
  camera.validate();
  check_ego(scene, ego);
  Image img(camera.width, camera.height);
  for (int row = 0; row < camera.height; ++row) {
    const double y = camera.normalized_y(row + 0.5);
    for (int col = 0; col < camera.width; ++col) {
      const double x = camera.normalized_x(col + 0.5);
      const auto hit = cast_ray(scene, ego, x, y);
      if (!hit) continue;
      const auto& mat = scene.materials.at(static_cast<std::size_t>(hit->material_id));
      img.set(col, row, texture_color(mat, hit->material_id, hit->world_x, hit->world_y, seed));
    }
  }
  return img;
}

std::vector<int> surface_labels(const Scene& scene, const CameraIntrinsics& camera,
                                const EgoState& ego) {
  camera.validate();
  std::vector<int> labels(static_cast<std::size_t>(camera.width) * camera.height, -2);
  for (int row = 0; row < camera.height; ++row) {
    const double y = camera.normalized_y(row + 0.5);
    for (int col = 0; col < camera.width; ++col) {
      const auto hit = cast_ray(scene, ego, camera.normalized_x(col + 0.5), y);
      if (hit) labels[static_cast<std::size_t>(row) * camera.width + col] = hit->obstacle_index;
    }
  }
  return labels;
}

FlowObservation observe_flow(const Scene& scene, const CameraIntrinsics& camera,
                             const EgoState& ego, const FlowSamplingConfig& config,
                             std::uint64_t seed, std::int64_t frame_id) {
  camera.validate();
  check_ego(scene, ego);
  if (config.corner_budget < kMinCornerBudget) {
    throw InvalidArgument("corner budget must be at least " + std::to_string(kMinCornerBudget));
  }
  if (!(config.noise_sigma >= 0.0) || !finite(config.noise_sigma)) {
    throw InvalidArgument("noise sigma must be finite and non-negative");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> px_dist(0.0, camera.width);
  std::uniform_real_distribution<double> py_dist(0.0, camera.height);
  std::uniform_real_distribution<double> accept_dist(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  auto lum_at = [&](double px, double py) {
    const auto hit = cast_ray(scene, ego, camera.normalized_x(px), camera.normalized_y(py));
    if (!hit) return 0.0;
    const auto& mat = scene.materials[static_cast<std::size_t>(hit->material_id)];
    return luminance(texture_color(mat, hit->material_id, hit->world_x, hit->world_y, seed));
  };

  FlowObservation obs;
  obs.frame_id = frame_id;
  obs.ego = ego;
  obs.records.reserve(static_cast<std::size_t>(config.corner_budget));
  const long max_attempts = 50L * config.corner_budget;
  for (long attempt = 0;
       attempt < max_attempts && static_cast<int>(obs.records.size()) < config.corner_budget;
       ++attempt) {
    const double px = px_dist(rng);
    const double py = py_dist(rng);
    const double x = camera.normalized_x(px);
    const double y = camera.normalized_y(py);
    const auto hit = cast_ray(scene, ego, x, y);
    if (!hit) continue;
    if (config.sampling == FeatureSampling::texture_weighted) {
      const double gx = 0.5 * (lum_at(px + 1.0, py) - lum_at(px - 1.0, py));
      const double gy = 0.5 * (lum_at(px, py + 1.0) - lum_at(px, py - 1.0));
      const double p = std::min(1.0, std::hypot(gx, gy) / config.gradient_reference);
      if (accept_dist(rng) >= p) continue;
    }
    const auto flow = motion_field(ego, x, y, hit->depth);
    FlowRecord rec;
    rec.x = x;
    rec.y = y;
    rec.u = flow[0] + config.noise_sigma * noise(rng);
    rec.v = flow[1] + config.noise_sigma * noise(rng);
    rec.depth_truth = hit->depth;
    rec.on_obstacle_truth = hit->obstacle_index >= 0;
    obs.records.push_back(rec);
  }
  if (obs.records.empty()) {
    throw DegenerateData("no visible surface in view");
  }
  return obs;
}

std::vector<EgoState> scan_trajectory(const std::vector<Waypoint>& waypoints, double height,
                                      double speed, double frame_rate) {
  if (waypoints.size() < 2) throw InvalidArgument("trajectory needs at least two waypoints");
  if (!(speed > 0.0) || !(frame_rate > 0.0) || !(height > 0.0)) {
    throw InvalidArgument("speed, frame rate and height must be positive");
  }

  struct Leg {
    Waypoint start;
    double dir_x, dir_y, begin, end;
  };
  std::vector<Leg> legs;
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double dx = waypoints[i].x - waypoints[i - 1].x;
    const double dy = waypoints[i].y - waypoints[i - 1].y;
    const double len = std::hypot(dx, dy);
    if (!(len > 1e-12)) throw InvalidArgument("consecutive waypoints coincide");
    legs.push_back({waypoints[i - 1], dx / len, dy / len, total, total + len});
    total += len;
  }

  const double step = speed / frame_rate;
  const auto count = static_cast<std::size_t>(std::floor(total / step + 1e-9)) + 1;
  std::vector<EgoState> states;
  states.reserve(count);
  std::size_t leg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double s = static_cast<double>(k) * step;
    while (leg + 1 < legs.size() && s >= legs[leg].end - 1e-9 * step) ++leg;
    const auto& l = legs[leg];
    EgoState st;
    st.x = l.start.x + l.dir_x * (s - l.begin);
    st.y = l.start.y + l.dir_y * (s - l.begin);
    st.height = height;
    st.velocity = {l.dir_x * speed, l.dir_y * speed, 0.0};
    states.push_back(st);
  }
  return states;
}

}  // namespace flowssl::flowsim
