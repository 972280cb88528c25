#include <doctest.h>

#include <cmath>

#include "flowssl/errors.hpp"
#include "flowssl/flowsim.hpp"

using namespace flowssl;
using namespace flowssl::flowsim;

namespace {

Scene flat_scene() {
  Scene s;
  Material ground;
  ground.name = "ground";
  ground.base_color = {0.3, 0.6, 0.2};
  Material box;
  box.name = "box";
  box.base_color = {0.9, 0.1, 0.1};
  s.materials = {ground, box};
  return s;
}

EgoState level(double h, double vx, double vy = 0.0, double vz = 0.0) {
  EgoState e;
  e.height = h;
  e.velocity = {vx, vy, vz};
  return e;
}

FlowSamplingConfig budget(int n, double sigma = 0.0) {
  FlowSamplingConfig c;
  c.corner_budget = n;
  c.noise_sigma = sigma;
  return c;
}

}  // namespace

TEST_CASE("level plane lateral flight gives a constant flow field") {
  const auto obs = observe_flow(flat_scene(), CameraIntrinsics{}, level(3.0, 0.6), budget(100), 1);
  REQUIRE(obs.records.size() == 100);
  for (const auto& r : obs.records) {
    CHECK(r.u == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(std::abs(r.v) < 1e-12);
    CHECK(r.depth_truth == doctest::Approx(3.0));
    CHECK_FALSE(r.on_obstacle_truth);
  }
}

TEST_CASE("box top flow exceeds ground flow by the height ratio") {
  auto scene = flat_scene();
  BoxObstacle b;
  b.extent_x = 1.0;
  b.extent_y = 1.0;
  b.height = 0.9;
  b.material_id = 1;
  scene.obstacles = {b};
  const auto obs = observe_flow(scene, CameraIntrinsics{}, level(2.0, 0.6), budget(200), 3);
  int on_box = 0;
  for (const auto& r : obs.records) {
    if (r.on_obstacle_truth) {
      ++on_box;
      CHECK(std::abs(r.u) == doctest::Approx(0.6 / 1.1).epsilon(1e-12));
      CHECK(r.depth_truth == doctest::Approx(1.1));
    } else {
      CHECK(std::abs(r.u) == doctest::Approx(0.3).epsilon(1e-12));
    }
  }
  CHECK(on_box > 0);
  CHECK(on_box < 200);
}

TEST_CASE("descent along the optical axis gives a radial field") {
  const auto obs = observe_flow(flat_scene(), CameraIntrinsics{}, level(2.0, 0.0, 0.0, 0.5), budget(50), 5);
  for (const auto& r : obs.records) {
    CHECK(r.u == doctest::Approx(0.25 * r.x).epsilon(1e-12));
    CHECK(r.v == doctest::Approx(0.25 * r.y).epsilon(1e-12));
  }
}

TEST_CASE("noise-free sloped planes satisfy the planar flow equations") {
  auto scene = flat_scene();
  scene.plane.slope_a = 0.15;
  scene.plane.slope_b = -0.1;
  auto ego = level(2.5, 0.4, -0.3, 0.2);
  const auto obs = observe_flow(scene, CameraIntrinsics{}, ego, budget(100), 11);
  const double a = 0.15, b = -0.1;
  const double tx = 0.4 / 2.5, ty = -0.3 / 2.5, tz = 0.2 / 2.5;
  for (const auto& r : obs.records) {
    const double x = r.x, y = r.y;
    const double u = -tx + (tx * a + tz) * x + tx * b * y - a * tz * x * x - b * tz * x * y;
    const double v = -ty + ty * a * x + (ty * b + tz) * y - b * tz * y * y - a * tz * x * y;
    CHECK(std::abs(r.u - u) < 1e-12);
    CHECK(std::abs(r.v - v) < 1e-12);
    // Depth follows the plane model; on the downhill side it exceeds h.
    CHECK(r.depth_truth == doctest::Approx(2.5 / (1.0 - a * x - b * y)).epsilon(1e-12));
  }
}

TEST_CASE("no feature lies deeper than the height over level ground") {
  auto scene = flat_scene();
  BoxObstacle b;
  b.center_x = 0.3;
  b.height = 0.5;
  b.material_id = 1;
  scene.obstacles = {b};
  const auto obs = observe_flow(scene, CameraIntrinsics{}, level(3.0, 0.6), budget(300), 9);
  for (const auto& r : obs.records) CHECK(r.depth_truth <= 3.0 + 1e-12);
}

TEST_CASE("noise-free flow is linear in the velocity") {
  auto scene = flat_scene();
  scene.plane.slope_a = 0.05;
  const auto e1 = level(3.0, 0.3, 0.2, 0.1);
  auto e2 = e1;
  e2.velocity = {0.3 * 2.5, 0.2 * 2.5, 0.1 * 2.5};
  const auto o1 = observe_flow(scene, CameraIntrinsics{}, e1, budget(60), 4);
  const auto o2 = observe_flow(scene, CameraIntrinsics{}, e2, budget(60), 4);
  REQUIRE(o1.records.size() == o2.records.size());
  for (std::size_t i = 0; i < o1.records.size(); ++i) {
    CHECK(o2.records[i].u == doctest::Approx(2.5 * o1.records[i].u).epsilon(1e-12));
    CHECK(o2.records[i].v == doctest::Approx(2.5 * o1.records[i].v).epsilon(1e-12));
  }
}

TEST_CASE("observations and images are deterministic per seed") {
  auto scene = flat_scene();
  const auto ego = level(3.0, 0.6);
  const auto a = observe_flow(scene, CameraIntrinsics{}, ego, budget(40, 0.01), 77);
  const auto b = observe_flow(scene, CameraIntrinsics{}, ego, budget(40, 0.01), 77);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].u == b.records[i].u);
    CHECK(a.records[i].x == b.records[i].x);
  }
  CHECK(render_view(scene, CameraIntrinsics{}, ego, 5) == render_view(scene, CameraIntrinsics{}, ego, 5));
}

TEST_CASE("flow noise has the configured spread") {
  const double sigma = 0.01;
  const auto obs = observe_flow(flat_scene(), CameraIntrinsics{}, level(3.0, 0.6), budget(2000, sigma), 8);
  double s2 = 0.0;
  for (const auto& r : obs.records) s2 += (r.u + 0.2) * (r.u + 0.2) + r.v * r.v;
  const double est = std::sqrt(s2 / (2.0 * obs.records.size()));
  CHECK(est == doctest::Approx(sigma).epsilon(0.05));
}

TEST_CASE("single-material level scene renders its texture field") {
  auto scene = flat_scene();
  CameraIntrinsics cam;
  const auto ego = level(3.0, 0.0);
  const auto img = render_view(scene, cam, ego, 21);
  for (int row : {0, 37, 119}) {
    for (int col : {0, 80, 159}) {
      const double x = cam.normalized_x(col + 0.5), y = cam.normalized_y(row + 0.5);
      const auto hit = cast_ray(scene, ego, x, y);
      REQUIRE(hit);
      const auto c = texture_color(scene.materials[0], 0, hit->world_x, hit->world_y, 21);
      CHECK(img.at(col, row, 0) == c.r);
      CHECK(img.at(col, row, 1) == c.g);
      CHECK(img.at(col, row, 2) == c.b);
    }
  }
}

TEST_CASE("box under the camera covers the image center, ground the corners") {
  auto scene = flat_scene();
  BoxObstacle b;
  b.extent_x = 0.8;
  b.extent_y = 0.8;
  b.height = 0.5;
  b.material_id = 1;
  scene.obstacles = {b};
  CameraIntrinsics cam;
  const auto ego = level(2.0, 0.0);
  const auto img = render_view(scene, cam, ego, 2);
  const auto labels = surface_labels(scene, cam, ego);
  struct Px { int col, row, label; };
  for (const Px p : {Px{80, 60, 0}, Px{75, 55, 0}, Px{0, 0, -1}, Px{159, 119, -1}, Px{159, 0, -1}}) {
    const double x = cam.normalized_x(p.col + 0.5), y = cam.normalized_y(p.row + 0.5);
    const auto hit = cast_ray(scene, ego, x, y);
    REQUIRE(hit);
    CHECK(hit->obstacle_index == p.label);
    CHECK(labels[static_cast<std::size_t>(p.row) * cam.width + p.col] == p.label);
    const auto c = texture_color(scene.materials[hit->material_id], hit->material_id,
                                 hit->world_x, hit->world_y, 2);
    CHECK(img.at(p.col, p.row, 0) == c.r);
  }
  CHECK(cast_ray(scene, ego, 0.0, 0.0)->depth == doctest::Approx(1.5));
}

TEST_CASE("texture values stay inside the unit interval") {
  Material m;
  m.base_color = {0.95, 0.05, 0.5};
  m.noise_amplitude = 0.5;
  m.stripe_amplitude = 0.5;
  m.stripe_frequency = 3.0;
  for (int i = 0; i < 200; ++i) {
    const auto c = texture_color(m, 0, 0.37 * i, -0.11 * i, 4);
    for (double v : {c.r, c.g, c.b}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("straight scan path sampling") {
  const auto states = scan_trajectory({{0, 0}, {6, 0}}, 3.0, 0.6, 30.0);
  REQUIRE(states.size() == 301);
  for (std::size_t i = 1; i < states.size(); ++i) {
    CHECK(states[i].x - states[i - 1].x == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(states[i].height == 3.0);
  }
}

TEST_CASE("L-shaped path switches direction at the corner state") {
  const auto states = scan_trajectory({{0, 0}, {1.2, 0}, {1.2, 1.2}}, 3.0, 0.6, 10.0);
  // 1.2 m at 0.06 m per frame: the corner is state 20.
  REQUIRE(states.size() == 41);
  CHECK(states[19].velocity.x == doctest::Approx(0.6));
  CHECK(states[20].x == doctest::Approx(1.2));
  CHECK(states[20].velocity.x == doctest::Approx(0.0));
  CHECK(states[20].velocity.y == doctest::Approx(0.6));
}

TEST_CASE("finite differences of positions match velocities") {
  const double fps = 25.0;
  const auto states = scan_trajectory({{0, 0}, {2, 1}, {-1, 3}}, 2.0, 0.8, fps);
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    // Skip steps that straddle a corner.
    const double dx = (states[i + 1].x - states[i].x) * fps;
    const double dy = (states[i + 1].y - states[i].y) * fps;
    if (std::abs(dx - states[i].velocity.x) > 1e-6 && i > 0) continue;
    CHECK(std::abs(dx - states[i].velocity.x) < 1e-9);
    CHECK(std::abs(dy - states[i].velocity.y) < 1e-9);
  }
}

TEST_CASE("invalid inputs are rejected") {
  CameraIntrinsics small;
  small.width = 32;
  CHECK_THROWS_AS(small.validate(), InvalidArgument);
  CHECK_THROWS_AS(observe_flow(flat_scene(), CameraIntrinsics{}, level(3.0, 0.6), budget(5), 1),
                  InvalidArgument);
  CHECK_THROWS_AS(scan_trajectory({{0, 0}, {0, 0}}, 3.0, 0.6, 30.0), InvalidArgument);
  auto scene = flat_scene();
  scene.plane.slope_a = 1.5;
  CHECK_THROWS_AS(scene.validate(), InvalidArgument);
  auto tall = flat_scene();
  BoxObstacle b;
  b.height = 4.0;
  tall.obstacles = {b};
  CHECK_THROWS_AS(observe_flow(tall, CameraIntrinsics{}, level(3.0, 0.6), budget(20), 1),
                  InvalidArgument);
}
