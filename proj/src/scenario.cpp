#include "flowssl/scenario.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "flowssl/errors.hpp"
#include "flowssl/flowfit.hpp"
#include "flowssl/seed.hpp"

namespace flowssl::scenario {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

int material_index(const std::vector<flowsim::Material>& mats, const json& ref) {
  if (ref.is_number_integer()) {
    const int i = ref.get<int>();
    if (i < 0 || i >= static_cast<int>(mats.size())) throw ParseError("material index out of range");
    return i;
  }
  const auto name = ref.get<std::string>();
  for (std::size_t i = 0; i < mats.size(); ++i) {
    if (mats[i].name == name) return static_cast<int>(i);
  }
  throw ParseError("unknown material '" + name + "'");
}

flowsim::FeatureSampling parse_sampling(const std::string& s) {
  if (s == "uniform") return flowsim::FeatureSampling::uniform;
  if (s == "texture_weighted") return flowsim::FeatureSampling::texture_weighted;
  throw ParseError("unknown feature sampling '" + s + "'");
}

// Flow noise equal to the excess flow of an obstacle `dh` tall.
double sigma_for_obstacle_height(const Trajectory& t, double dh) {
  return flowfit::roughness_threshold({t.speed, t.height, dh, 1.0});
}

flowsim::Material material(std::string name, flowsim::Rgb color, double noise, double scale,
                           double stripe_amp = 0.0, double stripe_freq = 0.0,
                           double stripe_angle = 0.0) {
  flowsim::Material m;
  m.name = std::move(name);
  m.base_color = color;
  m.noise_amplitude = noise;
  m.noise_scale = scale;
  m.stripe_amplitude = stripe_amp;
  m.stripe_frequency = stripe_freq;
  m.stripe_orientation = stripe_angle;
  return m;
}

double jitter(std::uint64_t seed, std::string_view what, std::uint64_t i, double half_width) {
  const double u = static_cast<double>(derive_seed(seed, what, i) >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * half_width;
}

ScenarioSpec base_flight(std::string name, std::uint64_t seed) {
  ScenarioSpec s;
  s.name = std::move(name);
  s.seed = seed;
  s.trajectory.waypoints = {{0.0, 0.0}, {15.0, 0.0}};
  s.trajectory.height = 3.0;
  s.trajectory.speed = 0.6;
  s.trajectory.frame_rate = 20.0;
  s.trajectory.max_frames = 500;
  s.flow.corner_budget = 100;
  s.flow.noise_sigma = sigma_for_obstacle_height(s.trajectory, 0.01);
  return s;
}

void two_boxes(ScenarioSpec& s, int material_id, std::uint64_t layout_seed) {
  for (std::uint64_t i = 0; i < 2; ++i) {
    flowsim::BoxObstacle b;
    b.center_x = (i == 0 ? 4.0 : 10.5) + jitter(layout_seed, "box_x", i, 0.5);
    b.center_y = jitter(layout_seed, "box_y", i, 0.4);
    b.extent_x = 1.0 + jitter(layout_seed, "box_ex", i, 0.2);
    b.extent_y = 1.0 + jitter(layout_seed, "box_ey", i, 0.2);
    b.height = 0.9;
    b.material_id = material_id;
    s.scene.obstacles.push_back(b);
  }
}

}  // namespace

void ScenarioSpec::validate() const {
  camera.validate();
  scene.validate();
  if (trajectory.waypoints.size() < 2) throw InvalidArgument("trajectory needs two waypoints");
  if (!(trajectory.height > scene.max_obstacle_height())) {
    throw InvalidArgument("flight height must exceed every obstacle height");
  }
  if (flow.corner_budget < flowsim::kMinCornerBudget) {
    throw InvalidArgument("corner budget below minimum");
  }
  if (!(flow.noise_sigma >= 0.0)) throw InvalidArgument("flow noise must be non-negative");
  if (trajectory.max_frames < 0) throw InvalidArgument("max_frames must be >= 0");
}

std::vector<flowsim::EgoState> ScenarioSpec::states() const {
  auto st = flowsim::scan_trajectory(trajectory.waypoints, trajectory.height, trajectory.speed,
                                     trajectory.frame_rate);
  if (trajectory.max_frames > 0 && st.size() > static_cast<std::size_t>(trajectory.max_frames)) {
    st.resize(static_cast<std::size_t>(trajectory.max_frames));
  }
  for (auto& e : st) e.rates = trajectory.rates;
  return st;
}

ScenarioSpec parse_scenario(const std::string& text) {
  ScenarioSpec s;
  try {
    const json j = json::parse(text);
    s.name = get_or<std::string>(j, "name", "scene");
    s.seed = get_or<std::uint64_t>(j, "seed", 1);

    const auto& cam = j.at("camera");
    s.camera.focal_length_px = cam.at("focal_length_px").get<double>();
    s.camera.width = cam.at("width").get<int>();
    s.camera.height = cam.at("height").get<int>();
    if (cam.contains("principal_x")) s.camera.principal_x = cam.at("principal_x").get<double>();
    if (cam.contains("principal_y")) s.camera.principal_y = cam.at("principal_y").get<double>();

    for (const auto& m : j.at("materials")) {
      flowsim::Material mat;
      mat.name = m.at("name").get<std::string>();
      const auto c = m.at("base_color").get<std::vector<double>>();
      if (c.size() != 3) throw ParseError("base_color needs three channels");
      mat.base_color = {c[0], c[1], c[2]};
      mat.noise_amplitude = get_or(m, "noise_amplitude", mat.noise_amplitude);
      mat.noise_scale = get_or(m, "noise_scale", mat.noise_scale);
      mat.stripe_amplitude = get_or(m, "stripe_amplitude", mat.stripe_amplitude);
      mat.stripe_frequency = get_or(m, "stripe_frequency", mat.stripe_frequency);
      mat.stripe_orientation = get_or(m, "stripe_orientation", mat.stripe_orientation);
      s.scene.materials.push_back(mat);
    }

    const auto& pl = j.at("plane");
    s.scene.plane.slope_a = get_or(pl, "slope_a", 0.0);
    s.scene.plane.slope_b = get_or(pl, "slope_b", 0.0);
    s.scene.plane.base_height_offset = get_or(pl, "base_height_offset", 0.0);
    s.scene.plane.material_id = material_index(s.scene.materials, pl.at("material"));

    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) {
        flowsim::BoxObstacle b;
        const auto c = o.at("center").get<std::vector<double>>();
        const auto e = o.at("extent").get<std::vector<double>>();
        if (c.size() != 2 || e.size() != 2) throw ParseError("obstacle center/extent need two values");
        b.center_x = c[0];
        b.center_y = c[1];
        b.extent_x = e[0];
        b.extent_y = e[1];
        b.height = o.at("height").get<double>();
        b.material_id = material_index(s.scene.materials, o.at("material"));
        s.scene.obstacles.push_back(b);
      }
    }

    const auto& tr = j.at("trajectory");
    for (const auto& w : tr.at("waypoints")) {
      const auto p = w.get<std::vector<double>>();
      if (p.size() != 2) throw ParseError("waypoints need two coordinates");
      s.trajectory.waypoints.push_back({p[0], p[1]});
    }
    s.trajectory.height = tr.at("height").get<double>();
    s.trajectory.speed = tr.at("speed").get<double>();
    s.trajectory.frame_rate = tr.at("frame_rate").get<double>();
    s.trajectory.max_frames = get_or(tr, "max_frames", 0);
    if (tr.contains("angular_rates")) {
      const auto r = tr.at("angular_rates").get<std::vector<double>>();
      if (r.size() != 3) throw ParseError("angular_rates needs three values");
      s.trajectory.rates = {r[0], r[1], r[2]};
    }

    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.flow.corner_budget = get_or(n, "corner_budget", s.flow.corner_budget);
      s.flow.sampling = parse_sampling(get_or<std::string>(n, "sampling", "uniform"));
      s.flow.gradient_reference = get_or(n, "gradient_reference", s.flow.gradient_reference);
      if (n.contains("flow_sigma")) {
        s.flow.noise_sigma = n.at("flow_sigma").get<double>();
      } else if (n.contains("sigma_obstacle_height")) {
        s.flow.noise_sigma =
            sigma_for_obstacle_height(s.trajectory, n.at("sigma_obstacle_height").get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["camera"] = {{"focal_length_px", s.camera.focal_length_px},
                 {"width", s.camera.width},
                 {"height", s.camera.height},
                 {"principal_x", s.camera.cx()},
                 {"principal_y", s.camera.cy()}};
  j["materials"] = json::array();
  for (const auto& m : s.scene.materials) {
    j["materials"].push_back({{"name", m.name},
                              {"base_color", {m.base_color.r, m.base_color.g, m.base_color.b}},
                              {"noise_amplitude", m.noise_amplitude},
                              {"noise_scale", m.noise_scale},
                              {"stripe_amplitude", m.stripe_amplitude},
                              {"stripe_frequency", m.stripe_frequency},
                              {"stripe_orientation", m.stripe_orientation}});
  }
  j["plane"] = {{"slope_a", s.scene.plane.slope_a},
                {"slope_b", s.scene.plane.slope_b},
                {"base_height_offset", s.scene.plane.base_height_offset},
                {"material", s.scene.materials.at(static_cast<std::size_t>(s.scene.plane.material_id)).name}};
  j["obstacles"] = json::array();
  for (const auto& b : s.scene.obstacles) {
    j["obstacles"].push_back(
        {{"center", {b.center_x, b.center_y}},
         {"extent", {b.extent_x, b.extent_y}},
         {"height", b.height},
         {"material", s.scene.materials.at(static_cast<std::size_t>(b.material_id)).name}});
  }
  json wps = json::array();
  for (const auto& w : s.trajectory.waypoints) wps.push_back({w.x, w.y});
  j["trajectory"] = {{"waypoints", wps},
                     {"height", s.trajectory.height},
                     {"speed", s.trajectory.speed},
                     {"frame_rate", s.trajectory.frame_rate},
                     {"max_frames", s.trajectory.max_frames},
                     {"angular_rates", {s.trajectory.rates.p, s.trajectory.rates.q, s.trajectory.rates.r}}};
  j["noise"] = {{"flow_sigma", s.flow.noise_sigma},
                {"corner_budget", s.flow.corner_budget},
                {"sampling", s.flow.sampling == flowsim::FeatureSampling::uniform ? "uniform"
                                                                                 : "texture_weighted"},
                {"gradient_reference", s.flow.gradient_reference}};
  return j.dump(2) + "\n";
}

std::vector<ScenarioSpec> evaluation_suite(std::uint64_t seed) {
  const std::vector<flowsim::Material> grounds = {
      material("grass", {0.25, 0.50, 0.20}, 0.12, 25.0),
      material("sand", {0.80, 0.70, 0.50}, 0.08, 15.0),
      material("asphalt", {0.33, 0.33, 0.35}, 0.10, 40.0),
      material("dirt", {0.45, 0.32, 0.20}, 0.10, 20.0),
      material("concrete", {0.66, 0.66, 0.62}, 0.05, 30.0, 0.06, 2.0, 0.0),
      material("moss", {0.30, 0.42, 0.25}, 0.08, 12.0),
      material("gravel", {0.55, 0.50, 0.45}, 0.20, 40.0),
      material("tiles", {0.72, 0.62, 0.55}, 0.04, 20.0, 0.08, 3.0, 1.5708),
      material("hay", {0.62, 0.60, 0.30}, 0.10, 25.0),
  };
  const std::vector<flowsim::Material> objects = {
      material("red_crate", {0.80, 0.15, 0.10}, 0.06, 10.0, 0.10, 5.0, 0.0),
      material("blue_bin", {0.10, 0.20, 0.70}, 0.05, 15.0),
      material("dark_chair", {0.08, 0.08, 0.10}, 0.04, 20.0),
      material("white_box", {0.90, 0.90, 0.90}, 0.04, 10.0, 0.08, 6.0, 0.7854),
      material("orange_cone", {0.95, 0.50, 0.10}, 0.05, 15.0),
      material("purple_tarp", {0.50, 0.15, 0.55}, 0.06, 20.0),
      material("yellow_case", {0.90, 0.85, 0.10}, 0.05, 10.0, 0.06, 4.0, 1.5708),
      material("cyan_drum", {0.10, 0.70, 0.70}, 0.05, 15.0),
      material("maroon_sofa", {0.55, 0.10, 0.12}, 0.08, 25.0),
  };
  std::vector<ScenarioSpec> suite;
  for (std::size_t i = 0; i < grounds.size(); ++i) {
    auto s = base_flight("S" + std::to_string(i + 1), derive_seed(seed, "suite", i));
    s.scene.materials = {grounds[i], objects[i]};
    s.scene.plane.material_id = 0;
    two_boxes(s, 1, s.seed);
    suite.push_back(std::move(s));
  }
  return suite;
}

ScenarioSpec familiar_scene(std::uint64_t seed) {
  auto s = base_flight("E1", derive_seed(seed, "familiar"));
  s.scene.materials = {material("grey_floor", {0.50, 0.50, 0.50}, 0.20, 8.0, 0.10, 3.0, 0.6),
                       material("dark_chair", {0.12, 0.10, 0.10}, 0.06, 20.0)};
  two_boxes(s, 1, s.seed);
  return s;
}

ScenarioSpec unfamiliar_scene(std::uint64_t seed) {
  auto s = base_flight("E2", derive_seed(seed, "unfamiliar"));
  s.scene.materials = {material("brown_carpet", {0.45, 0.35, 0.25}, 0.25, 10.0, 0.10, 2.0, 0.6),
                       material("green_chair", {0.20, 0.50, 0.25}, 0.10, 20.0, 0.10, 5.0, 1.0)};
  two_boxes(s, 1, s.seed);
  return s;
}

ScenarioSpec single_box_scene(double height, std::uint64_t seed) {
  ScenarioSpec s;
  s.name = "single_box_h" + std::to_string(height);
  s.seed = seed;
  s.scene.materials = {material("grass", {0.25, 0.50, 0.20}, 0.12, 25.0),
                       material("crate", {0.80, 0.15, 0.10}, 0.06, 10.0)};
  flowsim::BoxObstacle b;
  b.center_x = 6.0;
  b.center_y = 0.0;
  b.extent_x = 1.0;
  b.extent_y = 1.0;
  b.height = 0.9;
  b.material_id = 1;
  s.scene.obstacles.push_back(b);
  s.trajectory.waypoints = {{0.0, 0.0}, {12.0, 0.0}};
  s.trajectory.height = height;
  s.trajectory.speed = 0.6;
  s.trajectory.frame_rate = 30.0;
  s.flow.corner_budget = 100;
  s.flow.noise_sigma = sigma_for_obstacle_height(s.trajectory, 0.01);
  return s;
}

}  // namespace flowssl::scenario
