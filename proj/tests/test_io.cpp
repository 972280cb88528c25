#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "flowssl/errors.hpp"
#include "flowssl/io.hpp"
#include "flowssl/scenario.hpp"

using namespace flowssl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("flowssl_io_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

constexpr double kTol = 1e-8;

}  // namespace

TEST_CASE("numbers are formatted compactly") {
  CHECK(io::format_number(0.5) == "0.5");
  CHECK(io::format_number(-0.0) == "0");
  CHECK(io::format_number(1e-12) == "1e-12");
  CHECK(io::split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
}

TEST_CASE("PPM round trip quantizes to 8 bits") {
  TempDir dir;
  flowsim::Image img(7, 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : img.data()) v = u(rng);
  io::write_ppm(dir / "a.ppm", img);
  const auto back = io::read_ppm(dir / "a.ppm");
  REQUIRE(back.width() == 7);
  REQUIRE(back.height() == 5);
  for (std::size_t i = 0; i < img.data().size(); ++i)
    CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5 / 255.0 + 1e-12);
  io::write_ppm(dir / "b.ppm", back);
  CHECK(io::read_ppm(dir / "b.ppm") == back);
}

TEST_CASE("PPM reader accepts comments and rejects bad files") {
  TempDir dir;
  write_text(dir / "c.ppm", std::string("P6\n# made by hand\n2 1\n255\n") + std::string("\x00\x80\xff\x10\x20\x30", 6));
  const auto img = io::read_ppm(dir / "c.ppm");
  CHECK(img.width() == 2);
  CHECK(img.at(0, 0, 2) == 1.0);
  write_text(dir / "p3.ppm", "P3\n1 1\n255\n0 0 0\n");
  CHECK_THROWS_AS(io::read_ppm(dir / "p3.ppm"), ParseError);
  write_text(dir / "short.ppm", "P6\n2 2\n255\nabc");
  CHECK_THROWS_AS(io::read_ppm(dir / "short.ppm"), ParseError);
  CHECK_THROWS_AS(io::read_ppm(dir / "missing.ppm"), ParseError);
}

TEST_CASE("flow and trajectory CSV round trip") {
  TempDir dir;
  std::vector<flowsim::FlowObservation> obs(2);
  for (int f = 0; f < 2; ++f) {
    obs[f].frame_id = 10 + f;
    obs[f].ego.x = 0.1 * f;
    obs[f].ego.y = -0.2;
    obs[f].ego.height = 2.5 + f;
    obs[f].ego.velocity = {0.6, 0.1, -0.05};
    obs[f].ego.rates = {0.01, 0.02, 0.03 * f};
    for (int i = 0; i < 3; ++i)
      obs[f].records.push_back({0.1 * i, -0.05 * i, -0.2 + 0.01 * i, 0.003, 2.5, i == 1});
  }
  io::write_flow_csv(dir / "flow.csv", obs);
  io::write_trajectory_csv(dir / "traj.csv", obs);
  const auto flow = io::read_flow_csv(dir / "flow.csv");
  REQUIRE(flow.size() == 2);
  for (int f = 0; f < 2; ++f) {
    CHECK(flow[f].frame_id == 10 + f);
    REQUIRE(flow[f].records.size() == 3);
    for (int i = 0; i < 3; ++i) {
      const auto& a = flow[f].records[i];
      const auto& b = obs[f].records[i];
      CHECK(a.x == doctest::Approx(b.x).epsilon(kTol));
      CHECK(a.u == doctest::Approx(b.u).epsilon(kTol));
      CHECK(a.v == doctest::Approx(b.v).epsilon(kTol));
      CHECK(a.depth_truth == doctest::Approx(b.depth_truth).epsilon(kTol));
      CHECK(a.on_obstacle_truth == b.on_obstacle_truth);
    }
  }
  const auto traj = io::read_trajectory_csv(dir / "traj.csv");
  REQUIRE(traj.size() == 2);
  CHECK(traj.at(11).height == doctest::Approx(3.5));
  CHECK(traj.at(11).velocity.z == doctest::Approx(-0.05));
  CHECK(traj.at(11).rates.r == doctest::Approx(0.03));
}

TEST_CASE("fit CSV round trip") {
  TempDir dir;
  flowfit::FlowFitResult fit;
  fit.eps_u = 0.01;
  fit.eps_v = 0.002;
  fit.eps_star = 0.012;
  fit.corner_count = 25;
  fit.inlier_mask.assign(25, true);
  fit.inlier_mask[3] = false;
  const std::vector<std::int64_t> ids{4};
  const std::vector<flowfit::FlowFitResult> fits{fit};
  io::write_fit_csv(dir / "fit.csv", dir / "coef.csv", ids, fits);
  const auto rows = io::read_fit_csv(dir / "fit.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].frame_id == 4);
  CHECK(rows[0].eps_star == doctest::Approx(0.012));
  CHECK(rows[0].inlier_count == 24);
  CHECK(rows[0].corner_count == 25);
  CHECK(fs::exists(dir / "coef.csv"));
}

TEST_CASE("dictionary, regression and naive bayes round trip") {
  TempDir dir;
  appearance::TextonDictionary dict;
  dict.patch_width = 2;
  dict.epochs = 3;
  dict.seed = 99;
  dict.schedule = {0.2, 0.02};
  dict.textons = {std::vector<double>(12, 0.25), std::vector<double>(12, 0.75)};
  io::write_dictionary_csv(dir / "dict.csv", dict);
  const auto d = io::read_dictionary_csv(dir / "dict.csv");
  CHECK(d.patch_width == 2);
  CHECK(d.epochs == 3);
  CHECK(d.seed == 99);
  CHECK(d.schedule.initial == doctest::Approx(0.2));
  CHECK(d.textons == dict.textons);

  learn::RegressionModel reg{{0.1, -0.3, 0.0125}, 0.04};
  io::write_regression_csv(dir / "reg.csv", reg);
  const auto r = io::read_regression_csv(dir / "reg.csv");
  CHECK(r.bias == doctest::Approx(0.04));
  REQUIRE(r.rho.size() == 3);
  CHECK(r.rho[1] == doctest::Approx(-0.3));

  learn::NaiveBayesModel nb;
  nb.priors = {0.3, 0.7};
  nb.likelihoods[0] = {0.5, 0.25, 0.25};
  nb.likelihoods[1] = {0.1, 0.2, 0.7};
  nb.patch_count = 25.0;
  io::write_naive_bayes_csv(dir / "nb.csv", nb);
  const auto n = io::read_naive_bayes_csv(dir / "nb.csv");
  CHECK(n.priors[0] == doctest::Approx(0.3));
  CHECK(n.likelihoods[1][2] == doctest::Approx(0.7));
  CHECK(n.patch_count == 25.0);
}

TEST_CASE("malformed CSV files raise parse errors") {
  TempDir dir;
  write_text(dir / "bad_header.csv", "frame,x\n1,2\n");
  CHECK_THROWS_AS(io::read_flow_csv(dir / "bad_header.csv"), ParseError);
  write_text(dir / "bad_number.csv", "bias,rho0\nabc,0.1\n");
  CHECK_THROWS_AS(io::read_regression_csv(dir / "bad_number.csv"), ParseError);
  write_text(dir / "short_row.csv", "frame_id,eps_u,eps_v,eps_star,inlier_count,corner_count\n1,0.1\n");
  CHECK_THROWS_AS(io::read_fit_csv(dir / "short_row.csv"), ParseError);
  CHECK_THROWS_AS(io::read_dictionary_csv(dir / "nope.csv"), ParseError);
}

TEST_CASE("decision lines") {
  landing::ScanDecision s{3, 5, 3, 4, 104, 0.4, -0.5};
  CHECK(io::format_scan_decision(s) ==
        "run_begin=3 run_end=5 a_sf=3 land_index=4 land_frame_id=104 land_x=0.4 land_y=-0.5");
  landing::GridDecision g;
  g.values.fill(0.5);
  CHECK(io::format_grid_decision(g).find("decision=reject") != std::string::npos);
  g.chosen = 7;
  CHECK(io::format_grid_decision(g).find("decision=land region=7") != std::string::npos);
}

TEST_CASE("roughness map and heatmap outputs") {
  TempDir dir;
  landing::RoughnessMap map;
  map.cols = 3;
  map.rows = 2;
  map.values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  io::write_roughness_map_csv(dir / "map.csv", map);
  io::write_heatmap_ppm(dir / "map.ppm", map);
  const auto img = io::read_ppm(dir / "map.ppm");
  CHECK(img.width() == 3);
  CHECK(img.height() == 2);
  CHECK(img.at(0, 0, 0) == doctest::Approx(51.0 / 255.0));
  CHECK(img.at(2, 1, 2) == doctest::Approx(153.0 / 255.0));
}

TEST_CASE("scenario JSON round trip") {
  auto spec = scenario::familiar_scene(5);
  spec.trajectory.max_frames = 12;
  const auto back = scenario::parse_scenario(scenario::scenario_to_json(spec));
  CHECK(back.name == spec.name);
  CHECK(back.seed == spec.seed);
  CHECK(back.trajectory.max_frames == 12);
  CHECK(back.scene.materials.size() == spec.scene.materials.size());
  CHECK(back.scene.obstacles.size() == spec.scene.obstacles.size());
  CHECK(scenario::scenario_to_json(back) == scenario::scenario_to_json(spec));
  CHECK(back.states().size() == 12);
}

TEST_CASE("invalid scenario JSON is a parse error") {
  CHECK_THROWS_AS(scenario::parse_scenario("{not json"), ParseError);
  CHECK_THROWS_AS(scenario::parse_scenario(R"({"materials":[{"name":"a","base_color":[1,2]}]})"),
                  ParseError);
}
