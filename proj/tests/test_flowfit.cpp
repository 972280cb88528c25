#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "flowssl/errors.hpp"
#include "flowssl/flowfit.hpp"
#include "flowssl/flowsim.hpp"

using namespace flowssl;
using namespace flowssl::flowfit;
using flowsim::FlowRecord;

namespace {

flowsim::Scene ground(double a = 0.0, double b = 0.0) {
  flowsim::Scene s;
  s.materials = {flowsim::Material{}};
  s.plane.slope_a = a;
  s.plane.slope_b = b;
  return s;
}

flowsim::FlowObservation observe(const flowsim::Scene& scene, const flowsim::EgoState& ego,
                                 int n = 100, std::uint64_t seed = 1) {
  flowsim::FlowSamplingConfig c;
  c.corner_budget = n;
  return flowsim::observe_flow(scene, flowsim::CameraIntrinsics{}, ego, c, seed);
}

flowsim::EgoState ego(double h, double vx, double vy = 0, double vz = 0) {
  flowsim::EgoState e;
  e.height = h;
  e.velocity = {vx, vy, vz};
  return e;
}

RansacConfig config_for(std::size_t n, double threshold, std::uint64_t seed = 3) {
  RansacConfig c;
  c.inlier_threshold = threshold;
  c.min_inliers = static_cast<int>(0.4 * static_cast<double>(n));
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("least squares recovers the constant field of level flight") {
  const auto p = ls_fit(observe(ground(), ego(3.0, 0.6)), FitOrder::quadratic);
  CHECK(p.pu[0] == doctest::Approx(-0.2).epsilon(1e-9));
  for (int k = 1; k < 5; ++k) CHECK(std::abs(p.pu[k]) < 1e-9);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(p.pv[k]) < 1e-9);
}

TEST_CASE("sloped plane under descent is reproduced exactly") {
  const auto obs = observe(ground(0.1, 0.0), ego(2.0, 0.0, 0.0, 0.7));
  const auto p = ls_fit(obs, FitOrder::quadratic);
  for (const auto& r : obs.records) {
    CHECK(std::abs(p.predict_u(r.x, r.y) - r.u) < 1e-9);
    CHECK(std::abs(p.predict_v(r.x, r.y) - r.v) < 1e-9);
  }
}

TEST_CASE("five points in general position are interpolated") {
  std::vector<FlowRecord> recs;
  const double xs[5] = {-0.4, -0.1, 0.05, 0.2, 0.45};
  const double ys[5] = {0.3, -0.35, 0.1, -0.05, 0.25};
  for (int i = 0; i < 5; ++i) recs.push_back({xs[i], ys[i], 0.1 * i - 0.3, 0.07 * i * i, 2.0, false});
  const auto p = ls_fit(recs, FitOrder::quadratic);
  for (const auto& r : recs) {
    CHECK(std::abs(p.predict_u(r.x, r.y) - r.u) < 1e-9);
    CHECK(std::abs(p.predict_v(r.x, r.y) - r.v) < 1e-9);
  }
}

TEST_CASE("rank deficiency and too few records are errors") {
  std::vector<FlowRecord> line;
  for (int i = 0; i < 10; ++i) line.push_back({0.05 * i, 0.1 * i, -0.2, 0.0, 3.0, false});
  CHECK_THROWS_AS(ls_fit(line, FitOrder::quadratic), DegenerateGeometry);
  std::vector<FlowRecord> few(4, FlowRecord{0.1, 0.2, 0.0, 0.0, 1.0, false});
  CHECK_THROWS_AS(ls_fit(few, FitOrder::quadratic), InvalidArgument);
}

TEST_CASE("RANSAC on clean data keeps every record and matches least squares") {
  const auto obs = observe(ground(0.05, -0.08), ego(2.5, 0.5, 0.2, 0.1));
  const auto fit = ransac_fit(obs, config_for(obs.records.size(), 1e-3));
  CHECK(fit.inlier_count() == obs.records.size());
  CHECK(fit.eps_star < 1e-9);
  const auto ls = ls_fit(obs, FitOrder::quadratic);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(fit.params.pu[k] - ls.pu[k]) < 1e-9);
    CHECK(std::abs(fit.params.pv[k] - ls.pv[k]) < 1e-9);
  }
}

TEST_CASE("RANSAC with an unbounded threshold equals least squares") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.05);
  auto obs = observe(ground(), ego(3.0, 0.6), 80);
  for (auto& r : obs.records) {
    r.u += noise(rng);
    r.v += noise(rng);
  }
  const auto fit = ransac_fit(obs, config_for(80, std::numeric_limits<double>::infinity()));
  const auto ls = ls_fit(obs, FitOrder::quadratic);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(fit.params.pu[k] - ls.pu[k]) < 1e-9);
}

TEST_CASE("RANSAC isolates box features and averages their excess flow") {
  // Plane features at h=2 move at 0.3, box-top features (0.9 m tall) at 0.6/1.1.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-0.5, 0.5);
  std::vector<FlowRecord> recs;
  for (int i = 0; i < 100; ++i) {
    const bool box = i % 10 < 3;
    const double u = box ? -0.6 / 1.1 : -0.3;
    recs.push_back({pos(rng), pos(rng), u, 0.0, box ? 1.1 : 2.0, box});
  }
  const auto cfg = RansacConfig::make_default(recs.size(), 0.0, {0.6, 2.0, 0.03, 1.0}, 5);
  const auto fit = ransac_fit(recs, cfg);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(fit.inlier_mask[i] == !recs[i].on_obstacle_truth);
  CHECK(fit.eps_u == doctest::Approx(0.3 * (0.6 / 1.1 - 0.3)).epsilon(1e-9));
  CHECK(std::abs(fit.eps_v) < 1e-12);
  CHECK(fit.eps_star == doctest::Approx(0.3 * 0.24545454545).epsilon(1e-6));
}

TEST_CASE("missing consensus raises NoConsensus with the best model") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> any(-1.0, 1.0);
  std::vector<FlowRecord> recs;
  for (int i = 0; i < 60; ++i) recs.push_back({0.5 * any(rng), 0.5 * any(rng), any(rng), any(rng), 1.0, false});
  auto cfg = config_for(60, 1e-4);
  try {
    ransac_fit(recs, cfg);
    FAIL("expected NoConsensus");
  } catch (const NoConsensus& e) {
    CHECK(e.best().corner_count == 60);
    CHECK(e.best().eps_star > 0.0);
  }
}

TEST_CASE("roughness is the sum of the component residuals") {
  FlowFitResult r;
  r.eps_u = 0.1;
  r.eps_v = 0.05;
  r.eps_star = r.eps_u + r.eps_v;
  CHECK(roughness(r) == doctest::Approx(0.15));
}

TEST_CASE("roughness is invariant to record order and scales with velocity") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.01);
  auto obs = observe(ground(), ego(3.0, 0.6), 60);
  for (auto& r : obs.records) r.u += noise(rng);
  const auto p = ls_fit(obs, FitOrder::quadratic);
  const auto base = evaluate_fit(obs.records, p, 0.01);
  auto shuffled = obs.records;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(evaluate_fit(shuffled, p, 0.01).eps_star == doctest::Approx(base.eps_star).epsilon(1e-12));

  auto scaled = obs.records;
  for (auto& r : scaled) {
    r.u *= 3.0;
    r.v *= 3.0;
  }
  const auto p3 = ls_fit(scaled, FitOrder::quadratic);
  const auto s3 = evaluate_fit(scaled, p3, 0.03);
  CHECK(s3.eps_u == doctest::Approx(3.0 * base.eps_u).epsilon(1e-9));
  CHECK(s3.eps_star == doctest::Approx(3.0 * base.eps_star).epsilon(1e-9));
}

TEST_CASE("derotation removes the rotational field") {
  auto e = ego(3.0, 0.6, 0.1, 0.05);
  const auto still = observe(ground(0.1, 0.05), e, 80, 9);
  e.rates = {0.0, 0.0, 0.2};
  const auto spinning = observe(ground(0.1, 0.05), e, 80, 9);
  const auto back = derotate(spinning, {0.0, 0.0, 0.2});
  REQUIRE(back.records.size() == still.records.size());
  for (std::size_t i = 0; i < still.records.size(); ++i) {
    CHECK(std::abs(back.records[i].u - still.records[i].u) < 1e-9);
    CHECK(std::abs(back.records[i].v - still.records[i].v) < 1e-9);
  }
  CHECK(back.ego.rates.r == doctest::Approx(0.0));
}

TEST_CASE("derotation is the identity for zero rates and additive otherwise") {
  auto e = ego(2.0, 0.3);
  e.rates = {0.1, -0.2, 0.3};
  const auto obs = observe(ground(), e, 40, 2);
  const auto same = derotate(obs, {});
  for (std::size_t i = 0; i < obs.records.size(); ++i) CHECK(same.records[i].u == obs.records[i].u);
  const flowsim::AngularRates w1{0.05, 0.1, -0.02}, w2{-0.3, 0.02, 0.4};
  const auto twice = derotate(derotate(obs, w1), w2);
  const auto once = derotate(obs, w1 + w2);
  for (std::size_t i = 0; i < obs.records.size(); ++i) {
    CHECK(std::abs(twice.records[i].u - once.records[i].u) < 1e-12);
    CHECK(std::abs(twice.records[i].v - once.records[i].v) < 1e-12);
  }
}

TEST_CASE("excess-flow threshold values") {
  CHECK(roughness_threshold({0.6, 2.0, 0.0, 1.0}) == 0.0);
  const double t2 = roughness_threshold({0.6, 2.0, 0.03, 1.0});
  const double t4 = roughness_threshold({0.6, 4.0, 0.03, 1.0});
  CHECK(t2 == doctest::Approx(4.5685e-3).epsilon(1e-4));
  CHECK(t4 == doctest::Approx(1.1335e-3).epsilon(1e-4));
  CHECK(t4 < t2);
}

TEST_CASE("excess-flow threshold monotonicity") {
  double prev = 0.0;
  for (double v = 0.1; v < 2.0; v += 0.1) {
    const double t = roughness_threshold({v, 3.0, 0.05, 1.0});
    CHECK(t > prev);
    prev = t;
  }
  prev = 0.0;
  for (double dh = 0.01; dh < 1.0; dh += 0.05) {
    const double t = roughness_threshold({0.6, 3.0, dh, 1.0});
    CHECK(t > prev);
    prev = t;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double h = 0.2; h < 10.0; h += 0.3) {
    const double t = roughness_threshold({0.6, h, 0.1, 1.0});
    CHECK(t < prev);
    prev = t;
  }
  CHECK_THROWS_AS(roughness_threshold({0.6, 0.03, 0.03, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(roughness_threshold({-0.1, 3.0, 0.03, 1.0}), InvalidArgument);
}

TEST_CASE("RANSAC defaults follow the detection threshold") {
  const ThresholdQuery q{0.6, 3.0, 0.03, 1.0};
  const auto small_noise = RansacConfig::make_default(100, 1e-5, q, 1);
  CHECK(small_noise.inlier_threshold == doctest::Approx(roughness_threshold(q)));
  CHECK(small_noise.min_inliers == 40);
  CHECK(small_noise.sample_size == 5);
  CHECK(small_noise.iterations == 100);
  const auto big_noise = RansacConfig::make_default(100, 0.01, q, 1, FitOrder::linear);
  CHECK(big_noise.inlier_threshold == doctest::Approx(0.02));
  CHECK(big_noise.sample_size == 3);
}

TEST_CASE("linear fit keeps three terms") {
  const auto p = ls_fit(observe(ground(), ego(3.0, 0.6)), FitOrder::linear);
  CHECK(p.pu[0] == doctest::Approx(-0.2));
  CHECK(p.pu[3] == 0.0);
  CHECK(p.pu[4] == 0.0);
}
