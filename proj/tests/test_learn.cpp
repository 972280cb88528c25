#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "flowssl/errors.hpp"
#include "flowssl/learn.hpp"

using namespace flowssl;
using namespace flowssl::learn;

namespace {

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> q(m);
  for (auto& v : q) v = e(rng);
  const double s = std::accumulate(q.begin(), q.end(), 0.0);
  for (auto& v : q) v /= s;
  return q;
}

double sse(const RegressionModel& model, const TrainingSet& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const double r = predict(model, data.inputs[i]) - data.targets[i];
    s += r * r;
  }
  return s;
}

}  // namespace

TEST_CASE("realizable targets are reproduced") {
  std::mt19937_64 rng(1);
  const std::size_t m = 6;
  const std::vector<double> rho{0.1, -0.2, 0.05, 0.3, 0.0, 0.12};
  const double bias = 0.04;
  TrainingSet data;
  for (int i = 0; i < 40; ++i) {
    auto q = random_simplex(rng, m);
    data.targets.push_back(std::inner_product(q.begin(), q.end(), rho.begin(), bias));
    data.inputs.push_back(std::move(q));
  }
  const auto model = fit_regression(data);
  for (std::size_t i = 0; i < data.inputs.size(); ++i)
    CHECK(std::abs(predict(model, data.inputs[i]) - data.targets[i]) < 1e-6);
}

TEST_CASE("constant targets give constant predictions on the simplex") {
  std::mt19937_64 rng(2);
  TrainingSet data;
  for (int i = 0; i < 30; ++i) {
    data.inputs.push_back(random_simplex(rng, 5));
    data.targets.push_back(0.07);
  }
  const auto model = fit_regression(data);
  for (int i = 0; i < 10; ++i) CHECK(predict(model, random_simplex(rng, 5)) == doctest::Approx(0.07).epsilon(1e-6));
}

TEST_CASE("fitted regression is a least-squares optimum") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  TrainingSet data;
  for (int i = 0; i < 60; ++i) {
    auto q = random_simplex(rng, 4);
    data.targets.push_back(0.05 + 0.2 * q[0] - 0.1 * q[2] + noise(rng));
    data.inputs.push_back(std::move(q));
  }
  const auto model = fit_regression(data);
  const double best = sse(model, data);
  for (std::size_t k = 0; k < 4; ++k) {
    for (double d : {-1e-3, 1e-3}) {
      auto perturbed = model;
      perturbed.rho[k] += d;
      CHECK(sse(perturbed, data) >= best - 1e-12);
    }
  }
  auto shifted = model;
  shifted.bias += 1e-3;
  CHECK(sse(shifted, data) >= best - 1e-12);
}

TEST_CASE("prediction is affine in the histogram") {
  RegressionModel zero{{0.0, 0.0, 0.0}, 0.3};
  CHECK(predict(zero, std::vector<double>{0.2, 0.5, 0.3}) == 0.3);
  RegressionModel model{{0.1, 0.4, -0.2}, 0.05};
  CHECK(predict(model, std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(0.45));
  const std::vector<double> a{0.2, 0.5, 0.3}, b{0.6, 0.1, 0.3};
  std::vector<double> mid(3);
  for (int i = 0; i < 3; ++i) mid[i] = 0.25 * a[i] + 0.75 * b[i];
  CHECK(predict(model, mid) ==
        doctest::Approx(0.25 * predict(model, a) + 0.75 * predict(model, b)));
  CHECK_THROWS_AS(predict(model, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("NRMSE values") {
  const std::vector<double> t{0.0, 1.0};
  CHECK(nrmse(t, t) == 0.0);
  CHECK(nrmse(std::vector<double>{0.5, 0.5}, t) == doctest::Approx(0.5));
  CHECK_THROWS_AS(nrmse(std::vector<double>{0.1, 0.2}, std::vector<double>{0.3, 0.3}), DegenerateData);
}

TEST_CASE("labels use a strict threshold") {
  CHECK(label(0.076 + 1e-9, 0.076) == ObstacleClass::obstacle);
  CHECK(label(0.076, 0.076) == ObstacleClass::clear);
  CHECK(label(0.01, 0.076) == ObstacleClass::clear);
}

TEST_CASE("identical class likelihoods leave the prior unchanged") {
  std::vector<TextonHistogram> hs{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  std::vector<ObstacleClass> ys{ObstacleClass::obstacle, ObstacleClass::clear, ObstacleClass::clear,
                                ObstacleClass::clear};
  const auto model = fit_naive_bayes(hs, ys);
  CHECK(model.priors[0] == doctest::Approx(0.25));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const auto post = posterior(model, random_simplex(rng, 2), 25.0);
    CHECK(post[0] == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("perfectly separated one-hot histograms are classified confidently") {
  std::vector<TextonHistogram> hs;
  std::vector<ObstacleClass> ys;
  for (int i = 0; i < 50; ++i) {
    hs.push_back({1.0, 0.0, 0.0});
    ys.push_back(ObstacleClass::obstacle);
    hs.push_back({0.0, 1.0, 0.0});
    ys.push_back(ObstacleClass::clear);
  }
  const auto model = fit_naive_bayes(hs, ys);
  CHECK(posterior(model, std::vector<double>{1.0, 0.0, 0.0}, 25.0)[0] >= 0.99);
  CHECK(posterior(model, std::vector<double>{0.0, 1.0, 0.0}, 25.0)[1] >= 0.99);
  CHECK(classify(posterior(model, std::vector<double>{0.0, 1.0, 0.0}, 25.0)) == ObstacleClass::clear);
}

TEST_CASE("posterior follows the likelihood ratio and is normalized") {
  NaiveBayesModel model;
  model.priors = {0.5, 0.5};
  model.likelihoods[0] = {0.6, 0.3, 0.1};
  model.likelihoods[1] = {0.2, 0.3, 0.5};
  // One observation of texton 0: odds 0.6 : 0.2.
  const auto post = posterior(model, std::vector<double>{1.0, 0.0, 0.0}, 1.0);
  CHECK(post[0] == doctest::Approx(0.75).epsilon(1e-12));
  const auto neutral = posterior(model, std::vector<double>{0.0, 1.0, 0.0}, 5.0);
  CHECK(neutral[0] == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto p = posterior(model, random_simplex(rng, 3), 25.0);
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("naive bayes rejects single-class data") {
  std::vector<TextonHistogram> hs{{1.0, 0.0}, {0.0, 1.0}};
  std::vector<ObstacleClass> ys{ObstacleClass::clear, ObstacleClass::clear};
  CHECK_THROWS_AS(fit_naive_bayes(hs, ys), DegenerateData);
}

TEST_CASE("entropy in bits") {
  CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(entropy(std::vector<double>{0.9, 0.1}) == doctest::Approx(0.4690).epsilon(1e-4));
  CHECK_THROWS_AS(entropy(std::vector<double>{0.7, 0.7}), InvalidArgument);
}
