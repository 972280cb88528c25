#include "flowssl/learn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "flowssl/errors.hpp"

namespace flowssl::learn {

RegressionModel fit_regression(const TrainingSet& data, double ridge) {
  const auto n = data.inputs.size();
  if (n == 0) throw InvalidArgument("regression needs at least one training row");
  if (data.targets.size() != n) throw InvalidArgument("inputs and targets differ in length");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be non-negative");
  const auto m = data.inputs.front().size();
  if (m == 0) throw InvalidArgument("empty histograms");

  const auto rows = static_cast<Eigen::Index>(n + m);
  const auto cols = static_cast<Eigen::Index>(m + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = data.inputs[i];
    if (q.size() != m) throw InvalidArgument("histograms differ in length");
    for (std::size_t j = 0; j < m; ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q[j];
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = 1.0;
    b(static_cast<Eigen::Index>(i)) = data.targets[i];
  }
  // Ridge rows penalize rho only.
  const double s = std::sqrt(ridge);
  for (std::size_t j = 0; j < m; ++j) {
    a(static_cast<Eigen::Index>(n + j), static_cast<Eigen::Index>(j)) = s;
  }

  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  RegressionModel model;
  model.rho.assign(x.data(), x.data() + m);
  model.bias = x(static_cast<Eigen::Index>(m));
  return model;
}

double predict(const RegressionModel& model, std::span<const double> q) {
  if (q.size() != model.rho.size()) {
    throw InvalidArgument("histogram length " + std::to_string(q.size()) +
                          " does not match model length " + std::to_string(model.rho.size()));
  }
  double y = model.bias;
  for (std::size_t i = 0; i < q.size(); ++i) y += model.rho[i] * q[i];
  return y;
}

double nrmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw InvalidArgument("NRMSE needs equal, non-zero lengths");
  }
  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DegenerateData("NRMSE undefined for constant targets");
  double sse = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(targets.size())) / range;
}

ObstacleClass label(double eps_hat, double threshold) {
  return eps_hat > threshold ? ObstacleClass::obstacle : ObstacleClass::clear;
}

NaiveBayesModel fit_naive_bayes(std::span<const TextonHistogram> histograms,
                                std::span<const ObstacleClass> labels, double alpha,
                                double patch_count) {
  if (histograms.empty() || histograms.size() != labels.size()) {
    throw InvalidArgument("Naive Bayes needs equal, non-zero numbers of histograms and labels");
  }
  if (!(alpha > 0.0)) throw InvalidArgument("smoothing alpha must be positive");
  if (!(patch_count > 0.0)) throw InvalidArgument("patch count must be positive");
  const auto m = histograms.front().size();

  NaiveBayesModel model;
  model.alpha = alpha;
  model.patch_count = patch_count;
  std::array<double, 2> members{0.0, 0.0};
  for (auto& l : model.likelihoods) l.assign(m, 0.0);
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    if (histograms[i].size() != m) throw InvalidArgument("histograms differ in length");
    const auto k = static_cast<std::size_t>(labels[i]);
    members[k] += 1.0;
    for (std::size_t j = 0; j < m; ++j) model.likelihoods[k][j] += patch_count * histograms[i][j];
  }
  if (members[0] == 0.0 || members[1] == 0.0) {
    throw DegenerateData("Naive Bayes needs both classes in the training data");
  }
  const double total = members[0] + members[1];
  for (std::size_t k = 0; k < 2; ++k) {
    model.priors[k] = members[k] / total;
    double mass = 0.0;
    for (auto& v : model.likelihoods[k]) {
      v += alpha;
      mass += v;
    }
    for (auto& v : model.likelihoods[k]) v /= mass;
  }
  return model;
}

std::array<double, 2> posterior(const NaiveBayesModel& model, std::span<const double> q,
                                double patch_count) {
  std::array<double, 2> logp{};
  for (std::size_t k = 0; k < 2; ++k) {
    if (q.size() != model.likelihoods[k].size()) {
      throw InvalidArgument("histogram length does not match the Naive Bayes model");
    }
    double s = std::log(model.priors[k]);
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (q[j] != 0.0) s += patch_count * q[j] * std::log(model.likelihoods[k][j]);
    }
    logp[k] = s;
  }
  const double top = std::max(logp[0], logp[1]);
  const double e0 = std::exp(logp[0] - top);
  const double e1 = std::exp(logp[1] - top);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

double entropy(std::span<const double> probabilities) {
  double sum = 0.0;
  double h = 0.0;
  for (double p : probabilities) {
    if (p < 0.0 || !std::isfinite(p)) throw InvalidArgument("probabilities must be finite and >= 0");
    sum += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("probabilities must sum to 1");
  return h;
}

}  // namespace flowssl::learn
