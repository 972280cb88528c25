#pragma once

// Self-supervised learning core: texton histogram -> roughness regression,
// its NRMSE score, and a two-class Naive Bayes wrapper whose posterior
// entropy flags unfamiliar appearance.

#include <array>
#include <span>
#include <vector>

#include "flowssl/appearance.hpp"

namespace flowssl::learn {

using appearance::TextonHistogram;

/// eps_hat = rho . q + bias
struct RegressionModel {
  std::vector<double> rho;
  double bias = 0.0;
};

struct TrainingSet {
  std::vector<TextonHistogram> inputs;
  std::vector<double> targets;  // eps* per row, >= 0
};

inline constexpr double kDefaultRidge = 1e-8;

/// Minimizes sum (rho.q_i + bias - t_i)^2 + ridge * |rho|^2. The bias is
/// not penalized. Throws InvalidArgument on empty or ragged input.
RegressionModel fit_regression(const TrainingSet& data, double ridge = kDefaultRidge);

double predict(const RegressionModel& model, std::span<const double> q);

/// RMSE normalized by the range of the targets. Throws DegenerateData when
/// the targets are constant.
double nrmse(std::span<const double> predictions, std::span<const double> targets);

enum class ObstacleClass { obstacle = 0, clear = 1 };

/// Obstacle iff eps_hat > threshold; a tie is clear.
ObstacleClass label(double eps_hat, double threshold);

struct NaiveBayesModel {
  std::array<double, 2> priors{};  // indexed by ObstacleClass
  std::array<std::vector<double>, 2> likelihoods;  // p(texton | class)
  double alpha = 1.0;
  double patch_count = 25.0;  // histogram-to-count scale used when fitting
};

/// Multinomial Naive Bayes over texton occurrences. Each histogram is
/// scaled by patch_count to counts; per class the counts are summed,
/// alpha-smoothed and normalized. Throws DegenerateData if a class is
/// missing.
NaiveBayesModel fit_naive_bayes(std::span<const TextonHistogram> histograms,
                                std::span<const ObstacleClass> labels, double alpha = 1.0,
                                double patch_count = 25.0);

/// Posterior class probabilities for evidence q * patch_count.
std::array<double, 2> posterior(const NaiveBayesModel& model, std::span<const double> q,
                                double patch_count);

inline ObstacleClass classify(const std::array<double, 2>& post) {
  return post[0] > post[1] ? ObstacleClass::obstacle : ObstacleClass::clear;
}

/// Shannon entropy in bits, with 0 log 0 = 0.
double entropy(std::span<const double> probabilities);

}  // namespace flowssl::learn
