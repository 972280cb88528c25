#pragma once

// Detection metrics: TP/FP rates, classification error and ROC/AUC.

#include <optional>
#include <span>
#include <vector>

#include "flowssl/learn.hpp"

namespace flowssl::harness {

struct LabeledScore {
  double score = 0.0;
  bool obstacle = false;  // ground truth
};

/// A rate is empty when its denominator class is absent.
struct DetectionRates {
  std::optional<double> tp_rate;
  std::optional<double> fp_rate;

  // Throw DegenerateData when the rate is undefined.
  double tp() const;
  double fp() const;
};

/// Detection means score > threshold.
DetectionRates tp_fp_rates(std::span<const LabeledScore> samples, double threshold);

/// (FP + FN) / n. Throws InvalidArgument on empty or mismatched input.
double classification_error(std::span<const learn::ObstacleClass> predictions,
                            std::span<const learn::ObstacleClass> truths);

struct RocPoint {
  double fp_rate = 0.0;
  double tp_rate = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auc = 0.0;
};

/// Sweeps the threshold over the sorted unique scores (equal scores move
/// together) and integrates with the trapezoid rule. Throws DegenerateData
/// when only one class is present.
RocCurve roc(std::span<const LabeledScore> samples);

}  // namespace flowssl::harness
