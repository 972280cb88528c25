#include "flowssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowssl/errors.hpp"

namespace flowssl::harness {

double DetectionRates::tp() const {
  if (!tp_rate) throw DegenerateData("TP rate undefined: no obstacle samples");
  return *tp_rate;
}

double DetectionRates::fp() const {
  if (!fp_rate) throw DegenerateData("FP rate undefined: no clear samples");
  return *fp_rate;
}

DetectionRates tp_fp_rates(std::span<const LabeledScore> samples, double threshold) {
  if (samples.empty()) throw InvalidArgument("rates need at least one sample");
  std::size_t pos = 0, neg = 0, tp = 0, fp = 0;
  for (const auto& s : samples) {
    const bool detected = s.score > threshold;
    if (s.obstacle) {
      ++pos;
      tp += detected;
    } else {
      ++neg;
      fp += detected;
    }
  }
  DetectionRates r;
  if (pos > 0) r.tp_rate = static_cast<double>(tp) / static_cast<double>(pos);
  if (neg > 0) r.fp_rate = static_cast<double>(fp) / static_cast<double>(neg);
  return r;
}

double classification_error(std::span<const learn::ObstacleClass> predictions,
                            std::span<const learn::ObstacleClass> truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw InvalidArgument("classification error needs equal, non-zero lengths");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) wrong += predictions[i] != truths[i];
  return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

RocCurve roc(std::span<const LabeledScore> samples) {
  std::size_t pos = 0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw InvalidArgument("ROC scores must be finite");
    pos += s.obstacle;
  }
  const std::size_t neg = samples.size() - pos;
  if (pos == 0 || neg == 0) throw DegenerateData("ROC needs both classes");

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score > samples[b].score;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = samples[order[i]].score;
    while (i < order.size() && samples[order[i]].score == s) {
      if (samples[order[i]].obstacle) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    const RocPoint p{static_cast<double>(fp) / static_cast<double>(neg),
                     static_cast<double>(tp) / static_cast<double>(pos)};
    const RocPoint& prev = curve.points.back();
    curve.auc += (p.fp_rate - prev.fp_rate) * 0.5 * (p.tp_rate + prev.tp_rate);
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace flowssl::harness
