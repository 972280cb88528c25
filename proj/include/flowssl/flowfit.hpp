#pragma once

// Parametric flow-field fitting, RANSAC roughness and the height/velocity
// dependent obstacle threshold.
//
// The planar flow model is
//   u = p_u . [1, x, y, x^2, xy]
//   v = p_v . [1, x, y, y^2, xy]
// and the linear variant keeps only the first three terms of each basis.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flowssl/errors.hpp"
#include "flowssl/flowsim.hpp"

namespace flowssl::flowfit {

enum class FitOrder { linear, quadratic };

inline constexpr int basis_size(FitOrder order) { return order == FitOrder::linear ? 3 : 5; }

struct PlanarFlowParams {
  std::array<double, 5> pu{};
  std::array<double, 5> pv{};
  FitOrder order = FitOrder::quadratic;

  double predict_u(double x, double y) const {
    return pu[0] + pu[1] * x + pu[2] * y + pu[3] * x * x + pu[4] * x * y;
  }
  double predict_v(double x, double y) const {
    return pv[0] + pv[1] * x + pv[2] * y + pv[3] * y * y + pv[4] * x * y;
  }
};

/// Least-squares fit of both flow components over all records.
/// Throws DegenerateGeometry when the design matrix is rank deficient and
/// InvalidArgument when there are fewer records than basis terms.
PlanarFlowParams ls_fit(std::span<const flowsim::FlowRecord> records, FitOrder order);

inline PlanarFlowParams ls_fit(const flowsim::FlowObservation& obs, FitOrder order) {
  return ls_fit(obs.records, order);
}

/// Inputs of the excess-flow threshold. The focal length must match the
/// flow units: 1.0 for normalized flow, pixels for pixel flow.
struct ThresholdQuery {
  double velocity_x = 0.0;  // m/s
  double height = 1.0;      // m
  double obstacle_height = 0.03;  // detectable obstacle height, m
  double focal_length = 1.0;
};

/// Excess flow of a feature standing obstacle_height above the plane:
/// V f dh / (h (h - dh)). Throws InvalidArgument unless h > dh >= 0, V >= 0.
double roughness_threshold(const ThresholdQuery& query);

struct RansacConfig {
  int iterations = 100;
  int sample_size = 5;
  double inlier_threshold = 0.01;  // on |du| + |dv|, normalized flow
  int min_inliers = 10;
  std::uint64_t seed = 0;
  FitOrder order = FitOrder::quadratic;

  void validate(std::size_t record_count) const;

  /// Defaults tied to the detection threshold: threshold =
  /// max(2 sigma, roughness_threshold(query)), min_inliers = 40% of records.
  static RansacConfig make_default(std::size_t record_count, double noise_sigma,
                                   const ThresholdQuery& query, std::uint64_t seed,
                                   FitOrder order = FitOrder::quadratic);
};

struct FlowFitResult {
  PlanarFlowParams params;
  std::vector<bool> inlier_mask;
  double eps_u = 0.0;
  double eps_v = 0.0;
  double eps_star = 0.0;
  std::size_t corner_count = 0;

  std::size_t inlier_count() const;
};

/// Thrown when the best consensus is smaller than min_inliers. The best
/// model found is kept so callers can still inspect it.
class NoConsensus : public DegenerateData {
 public:
  NoConsensus(const std::string& what, FlowFitResult best)
      : DegenerateData(what), best_(std::move(best)) {}
  const FlowFitResult& best() const { return best_; }

 private:
  FlowFitResult best_;
};

/// Residual summary of a model over all records: eps_u, eps_v are the mean
/// absolute residuals per record, eps_star their sum.
FlowFitResult evaluate_fit(std::span<const flowsim::FlowRecord> records,
                           const PlanarFlowParams& params, double inlier_threshold);

FlowFitResult ransac_fit(std::span<const flowsim::FlowRecord> records, const RansacConfig& config);

inline FlowFitResult ransac_fit(const flowsim::FlowObservation& obs, const RansacConfig& config) {
  return ransac_fit(obs.records, config);
}

/// Surface roughness eps* = eps_u + eps_v.
inline double roughness(const FlowFitResult& fit) { return fit.eps_star; }

/// Removes the depth-independent rotational flow of the given rates.
flowsim::FlowObservation derotate(const flowsim::FlowObservation& obs,
                                  const flowsim::AngularRates& rates);

}  // namespace flowssl::flowfit
