#include "flowssl/flowfit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace flowssl::flowfit {

namespace {

using flowsim::FlowRecord;

// Relative pivot threshold below which the design is called rank deficient.
constexpr double kRankThreshold = 1e-10;

template <typename IndexRange>
PlanarFlowParams fit_indices(std::span<const FlowRecord> records, const IndexRange& indices,
                             FitOrder order) {
  const int k = basis_size(order);
  const auto n = static_cast<Eigen::Index>(std::size(indices));
  if (n < k) {
    throw InvalidArgument("flow fit needs at least " + std::to_string(k) + " records, got " +
                          std::to_string(n));
  }
  Eigen::MatrixXd au(n, k), av(n, k);
  Eigen::VectorXd bu(n), bv(n);
  Eigen::Index row = 0;
  for (auto idx : indices) {
    const auto& r = records[static_cast<std::size_t>(idx)];
    au(row, 0) = av(row, 0) = 1.0;
    au(row, 1) = av(row, 1) = r.x;
    au(row, 2) = av(row, 2) = r.y;
    if (k == 5) {
      au(row, 3) = r.x * r.x;
      av(row, 3) = r.y * r.y;
      au(row, 4) = av(row, 4) = r.x * r.y;
    }
    bu(row) = r.u;
    bv(row) = r.v;
    ++row;
  }

  auto solve = [&](const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < k) {
      throw DegenerateGeometry("flow samples do not span the fit basis (rank " +
                               std::to_string(qr.rank()) + " < " + std::to_string(k) + ")");
    }
    return Eigen::VectorXd(qr.solve(b));
  };
  const Eigen::VectorXd cu = solve(au, bu);
  const Eigen::VectorXd cv = solve(av, bv);

  PlanarFlowParams p;
  p.order = order;
  for (int i = 0; i < k; ++i) {
    p.pu[static_cast<std::size_t>(i)] = cu(i);
    p.pv[static_cast<std::size_t>(i)] = cv(i);
  }
  for (double c : p.pu) {
    if (!std::isfinite(c)) throw DegenerateGeometry("non-finite flow fit coefficients");
  }
  for (double c : p.pv) {
    if (!std::isfinite(c)) throw DegenerateGeometry("non-finite flow fit coefficients");
  }
  return p;
}

struct Consensus {
  std::size_t inliers = 0;
  double total_residual = std::numeric_limits<double>::infinity();
};

Consensus score(std::span<const FlowRecord> records, const PlanarFlowParams& p,
                double threshold) {
  Consensus c{0, 0.0};
  for (const auto& r : records) {
    const double res = std::abs(p.predict_u(r.x, r.y) - r.u) + std::abs(p.predict_v(r.x, r.y) - r.v);
    if (res <= threshold) ++c.inliers;
    c.total_residual += res;
  }
  return c;
}

}  // namespace

PlanarFlowParams ls_fit(std::span<const FlowRecord> records, FitOrder order) {
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_indices(records, all, order);
}

double roughness_threshold(const ThresholdQuery& q) {
  if (!std::isfinite(q.velocity_x) || !std::isfinite(q.height) ||
      !std::isfinite(q.obstacle_height) || !std::isfinite(q.focal_length)) {
    throw InvalidArgument("threshold query must be finite");
  }
  if (q.velocity_x < 0.0) throw InvalidArgument("threshold query: velocity must be >= 0");
  if (q.obstacle_height < 0.0) throw InvalidArgument("threshold query: obstacle height must be >= 0");
  if (!(q.height > q.obstacle_height)) {
    throw InvalidArgument("threshold query: height must exceed the obstacle height");
  }
  if (!(q.focal_length > 0.0)) throw InvalidArgument("threshold query: focal length must be > 0");
  return q.velocity_x * q.focal_length * q.obstacle_height /
         (q.height * (q.height - q.obstacle_height));
}

void RansacConfig::validate(std::size_t record_count) const {
  if (iterations < 1) throw InvalidArgument("RANSAC needs at least one iteration");
  if (sample_size < basis_size(order)) {
    throw InvalidArgument("RANSAC sample size smaller than the fit basis");
  }
  if (static_cast<std::size_t>(sample_size) > record_count) {
    throw InvalidArgument("RANSAC sample size exceeds the number of records");
  }
  if (std::isnan(inlier_threshold) || inlier_threshold < 0.0) {
    throw InvalidArgument("RANSAC inlier threshold must be >= 0");
  }
  if (min_inliers < 0) throw InvalidArgument("RANSAC min_inliers must be >= 0");
}

RansacConfig RansacConfig::make_default(std::size_t record_count, double noise_sigma,
                                        const ThresholdQuery& query, std::uint64_t seed,
                                        FitOrder order) {
  RansacConfig c;
  c.iterations = 100;
  c.order = order;
  c.sample_size = basis_size(order);
  c.inlier_threshold = std::max(2.0 * noise_sigma, roughness_threshold(query));
  c.min_inliers = static_cast<int>(std::ceil(0.4 * static_cast<double>(record_count)));
  c.seed = seed;
  return c;
}

std::size_t FlowFitResult::inlier_count() const {
  return static_cast<std::size_t>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

FlowFitResult evaluate_fit(std::span<const FlowRecord> records, const PlanarFlowParams& params,
                           double inlier_threshold) {
  FlowFitResult out;
  out.params = params;
  out.corner_count = records.size();
  out.inlier_mask.resize(records.size());
  double sum_u = 0.0, sum_v = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double eu = std::abs(params.predict_u(r.x, r.y) - r.u);
    const double ev = std::abs(params.predict_v(r.x, r.y) - r.v);
    sum_u += eu;
    sum_v += ev;
    out.inlier_mask[i] = eu + ev <= inlier_threshold;
  }
  if (!records.empty()) {
    out.eps_u = sum_u / static_cast<double>(records.size());
    out.eps_v = sum_v / static_cast<double>(records.size());
  }
  out.eps_star = out.eps_u + out.eps_v;
  return out;
}

FlowFitResult ransac_fit(std::span<const FlowRecord> records, const RansacConfig& config) {
  config.validate(records.size());
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> pool(records.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const auto m = static_cast<std::size_t>(config.sample_size);

  bool have_model = false;
  PlanarFlowParams best_model;
  Consensus best;
  std::vector<std::size_t> sample(m);
  for (int it = 0; it < config.iterations; ++it) {
    // Partial Fisher-Yates: the first m entries of the pool form the sample.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      sample[i] = pool[i];
    }
    PlanarFlowParams model;
    try {
      model = fit_indices(records, sample, config.order);
    } catch (const DegenerateGeometry&) {
      continue;
    }
    const Consensus c = score(records, model, config.inlier_threshold);
    if (!have_model || c.inliers > best.inliers ||
        (c.inliers == best.inliers && c.total_residual < best.total_residual)) {
      have_model = true;
      best = c;
      best_model = model;
    }
  }
  if (!have_model) {
    throw DegenerateGeometry("every RANSAC sample was degenerate");
  }

  FlowFitResult best_fit = evaluate_fit(records, best_model, config.inlier_threshold);
  if (best.inliers < static_cast<std::size_t>(config.min_inliers)) {
    throw NoConsensus("no planar consensus: best model has " + std::to_string(best.inliers) +
                          " inliers, need " + std::to_string(config.min_inliers),
                      std::move(best_fit));
  }

  std::vector<std::size_t> inliers;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (best_fit.inlier_mask[i]) inliers.push_back(i);
  }
  PlanarFlowParams refit = best_model;
  try {
    refit = fit_indices(records, inliers, config.order);
  } catch (const Error&) {
    return best_fit;
  }
  return evaluate_fit(records, refit, config.inlier_threshold);
}

flowsim::FlowObservation derotate(const flowsim::FlowObservation& obs,
                                  const flowsim::AngularRates& rates) {
  flowsim::FlowObservation out = obs;
  for (auto& r : out.records) {
    const auto rot = flowsim::rotational_flow(rates, r.x, r.y);
    r.u -= rot[0];
    r.v -= rot[1];
  }
  out.ego.rates = obs.ego.rates - rates;
  return out;
}

}  // namespace flowssl::flowfit
