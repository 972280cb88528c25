#pragma once

// File formats. Everything is CSV with a header row, except images (binary
// PPM, P6, maxval 255). Dictionary and roughness-map files start with one
// '#' metadata line of space-separated key=value pairs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowssl/appearance.hpp"
#include "flowssl/flowfit.hpp"
#include "flowssl/flowsim.hpp"
#include "flowssl/landing.hpp"
#include "flowssl/learn.hpp"

namespace flowssl::io {

/// Shortest round-trippable-enough text form used in every CSV (9 significant digits).
std::string format_number(double v);

void write_ppm(const std::filesystem::path& path, const flowsim::Image& image);
flowsim::Image read_ppm(const std::filesystem::path& path);

// frame_id,x,y,u,v,depth_truth,on_obstacle
void write_flow_csv(const std::filesystem::path& path,
                    std::span<const flowsim::FlowObservation> observations);
std::vector<flowsim::FlowObservation> read_flow_csv(const std::filesystem::path& path);

// frame_id,x,y,h,vx,vy,vz,p,q,r
void write_trajectory_csv(const std::filesystem::path& path,
                          std::span<const flowsim::FlowObservation> observations);
/// Fills FlowObservation::ego by frame id; records are left empty.
std::map<std::int64_t, flowsim::EgoState> read_trajectory_csv(const std::filesystem::path& path);

struct FitRow {
  std::int64_t frame_id = 0;
  double eps_u = 0.0, eps_v = 0.0, eps_star = 0.0;
  std::size_t inlier_count = 0, corner_count = 0;
};

// frame_id,eps_u,eps_v,eps_star,inlier_count,corner_count
// and the sidecar frame_id,pu1..pu5,pv1..pv5
void write_fit_csv(const std::filesystem::path& path, const std::filesystem::path& coefficients,
                   std::span<const std::int64_t> frame_ids,
                   std::span<const flowfit::FlowFitResult> fits);
std::vector<FitRow> read_fit_csv(const std::filesystem::path& path);

void write_dictionary_csv(const std::filesystem::path& path,
                          const appearance::TextonDictionary& dict);
appearance::TextonDictionary read_dictionary_csv(const std::filesystem::path& path);

// frame_id,q0..q{m-1}
void write_histograms_csv(const std::filesystem::path& path,
                          std::span<const std::int64_t> frame_ids,
                          std::span<const appearance::TextonHistogram> histograms);

// bias,rho0..rho{m-1}
void write_regression_csv(const std::filesystem::path& path, const learn::RegressionModel& model);
learn::RegressionModel read_regression_csv(const std::filesystem::path& path);

// class,prior,alpha,patch_count,l0..l{m-1}; rows "obstacle" then "clear"
void write_naive_bayes_csv(const std::filesystem::path& path, const learn::NaiveBayesModel& model);
learn::NaiveBayesModel read_naive_bayes_csv(const std::filesystem::path& path);

void write_roughness_map_csv(const std::filesystem::path& path, const landing::RoughnessMap& map);

/// Heat map at map resolution. Values are scaled linearly between the map
/// minimum (dark red 51,0,0) and maximum (light yellow 255,255,153).
void write_heatmap_ppm(const std::filesystem::path& path, const landing::RoughnessMap& map);

std::string format_scan_decision(const landing::ScanDecision& d);
std::string format_grid_decision(const landing::GridDecision& d);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace flowssl::io
