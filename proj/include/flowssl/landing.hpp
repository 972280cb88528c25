#pragma once

// Landing decisions: per-frame safety, the scan-path waypoint choice,
// the 3x3 hover grid and sliding-window roughness maps.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowssl/appearance.hpp"
#include "flowssl/flowsim.hpp"
#include "flowssl/learn.hpp"

namespace flowssl::landing {

struct SafetyFrame {
  std::int64_t frame_id = 0;
  double x = 0.0, y = 0.0;
  int safe = 0;  // SF
};

/// SF = 1 iff eps* < threshold.
int classify_safety(double eps_star, double threshold);

struct ScanDecision {
  std::size_t run_begin = 0;  // inclusive index into the frame list
  std::size_t run_end = 0;    // inclusive
  std::size_t safe_count = 0;  // A_SF
  std::size_t land_index = 0;
  std::int64_t land_frame_id = 0;
  double land_x = 0.0, land_y = 0.0;  // P_land
};

/// Longest run of consecutive safe frames (earliest on ties); the landing
/// point is the middle frame of the run, the lower middle for even runs.
/// Throws DegenerateData when no frame is safe.
ScanDecision select_scan_waypoint(std::span<const SafetyFrame> frames);

/// One cell of the 3x3 grid, pixel coordinates.
struct GridCell {
  appearance::Region region;
  double center_x = 0.0, center_y = 0.0;
};

/// Nine cells of equal size, row-major; remainder pixels are trimmed
/// evenly from both borders.
std::array<GridCell, 9> grid_cells(int width, int height);

struct GridDecision {
  std::array<double, 9> values{};  // eps_hat per cell, row-major
  std::optional<std::size_t> chosen;  // nullopt = all cells rejected
  double offset_x_px = 0.0, offset_y_px = 0.0;  // chosen center - image center
  double distance_px = 0.0;  // d_c
  double distance_m = 0.0;   // d_p
  double offset_x_m = 0.0, offset_y_m = 0.0;
};

/// d_p = d_c h / f
double project_distance(double distance_px, double height, double focal_length_px);

/// Picks the minimum cell, rejecting when the minimum exceeds the
/// threshold. Equal minima go to the cell closest to the image center,
/// then to the lowest row-major index.
GridDecision choose_grid_cell(const std::array<double, 9>& values, double threshold,
                              const std::array<GridCell, 9>& cells, double image_center_x,
                              double image_center_y, double height, double focal_length_px);

GridDecision grid_select(const flowsim::Image& image, const appearance::TextonDictionary& dict,
                         const learn::RegressionModel& model, double threshold,
                         const flowsim::CameraIntrinsics& camera, double height,
                         const appearance::PatchConfig& patches, std::uint64_t seed);

struct RoughnessMap {
  int cols = 0, rows = 0;
  int window = 50, stride = 4, samples = 50;
  std::vector<double> values;  // row-major, rows x cols

  double at(int col, int row) const {
    return values[static_cast<std::size_t>(row) * cols + col];
  }
};

/// floor((size - window) / stride) + 1
int map_extent(int size, int window, int stride);

struct SegmentConfig {
  int window = 50;
  int stride = 4;
  int samples = 50;
  int patch_width = 5;
};

/// Sliding-window eps_hat map. Window i uses a seed derived from (seed, i),
/// so the map does not depend on evaluation order.
RoughnessMap segment(const flowsim::Image& image, const appearance::TextonDictionary& dict,
                     const learn::RegressionModel& model, const SegmentConfig& config,
                     std::uint64_t seed);

}  // namespace flowssl::landing
