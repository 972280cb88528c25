#include "flowssl/landing.hpp"

#include <cmath>
#include <limits>

#include "flowssl/errors.hpp"
#include "flowssl/seed.hpp"

namespace flowssl::landing {

int classify_safety(double eps_star, double threshold) { return eps_star < threshold ? 1 : 0; }

ScanDecision select_scan_waypoint(std::span<const SafetyFrame> frames) {
  if (frames.empty()) throw InvalidArgument("scan selection needs at least one frame");
  std::size_t best_len = 0, best_begin = 0;
  std::size_t run_len = 0, run_begin = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].safe != 0 && frames[i].safe != 1) {
      throw InvalidArgument("safety flag must be 0 or 1");
    }
    if (frames[i].safe == 1) {
      if (run_len == 0) run_begin = i;
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_begin = run_begin;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) throw DegenerateData("no safe region along the scan path");

  ScanDecision d;
  d.run_begin = best_begin;
  d.run_end = best_begin + best_len - 1;
  d.safe_count = best_len;
  d.land_index = best_begin + (best_len - 1) / 2;
  d.land_frame_id = frames[d.land_index].frame_id;
  d.land_x = frames[d.land_index].x;
  d.land_y = frames[d.land_index].y;
  return d;
}

std::array<GridCell, 9> grid_cells(int width, int height) {
  if (width < 3 || height < 3) throw InvalidArgument("image too small for a 3x3 grid");
  const int cw = width / 3;
  const int ch = height / 3;
  const int ox = (width - 3 * cw) / 2;
  const int oy = (height - 3 * ch) / 2;
  std::array<GridCell, 9> cells;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      auto& cell = cells[static_cast<std::size_t>(r * 3 + c)];
      cell.region = {ox + c * cw, oy + r * ch, cw, ch};
      cell.center_x = ox + (c + 0.5) * cw;
      cell.center_y = oy + (r + 0.5) * ch;
    }
  }
  return cells;
}

double project_distance(double distance_px, double height, double focal_length_px) {
  if (!(focal_length_px > 0.0)) throw InvalidArgument("focal length must be positive");
  return distance_px * height / focal_length_px;
}

GridDecision choose_grid_cell(const std::array<double, 9>& values, double threshold,
                              const std::array<GridCell, 9>& cells, double image_center_x,
                              double image_center_y, double height, double focal_length_px) {
  GridDecision d;
  d.values = values;
  double min_value = std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("grid values must be finite");
    min_value = std::min(min_value, v);
  }
  if (min_value > threshold) return d;

  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 9; ++i) {
    if (values[i] != min_value) continue;
    const double dist =
        std::hypot(cells[i].center_x - image_center_x, cells[i].center_y - image_center_y);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  d.chosen = best;
  d.offset_x_px = cells[best].center_x - image_center_x;
  d.offset_y_px = cells[best].center_y - image_center_y;
  d.distance_px = best_dist;
  d.distance_m = project_distance(d.distance_px, height, focal_length_px);
  d.offset_x_m = project_distance(d.offset_x_px, height, focal_length_px);
  d.offset_y_m = project_distance(d.offset_y_px, height, focal_length_px);
  return d;
}

GridDecision grid_select(const flowsim::Image& image, const appearance::TextonDictionary& dict,
                         const learn::RegressionModel& model, double threshold,
                         const flowsim::CameraIntrinsics& camera, double height,
                         const appearance::PatchConfig& patches, std::uint64_t seed) {
  camera.validate();
  if (!(height > 0.0)) throw InvalidArgument("height must be positive");
  const auto cells = grid_cells(image.width(), image.height());
  std::array<double, 9> values{};
  for (std::size_t i = 0; i < 9; ++i) {
    const auto q = appearance::extract_histogram(image, cells[i].region, dict, patches,
                                                 derive_seed(seed, "grid", i));
    values[i] = learn::predict(model, q);
  }
  return choose_grid_cell(values, threshold, cells, camera.cx(), camera.cy(), height,
                          camera.focal_length_px);
}

int map_extent(int size, int window, int stride) {
  if (window < 1 || stride < 1) throw InvalidArgument("window and stride must be positive");
  if (size < window) throw InvalidArgument("image smaller than the segmentation window");
  return (size - window) / stride + 1;
}

RoughnessMap segment(const flowsim::Image& image, const appearance::TextonDictionary& dict,
                     const learn::RegressionModel& model, const SegmentConfig& config,
                     std::uint64_t seed) {
  RoughnessMap map;
  map.window = config.window;
  map.stride = config.stride;
  map.samples = config.samples;
  map.cols = map_extent(image.width(), config.window, config.stride);
  map.rows = map_extent(image.height(), config.window, config.stride);
  appearance::PatchConfig pc{config.patch_width, config.samples};
  map.values.resize(static_cast<std::size_t>(map.cols) * map.rows);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const auto idx = static_cast<std::size_t>(r) * map.cols + c;
      const appearance::Region win{c * config.stride, r * config.stride, config.window,
                                   config.window};
      const auto q = appearance::extract_histogram(image, win, dict, pc,
                                                   derive_seed(seed, "segment", idx));
      map.values[idx] = learn::predict(model, q);
    }
  }
  return map;
}

}  // namespace flowssl::landing
