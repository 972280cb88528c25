#include "flowssl/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowssl/errors.hpp"

namespace flowssl::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": not a number: '" + s + "'");
  }
}

std::int64_t to_int(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": not an integer: '" + s + "'");
  }
}

// Data rows of a CSV file after checking the header's leading columns.
std::vector<std::vector<std::string>> read_rows(const fs::path& path,
                                                const std::vector<std::string>& expected_prefix,
                                                std::string* metadata = nullptr) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (metadata) *metadata = line.substr(1);
      continue;
    }
    auto cells = split_csv_line(line);
    if (!header) {
      if (cells.size() < expected_prefix.size() ||
          !std::equal(expected_prefix.begin(), expected_prefix.end(), cells.begin())) {
        throw ParseError(path.string() + ": unexpected header '" + line + "'");
      }
      header = true;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  if (!header) throw ParseError(path.string() + ": missing header");
  return rows;
}

std::map<std::string, std::string> parse_metadata(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

void expect_columns(const std::vector<std::string>& row, std::size_t n, const fs::path& path) {
  if (row.size() != n) {
    throw ParseError(path.string() + ": expected " + std::to_string(n) + " columns, got " +
                     std::to_string(row.size()));
  }
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void write_ppm(const fs::path& path, const flowsim::Image& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.data().size());
  std::transform(image.data().begin(), image.data().end(), bytes.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

flowsim::Image read_ppm(const fs::path& path) {
  auto in = open_in(path);
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P6") throw ParseError(path.string() + ": not a binary PPM (P6)");
  const auto w = static_cast<int>(to_int(token(), path));
  const auto h = static_cast<int>(to_int(token(), path));
  const auto maxval = to_int(token(), path);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ParseError(path.string() + ": unsupported PPM geometry or maxval");
  }
  flowsim::Image img(w, h);
  std::vector<unsigned char> bytes(img.data().size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string() + ": truncated pixel data");
  }
  std::transform(bytes.begin(), bytes.end(), img.data().begin(),
                 [](unsigned char b) { return b / 255.0; });
  return img;
}

void write_flow_csv(const fs::path& path, std::span<const flowsim::FlowObservation> observations) {
  auto out = open_out(path);
  out << "frame_id,x,y,u,v,depth_truth,on_obstacle\n";
  for (const auto& obs : observations) {
    for (const auto& r : obs.records) {
      out << obs.frame_id << ',' << format_number(r.x) << ',' << format_number(r.y) << ','
          << format_number(r.u) << ',' << format_number(r.v) << ','
          << format_number(r.depth_truth) << ',' << (r.on_obstacle_truth ? 1 : 0) << '\n';
    }
  }
}

std::vector<flowsim::FlowObservation> read_flow_csv(const fs::path& path) {
  const auto rows = read_rows(path, {"frame_id", "x", "y", "u", "v", "depth_truth", "on_obstacle"});
  std::vector<flowsim::FlowObservation> out;
  for (const auto& row : rows) {
    expect_columns(row, 7, path);
    const auto id = to_int(row[0], path);
    if (out.empty() || out.back().frame_id != id) {
      out.emplace_back();
      out.back().frame_id = id;
    }
    flowsim::FlowRecord r;
    r.x = to_double(row[1], path);
    r.y = to_double(row[2], path);
    r.u = to_double(row[3], path);
    r.v = to_double(row[4], path);
    r.depth_truth = to_double(row[5], path);
    r.on_obstacle_truth = to_int(row[6], path) != 0;
    out.back().records.push_back(r);
  }
  return out;
}

void write_trajectory_csv(const fs::path& path,
                          std::span<const flowsim::FlowObservation> observations) {
  auto out = open_out(path);
  out << "frame_id,x,y,h,vx,vy,vz,p,q,r\n";
  for (const auto& obs : observations) {
    const auto& e = obs.ego;
    out << obs.frame_id << ',' << format_number(e.x) << ',' << format_number(e.y) << ','
        << format_number(e.height) << ',' << format_number(e.velocity.x) << ','
        << format_number(e.velocity.y) << ',' << format_number(e.velocity.z) << ','
        << format_number(e.rates.p) << ',' << format_number(e.rates.q) << ','
        << format_number(e.rates.r) << '\n';
  }
}

std::map<std::int64_t, flowsim::EgoState> read_trajectory_csv(const fs::path& path) {
  const auto rows = read_rows(path, {"frame_id", "x", "y", "h", "vx", "vy", "vz", "p", "q", "r"});
  std::map<std::int64_t, flowsim::EgoState> out;
  for (const auto& row : rows) {
    expect_columns(row, 10, path);
    flowsim::EgoState e;
    e.x = to_double(row[1], path);
    e.y = to_double(row[2], path);
    e.height = to_double(row[3], path);
    e.velocity = {to_double(row[4], path), to_double(row[5], path), to_double(row[6], path)};
    e.rates = {to_double(row[7], path), to_double(row[8], path), to_double(row[9], path)};
    out[to_int(row[0], path)] = e;
  }
  return out;
}

void write_fit_csv(const fs::path& path, const fs::path& coefficients,
                   std::span<const std::int64_t> frame_ids,
                   std::span<const flowfit::FlowFitResult> fits) {
  if (frame_ids.size() != fits.size()) throw InvalidArgument("frame ids and fits differ in length");
  auto out = open_out(path);
  auto side = open_out(coefficients);
  out << "frame_id,eps_u,eps_v,eps_star,inlier_count,corner_count\n";
  side << "frame_id,pu1,pu2,pu3,pu4,pu5,pv1,pv2,pv3,pv4,pv5\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    out << frame_ids[i] << ',' << format_number(f.eps_u) << ',' << format_number(f.eps_v) << ','
        << format_number(f.eps_star) << ',' << f.inlier_count() << ',' << f.corner_count << '\n';
    side << frame_ids[i];
    for (double c : f.params.pu) side << ',' << format_number(c);
    for (double c : f.params.pv) side << ',' << format_number(c);
    side << '\n';
  }
}

std::vector<FitRow> read_fit_csv(const fs::path& path) {
  const auto rows = read_rows(
      path, {"frame_id", "eps_u", "eps_v", "eps_star", "inlier_count", "corner_count"});
  std::vector<FitRow> out;
  for (const auto& row : rows) {
    expect_columns(row, 6, path);
    FitRow f;
    f.frame_id = to_int(row[0], path);
    f.eps_u = to_double(row[1], path);
    f.eps_v = to_double(row[2], path);
    f.eps_star = to_double(row[3], path);
    f.inlier_count = static_cast<std::size_t>(to_int(row[4], path));
    f.corner_count = static_cast<std::size_t>(to_int(row[5], path));
    out.push_back(f);
  }
  return out;
}

void write_dictionary_csv(const fs::path& path, const appearance::TextonDictionary& dict) {
  auto out = open_out(path);
  out << "# patch_width=" << dict.patch_width << " m=" << dict.size() << " seed=" << dict.seed
      << " epochs=" << dict.epochs << " eta0=" << format_number(dict.schedule.initial)
      << " eta1=" << format_number(dict.schedule.final) << '\n';
  const std::size_t len = dict.textons.empty() ? 0 : dict.textons.front().size();
  out << "texton";
  for (std::size_t k = 0; k < len; ++k) out << ",c" << k;
  out << '\n';
  for (std::size_t i = 0; i < dict.size(); ++i) {
    out << i;
    for (double v : dict.textons[i]) out << ',' << format_number(v);
    out << '\n';
  }
}

appearance::TextonDictionary read_dictionary_csv(const fs::path& path) {
  std::string meta;
  const auto rows = read_rows(path, {"texton"}, &meta);
  const auto kv = parse_metadata(meta);
  appearance::TextonDictionary dict;
  try {
    dict.patch_width = std::stoi(kv.at("patch_width"));
    dict.seed = std::stoull(kv.at("seed"));
    dict.epochs = std::stoi(kv.at("epochs"));
    dict.schedule = {std::stod(kv.at("eta0")), std::stod(kv.at("eta1"))};
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": incomplete dictionary metadata");
  }
  const auto expected = static_cast<std::size_t>(dict.patch_width * dict.patch_width * 3);
  for (const auto& row : rows) {
    expect_columns(row, expected + 1, path);
    appearance::Patch t(expected);
    for (std::size_t k = 0; k < expected; ++k) t[k] = to_double(row[k + 1], path);
    dict.textons.push_back(std::move(t));
  }
  if (kv.count("m") && std::to_string(dict.size()) != kv.at("m")) {
    throw ParseError(path.string() + ": texton count does not match metadata");
  }
  return dict;
}

void write_histograms_csv(const fs::path& path, std::span<const std::int64_t> frame_ids,
                          std::span<const appearance::TextonHistogram> histograms) {
  if (frame_ids.size() != histograms.size()) {
    throw InvalidArgument("frame ids and histograms differ in length");
  }
  auto out = open_out(path);
  out << "frame_id";
  const std::size_t m = histograms.empty() ? 0 : histograms.front().size();
  for (std::size_t k = 0; k < m; ++k) out << ",q" << k;
  out << '\n';
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    out << frame_ids[i];
    for (double v : histograms[i]) out << ',' << format_number(v);
    out << '\n';
  }
}

void write_regression_csv(const fs::path& path, const learn::RegressionModel& model) {
  auto out = open_out(path);
  out << "bias";
  for (std::size_t k = 0; k < model.rho.size(); ++k) out << ",rho" << k;
  out << '\n' << format_number(model.bias);
  for (double v : model.rho) out << ',' << format_number(v);
  out << '\n';
}

learn::RegressionModel read_regression_csv(const fs::path& path) {
  const auto rows = read_rows(path, {"bias"});
  if (rows.size() != 1) throw ParseError(path.string() + ": expected one coefficient row");
  learn::RegressionModel m;
  m.bias = to_double(rows[0][0], path);
  for (std::size_t k = 1; k < rows[0].size(); ++k) m.rho.push_back(to_double(rows[0][k], path));
  return m;
}

void write_naive_bayes_csv(const fs::path& path, const learn::NaiveBayesModel& model) {
  auto out = open_out(path);
  out << "class,prior,alpha,patch_count";
  for (std::size_t k = 0; k < model.likelihoods[0].size(); ++k) out << ",l" << k;
  out << '\n';
  const char* names[2] = {"obstacle", "clear"};
  for (std::size_t c = 0; c < 2; ++c) {
    out << names[c] << ',' << format_number(model.priors[c]) << ',' << format_number(model.alpha)
        << ',' << format_number(model.patch_count);
    for (double v : model.likelihoods[c]) out << ',' << format_number(v);
    out << '\n';
  }
}

learn::NaiveBayesModel read_naive_bayes_csv(const fs::path& path) {
  const auto rows = read_rows(path, {"class", "prior", "alpha", "patch_count"});
  if (rows.size() != 2 || rows[0][0] != "obstacle" || rows[1][0] != "clear") {
    throw ParseError(path.string() + ": expected rows 'obstacle' and 'clear'");
  }
  learn::NaiveBayesModel m;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& row = rows[c];
    if (row.size() < 5) throw ParseError(path.string() + ": missing likelihood columns");
    m.priors[c] = to_double(row[1], path);
    m.alpha = to_double(row[2], path);
    m.patch_count = to_double(row[3], path);
    for (std::size_t k = 4; k < row.size(); ++k) m.likelihoods[c].push_back(to_double(row[k], path));
  }
  if (m.likelihoods[0].size() != m.likelihoods[1].size()) {
    throw ParseError(path.string() + ": likelihood rows differ in length");
  }
  return m;
}

void write_roughness_map_csv(const fs::path& path, const landing::RoughnessMap& map) {
  auto out = open_out(path);
  out << "# cols=" << map.cols << " rows=" << map.rows << " window=" << map.window
      << " stride=" << map.stride << " samples=" << map.samples << '\n';
  out << "row";
  for (int c = 0; c < map.cols; ++c) out << ",c" << c;
  out << '\n';
  for (int r = 0; r < map.rows; ++r) {
    out << r;
    for (int c = 0; c < map.cols; ++c) out << ',' << format_number(map.at(c, r));
    out << '\n';
  }
}

void write_heatmap_ppm(const fs::path& path, const landing::RoughnessMap& map) {
  flowsim::Image img(map.cols, map.rows);
  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = map.values.empty() ? 0.0 : *lo_it;
  const double hi = map.values.empty() ? 1.0 : *hi_it;
  const flowsim::Rgb low{0.2, 0.0, 0.0}, high{1.0, 1.0, 0.6};
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const double t = hi > lo ? (map.at(c, r) - lo) / (hi - lo) : 0.0;
      img.set(c, r, {low.r + t * (high.r - low.r), low.g + t * (high.g - low.g),
                     low.b + t * (high.b - low.b)});
    }
  }
  write_ppm(path, img);
}

std::string format_scan_decision(const landing::ScanDecision& d) {
  std::ostringstream s;
  s << "run_begin=" << d.run_begin << " run_end=" << d.run_end << " a_sf=" << d.safe_count
    << " land_index=" << d.land_index << " land_frame_id=" << d.land_frame_id
    << " land_x=" << format_number(d.land_x) << " land_y=" << format_number(d.land_y);
  return s.str();
}

std::string format_grid_decision(const landing::GridDecision& d) {
  std::ostringstream s;
  s << "values=";
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    s << (i ? ";" : "") << format_number(d.values[i]);
  }
  if (d.chosen) {
    s << " decision=land region=" << *d.chosen << " d_c_px=" << format_number(d.distance_px)
      << " d_p_m=" << format_number(d.distance_m) << " dx_m=" << format_number(d.offset_x_m)
      << " dy_m=" << format_number(d.offset_y_m);
  } else {
    s << " decision=reject";
  }
  return s.str();
}

}  // namespace flowssl::io
