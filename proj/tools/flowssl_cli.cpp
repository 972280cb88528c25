// Command-line front end. Exit codes: 0 success, 2 configuration or parse
// error, 3 degenerate data, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowssl/appearance.hpp"
#include "flowssl/errors.hpp"
#include "flowssl/flowfit.hpp"
#include "flowssl/io.hpp"
#include "flowssl/landing.hpp"
#include "flowssl/learn.hpp"
#include "flowssl/pipeline.hpp"
#include "flowssl/scenario.hpp"
#include "flowssl/seed.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace flowssl;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::string out = "out";
};

std::string frame_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05lld.ppm", static_cast<long long>(id));
  return buf;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Pipeline overrides live under a "pipeline" object of the --config file.
harness::PipelineConfig pipeline_config(const Globals& g) {
  harness::PipelineConfig c;
  if (g.config.empty()) return c;
  const auto doc = read_json(g.config);
  if (!doc.contains("pipeline")) return c;
  const auto& p = doc.at("pipeline");
  try {
    if (p.contains("fit_order")) {
      const auto s = p.at("fit_order").get<std::string>();
      if (s != "linear" && s != "quadratic") throw ParseError("fit_order must be linear or quadratic");
      c.fit_order = s == "linear" ? flowfit::FitOrder::linear : flowfit::FitOrder::quadratic;
    }
    c.ransac_iterations = p.value("ransac_iterations", c.ransac_iterations);
    c.detect_obstacle_height = p.value("detect_obstacle_height", c.detect_obstacle_height);
    c.patches.width = p.value("patch_width", c.patches.width);
    c.patches.samples_per_image = p.value("samples_per_image", c.patches.samples_per_image);
    c.dictionary_size = p.value("dictionary_size", c.dictionary_size);
    c.dictionary_epochs = p.value("dictionary_epochs", c.dictionary_epochs);
    c.schedule.initial = p.value("learning_rate_initial", c.schedule.initial);
    c.schedule.final = p.value("learning_rate_final", c.schedule.final);
    c.dictionary_patches_per_frame =
        p.value("dictionary_patches_per_frame", c.dictionary_patches_per_frame);
    c.dictionary_max_patches = p.value("dictionary_max_patches", c.dictionary_max_patches);
    c.ridge = p.value("ridge", c.ridge);
    c.nb_alpha = p.value("nb_alpha", c.nb_alpha);
    c.nb_patch_count = p.value("nb_patch_count", c.nb_patch_count);
    c.nb_labels_from_prediction = p.value("nb_labels_from_prediction", c.nb_labels_from_prediction);
  } catch (const json::exception& e) {
    throw ParseError(g.config + ": " + e.what());
  }
  c.patches.validate();
  return c;
}

// Scenario from --config when it describes one, otherwise a built-in scene.
scenario::ScenarioSpec scenario_from(const Globals& g, const std::string& builtin) {
  if (!g.config.empty()) {
    auto doc = read_json(g.config);
    if (doc.contains("trajectory")) {
      auto spec = scenario::parse_scenario(doc.dump());
      if (g.seed_given) spec.seed = g.seed;
      return spec;
    }
  }
  if (builtin == "familiar") return scenario::familiar_scene(g.seed);
  if (builtin == "unfamiliar") return scenario::unfamiliar_scene(g.seed);
  if (builtin.rfind("suite", 0) == 0) {
    const auto suite = scenario::evaluation_suite(g.seed);
    int idx = 0;
    try {
      idx = builtin.size() > 5 ? std::stoi(builtin.substr(5)) : 1;
    } catch (const std::exception&) {
      throw InvalidArgument("unknown scene '" + builtin + "'");
    }
    if (idx < 1 || idx > static_cast<int>(suite.size())) {
      throw InvalidArgument("suite scenes are suite1..suite" + std::to_string(suite.size()));
    }
    return suite[static_cast<std::size_t>(idx - 1)];
  }
  throw InvalidArgument("unknown scene '" + builtin + "' (familiar, unfamiliar, suite1..suite9)");
}

std::vector<std::pair<std::int64_t, fs::path>> list_frames(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("not a directory: " + dir);
  std::vector<std::pair<std::int64_t, fs::path>> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.path().extension() != ".ppm" || name.rfind("frame_", 0) != 0) continue;
    try {
      out.emplace_back(std::stoll(name.substr(6)), e.path());
    } catch (const std::exception&) {
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InvalidArgument("no frame_*.ppm images in " + dir);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowssl: optical-flow supervised appearance learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON scenario and/or {\"pipeline\": {...}} overrides");
  app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--out", g.out, "output directory");

  // simulate
  auto* sim = app.add_subcommand("simulate", "scenario -> flow CSV, trajectory CSV, PPM frames");
  std::string sim_scene = "familiar";
  int sim_frames = 0;
  bool sim_no_images = false;
  sim->add_option("--scene", sim_scene, "built-in scene when --config has no scenario");
  sim->add_option("--frames", sim_frames, "limit the number of frames (0 = all)");
  sim->add_flag("--no-images", sim_no_images, "skip PPM output");

  // fit
  auto* fit = app.add_subcommand("fit", "flow CSV -> roughness CSV");
  std::string fit_flow, fit_traj, fit_order = "quadratic";
  double fit_sigma = 0.0, fit_dh = 0.03;
  int fit_iterations = 100;
  fit->add_option("--flow", fit_flow, "flow CSV")->required();
  fit->add_option("--trajectory", fit_traj, "trajectory CSV (rates, height, speed)")->required();
  fit->add_option("--sigma", fit_sigma, "flow noise sigma used for the inlier threshold");
  fit->add_option("--obstacle-height", fit_dh, "detectable obstacle height, m");
  fit->add_option("--iterations", fit_iterations, "RANSAC iterations");
  fit->add_option("--order", fit_order, "linear or quadratic")
      ->check(CLI::IsMember({"linear", "quadratic"}));

  // train-textons
  auto* tt = app.add_subcommand("train-textons", "PPM frames -> texton dictionary");
  std::string tt_images;
  int tt_m = 30, tt_epochs = 10, tt_per_image = 20, tt_width = 5;
  tt->add_option("--images", tt_images, "directory of frame_*.ppm")->required();
  tt->add_option("--textons", tt_m, "dictionary size");
  tt->add_option("--epochs", tt_epochs, "training epochs");
  tt->add_option("--patches-per-image", tt_per_image, "patches sampled per image");
  tt->add_option("--patch-width", tt_width, "patch side in pixels");

  // train-ssl
  auto* ts = app.add_subcommand("train-ssl", "frames + roughness -> regression and Naive Bayes");
  std::string ts_images, ts_fit, ts_dict, ts_traj;
  ts->add_option("--images", ts_images, "directory of frame_*.ppm")->required();
  ts->add_option("--fit", ts_fit, "roughness CSV from 'fit'")->required();
  ts->add_option("--dictionary", ts_dict, "dictionary CSV")->required();
  ts->add_option("--trajectory", ts_traj, "trajectory CSV for per-frame thresholds");

  // predict
  auto* pr = app.add_subcommand("predict", "frames -> predicted roughness");
  std::string pr_images, pr_dict, pr_reg, pr_nb;
  pr->add_option("--images", pr_images, "directory of frame_*.ppm")->required();
  pr->add_option("--dictionary", pr_dict, "dictionary CSV")->required();
  pr->add_option("--regression", pr_reg, "regression CSV")->required();
  pr->add_option("--naive-bayes", pr_nb, "Naive Bayes CSV");

  // segment
  auto* sg = app.add_subcommand("segment", "image -> sliding-window roughness map");
  std::string sg_image, sg_dict, sg_reg;
  landing::SegmentConfig sg_cfg;
  sg->add_option("--image", sg_image, "PPM image")->required();
  sg->add_option("--dictionary", sg_dict, "dictionary CSV")->required();
  sg->add_option("--regression", sg_reg, "regression CSV")->required();
  sg->add_option("--window", sg_cfg.window, "window side, pixels");
  sg->add_option("--stride", sg_cfg.stride, "window stride, pixels");
  sg->add_option("--samples", sg_cfg.samples, "patches per window");

  // land-scan
  auto* ls = app.add_subcommand("land-scan", "roughness along a scan path -> landing waypoint");
  std::string ls_fit, ls_traj;
  double ls_dh = 0.03;
  ls->add_option("--fit", ls_fit, "roughness CSV from 'fit'")->required();
  ls->add_option("--trajectory", ls_traj, "trajectory CSV")->required();
  ls->add_option("--obstacle-height", ls_dh, "detectable obstacle height, m");

  // land-grid
  auto* lg = app.add_subcommand("land-grid", "hover image -> 3x3 grid landing choice");
  std::string lg_image, lg_dict, lg_reg;
  double lg_threshold = 0.0, lg_height = 3.0, lg_focal = 150.0;
  int lg_samples = 50;
  lg->add_option("--image", lg_image, "PPM image")->required();
  lg->add_option("--dictionary", lg_dict, "dictionary CSV")->required();
  lg->add_option("--regression", lg_reg, "regression CSV")->required();
  lg->add_option("--threshold", lg_threshold, "rejection threshold on predicted roughness")->required();
  lg->add_option("--height", lg_height, "hover height, m");
  lg->add_option("--focal", lg_focal, "focal length, pixels");
  lg->add_option("--samples", lg_samples, "patches per grid cell");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "K-fold evaluation on the built-in scene suite");
  std::string ev_protocol = "all";
  ev->add_option("--protocol", ev_protocol, "kfold1, kfold2 or all")
      ->check(CLI::IsMember({"kfold1", "kfold2", "all"}));

  // bench
  auto* bn = app.add_subcommand("bench", "per-frame processing time");
  int bn_frames = 200, bn_corners = 25, bn_samples = 25;
  std::string bn_scene = "familiar";
  bn->add_option("--frames", bn_frames, "timed frames");
  bn->add_option("--corners", bn_corners, "corner budget");
  bn->add_option("--samples", bn_samples, "patches per image");
  bn->add_option("--scene", bn_scene, "built-in scene when --config has no scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fs::path out(g.out);
    if (*sim) {
      auto spec = scenario_from(g, sim_scene);
      if (sim_frames > 0) spec.trajectory.max_frames = sim_frames;
      spec.validate();
      const auto states = spec.states();
      const auto texture_seed = derive_seed(spec.seed, "texture");
      std::vector<flowsim::FlowObservation> obs;
      for (std::size_t i = 0; i < states.size(); ++i) {
        const auto id = static_cast<std::int64_t>(i);
        obs.push_back(flowsim::observe_flow(spec.scene, spec.camera, states[i], spec.flow,
                                            derive_seed(spec.seed, "flow", i), id));
        if (!sim_no_images) {
          io::write_ppm(out / "frames" / frame_name(id),
                        flowsim::render_view(spec.scene, spec.camera, states[i], texture_seed));
        }
      }
      io::write_flow_csv(out / "flow.csv", obs);
      io::write_trajectory_csv(out / "trajectory.csv", obs);
      write_text(out / "scenario.json", scenario::scenario_to_json(spec) + "\n");
      std::cout << "frames=" << obs.size() << " out=" << out.string() << "\n";
    } else if (*fit) {
      const auto flows = io::read_flow_csv(fit_flow);
      const auto egos = io::read_trajectory_csv(fit_traj);
      const auto order = fit_order == "linear" ? flowfit::FitOrder::linear : flowfit::FitOrder::quadratic;
      std::vector<std::int64_t> ids;
      std::vector<flowfit::FlowFitResult> fits;
      for (const auto& f : flows) {
        const auto it = egos.find(f.frame_id);
        if (it == egos.end()) throw ParseError("no trajectory row for frame " + std::to_string(f.frame_id));
        auto obs = f;
        obs.ego = it->second;
        const auto derotated = flowfit::derotate(obs, obs.ego.rates);
        flowfit::ThresholdQuery q;
        q.velocity_x = std::hypot(obs.ego.velocity.x, obs.ego.velocity.y);
        q.height = obs.ego.height;
        q.obstacle_height = fit_dh;
        auto rc = flowfit::RansacConfig::make_default(
            derotated.records.size(), fit_sigma, q,
            derive_seed(g.seed, "ransac", static_cast<std::uint64_t>(f.frame_id)), order);
        rc.iterations = fit_iterations;
        try {
          fits.push_back(flowfit::ransac_fit(derotated, rc));
        } catch (const flowfit::NoConsensus& e) {
          fits.push_back(e.best());
        }
        ids.push_back(f.frame_id);
      }
      io::write_fit_csv(out / "fit.csv", out / "fit_coefficients.csv", ids, fits);
      std::cout << "frames=" << fits.size() << "\n";
    } else if (*tt) {
      const appearance::PatchConfig pc{tt_width, tt_per_image};
      pc.validate();
      std::vector<appearance::Patch> pool;
      for (const auto& [id, path] : list_frames(tt_images)) {
        const auto img = io::read_ppm(path);
        auto p = appearance::sample_patches(img, tt_per_image, pc,
                                            derive_seed(g.seed, "dictionary_patches",
                                                        static_cast<std::uint64_t>(id)));
        pool.insert(pool.end(), p.begin(), p.end());
      }
      const auto dict = appearance::train_dictionary(pool, tt_m, tt_epochs, {0.1, 0.01},
                                                     derive_seed(g.seed, "dictionary"), tt_width);
      io::write_dictionary_csv(out / "dictionary.csv", dict);
      std::cout << "textons=" << dict.size() << " patches=" << pool.size() << "\n";
    } else if (*ts) {
      const auto cfg = pipeline_config(g);
      const auto dict = io::read_dictionary_csv(ts_dict);
      const appearance::PatchConfig pc{dict.patch_width, cfg.patches.samples_per_image};
      std::map<std::int64_t, double> eps;
      for (const auto& r : io::read_fit_csv(ts_fit)) eps[r.frame_id] = r.eps_star;
      std::map<std::int64_t, flowsim::EgoState> egos;
      if (!ts_traj.empty()) egos = io::read_trajectory_csv(ts_traj);
      learn::TrainingSet set;
      std::vector<std::int64_t> ids;
      std::vector<double> thresholds;
      for (const auto& [id, path] : list_frames(ts_images)) {
        const auto it = eps.find(id);
        if (it == eps.end()) continue;
        set.inputs.push_back(appearance::extract_histogram(
            io::read_ppm(path), dict, pc,
            derive_seed(g.seed, "ssl_patches", static_cast<std::uint64_t>(id))));
        set.targets.push_back(it->second);
        ids.push_back(id);
        const auto e = egos.find(id);
        thresholds.push_back(e == egos.end()
                                 ? 0.0
                                 : harness::frame_threshold(e->second, cfg.detect_obstacle_height));
      }
      if (set.inputs.empty()) throw DegenerateData("no frame has both an image and a roughness row");
      const auto model = learn::fit_regression(set, cfg.ridge);
      io::write_histograms_csv(out / "histograms.csv", ids, set.inputs);
      io::write_regression_csv(out / "regression.csv", model);
      if (!egos.empty()) {
        std::vector<double> hats;
        std::vector<bool> rough;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          hats.push_back(learn::predict(model, set.inputs[i]));
          rough.push_back(set.targets[i] > thresholds[i]);
        }
        const double hat_threshold = harness::calibrate_threshold(hats, rough);
        std::vector<learn::ObstacleClass> labels;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          labels.push_back(cfg.nb_labels_from_prediction
                               ? learn::label(hats[i], hat_threshold)
                               : learn::label(set.targets[i], thresholds[i]));
        }
        const bool both = std::count(labels.begin(), labels.end(), learn::ObstacleClass::obstacle) > 0 &&
                          std::count(labels.begin(), labels.end(), learn::ObstacleClass::clear) > 0;
        std::cout << "eps_hat_threshold=" << io::format_number(hat_threshold) << "\n";
        if (both) {
          io::write_naive_bayes_csv(out / "naive_bayes.csv",
                                    learn::fit_naive_bayes(set.inputs, labels, cfg.nb_alpha,
                                                           cfg.nb_patch_count));
        } else {
          std::cerr << "note: training frames hold one class only; Naive Bayes not written\n";
        }
      }
      std::cout << "training_frames=" << ids.size() << "\n";
    } else if (*pr) {
      const auto cfg = pipeline_config(g);
      const auto dict = io::read_dictionary_csv(pr_dict);
      const auto model = io::read_regression_csv(pr_reg);
      std::optional<learn::NaiveBayesModel> nb;
      if (!pr_nb.empty()) nb = io::read_naive_bayes_csv(pr_nb);
      const appearance::PatchConfig pc{dict.patch_width, cfg.patches.samples_per_image};
      fs::create_directories(out);
      std::ofstream csv(out / "predictions.csv", std::ios::binary);
      csv << "frame_id,eps_hat,p_obstacle,entropy\n";
      for (const auto& [id, path] : list_frames(pr_images)) {
        const auto q = appearance::extract_histogram(
            io::read_ppm(path), dict, pc,
            derive_seed(g.seed, "ssl_patches", static_cast<std::uint64_t>(id)));
        csv << id << ',' << io::format_number(learn::predict(model, q));
        if (nb) {
          const auto post = learn::posterior(*nb, q, nb->patch_count);
          csv << ',' << io::format_number(post[0]) << ',' << io::format_number(learn::entropy(post));
        } else {
          csv << ",NA,NA";
        }
        csv << '\n';
      }
    } else if (*sg) {
      const auto img = io::read_ppm(sg_image);
      const auto dict = io::read_dictionary_csv(sg_dict);
      sg_cfg.patch_width = dict.patch_width;
      const auto map = landing::segment(img, dict, io::read_regression_csv(sg_reg), sg_cfg,
                                        derive_seed(g.seed, "segment"));
      io::write_roughness_map_csv(out / "roughness_map.csv", map);
      io::write_heatmap_ppm(out / "roughness_map.ppm", map);
      std::cout << "cols=" << map.cols << " rows=" << map.rows << "\n";
    } else if (*ls) {
      const auto rows = io::read_fit_csv(ls_fit);
      const auto egos = io::read_trajectory_csv(ls_traj);
      std::vector<landing::SafetyFrame> frames;
      for (const auto& r : rows) {
        const auto it = egos.find(r.frame_id);
        if (it == egos.end()) throw ParseError("no trajectory row for frame " + std::to_string(r.frame_id));
        const double th = harness::frame_threshold(it->second, ls_dh);
        frames.push_back({r.frame_id, it->second.x, it->second.y,
                          landing::classify_safety(r.eps_star, th)});
      }
      const auto line = io::format_scan_decision(landing::select_scan_waypoint(frames));
      write_text(out / "land_scan.txt", line + "\n");
      std::cout << line << "\n";
    } else if (*lg) {
      const auto img = io::read_ppm(lg_image);
      flowsim::CameraIntrinsics cam;
      cam.width = img.width();
      cam.height = img.height();
      cam.focal_length_px = lg_focal;
      const auto dict = io::read_dictionary_csv(lg_dict);
      const appearance::PatchConfig pc{dict.patch_width, lg_samples};
      const auto d = landing::grid_select(img, dict, io::read_regression_csv(lg_reg), lg_threshold,
                                          cam, lg_height, pc, derive_seed(g.seed, "grid"));
      const auto line = io::format_grid_decision(d);
      write_text(out / "land_grid.txt", line + "\n");
      std::cout << line << "\n";
    } else if (*ev) {
      harness::EvaluateOptions opts;
      opts.seed = g.seed;
      opts.pipeline = pipeline_config(g);
      if (ev_protocol == "kfold1") opts.protocols = {harness::Protocol::kfold1};
      if (ev_protocol == "kfold2") opts.protocols = {harness::Protocol::kfold2};
      const auto report = harness::evaluate(opts, out);
      for (const auto& [p, folds] : report.protocols) {
        const auto s = harness::summarize_protocol(folds);
        std::cout << harness::protocol_name(p) << " mean_auc=" << io::format_number(s.mean_auc)
                  << " min_auc=" << io::format_number(s.min_auc)
                  << " mean_nrmse=" << io::format_number(s.mean_nrmse)
                  << " err=" << io::format_number(s.err)
                  << " mean_entropy=" << io::format_number(s.mean_entropy) << "\n";
      }
    } else if (*bn) {
      auto cfg = pipeline_config(g);
      cfg.patches.samples_per_image = bn_samples;
      auto spec = scenario_from(g, bn_scene);
      spec.flow.corner_budget = bn_corners;
      const auto r = harness::benchmark_pipeline(spec, cfg, static_cast<std::size_t>(bn_frames));
      std::cout << "frames=" << r.frames << " fit_ms=" << io::format_number(r.fit_ms)
                << " histogram_ms=" << io::format_number(r.histogram_ms)
                << " predict_ms=" << io::format_number(r.predict_ms)
                << " combined_ms=" << io::format_number(r.combined_ms()) << "\n";
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateData& e) {
    std::cerr << "degenerate data: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
