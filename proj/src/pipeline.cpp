#include "flowssl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "flowssl/errors.hpp"
#include "flowssl/io.hpp"
#include "flowssl/seed.hpp"

namespace flowssl::harness {

namespace fs = std::filesystem;
using appearance::Patch;
using appearance::TextonHistogram;

double frame_threshold(const flowsim::EgoState& ego, double detect_obstacle_height) {
  flowfit::ThresholdQuery q;
  q.velocity_x = std::hypot(ego.velocity.x, ego.velocity.y);
  q.height = ego.height;
  q.obstacle_height = detect_obstacle_height;
  q.focal_length = 1.0;
  return flowfit::roughness_threshold(q);
}

FrameFlow process_flow(const scenario::ScenarioSpec& spec, const flowsim::EgoState& ego,
                       std::int64_t frame_id, const PipelineConfig& config) {
  const auto id = static_cast<std::uint64_t>(frame_id);
  FrameFlow out;
  const auto raw = flowsim::observe_flow(spec.scene, spec.camera, ego, spec.flow,
                                         derive_seed(spec.seed, "flow", id), frame_id);
  out.observation = flowfit::derotate(raw, ego.rates);

  flowfit::ThresholdQuery query;
  query.velocity_x = std::hypot(ego.velocity.x, ego.velocity.y);
  query.height = ego.height;
  query.obstacle_height = config.detect_obstacle_height;
  auto ransac = flowfit::RansacConfig::make_default(
      out.observation.records.size(), spec.flow.noise_sigma, query,
      derive_seed(spec.seed, "ransac", id), config.fit_order);
  ransac.iterations = config.ransac_iterations;
  try {
    out.fit = flowfit::ransac_fit(out.observation, ransac);
  } catch (const flowfit::NoConsensus& e) {
    out.fit = e.best();
    out.consensus = false;
  }
  return out;
}

SceneDataset generate_dataset(const scenario::ScenarioSpec& spec, const PipelineConfig& config) {
  spec.validate();
  config.patches.validate();
  SceneDataset data;
  data.name = spec.name;
  data.camera = spec.camera;
  const auto texture_seed = derive_seed(spec.seed, "texture");
  const auto states = spec.states();
  data.frames.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& ego = states[i];
    const auto id = static_cast<std::int64_t>(i);
    const auto flow = process_flow(spec, ego, id, config);

    FrameSample s;
    s.frame_id = id;
    s.ego = ego;
    s.eps_u = flow.fit.eps_u;
    s.eps_v = flow.fit.eps_v;
    s.eps_star = flow.fit.eps_star;
    s.inliers = flow.fit.inlier_count();
    s.corners = flow.fit.corner_count;
    s.consensus = flow.consensus;
    s.threshold = frame_threshold(ego, config.detect_obstacle_height);

    const auto labels = flowsim::surface_labels(spec.scene, spec.camera, ego);
    const auto on_obstacle = std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; });
    s.obstacle_visible = on_obstacle > 0;
    s.obstacle_fraction = labels.empty() ? 0.0 : static_cast<double>(on_obstacle) / labels.size();

    const auto image = flowsim::render_view(spec.scene, spec.camera, ego, texture_seed);
    s.ssl_patches = appearance::sample_patches(image, config.patches.samples_per_image,
                                               config.patches,
                                               derive_seed(spec.seed, "ssl_patches", i));
    s.dictionary_patches = appearance::sample_patches(
        image, config.dictionary_patches_per_frame, config.patches,
        derive_seed(spec.seed, "dictionary_patches", i));
    data.frames.push_back(std::move(s));
  }
  return data;
}

const char* protocol_name(Protocol p) { return p == Protocol::kfold1 ? "kfold1" : "kfold2"; }

FoldPlan make_kfold1_plan(const std::vector<SceneDataset>& data, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("kfold1 needs at least 2 parts");
  FoldPlan plan;
  plan.protocol = Protocol::kfold1;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t s = 0; s < data.size(); ++s) {
    plan.scenes.push_back(data[s].name);
    const std::size_t n = data[s].frames.size();
    if (n < static_cast<std::size_t>(k)) {
      throw InvalidArgument("scene '" + data[s].name + "' has fewer frames than folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, "kfold1", s));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t part = 0; part < plan.folds.size(); ++part) {
      const std::size_t lo = part * n / plan.folds.size();
      const std::size_t hi = (part + 1) * n / plan.folds.size();
      for (std::size_t j = 0; j < n; ++j) {
        const SampleRef ref{s, order[j]};
        auto& fold = plan.folds[part];
        (j >= lo && j < hi ? fold.test : fold.train).push_back(ref);
      }
    }
  }
  for (auto& f : plan.folds) {
    std::sort(f.train.begin(), f.train.end());
    std::sort(f.test.begin(), f.test.end());
  }
  return plan;
}

FoldPlan make_kfold2_plan(const std::vector<SceneDataset>& data) {
  if (data.size() < 2) throw InvalidArgument("kfold2 needs at least 2 scenes");
  FoldPlan plan;
  plan.protocol = Protocol::kfold2;
  for (std::size_t held = 0; held < data.size(); ++held) {
    plan.scenes.push_back(data[held].name);
    Fold fold;
    for (std::size_t s = 0; s < data.size(); ++s) {
      for (std::size_t f = 0; f < data[s].frames.size(); ++f) {
        (s == held ? fold.test : fold.train).push_back({s, f});
      }
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

double calibrate_threshold(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.empty() || scores.size() != positive.size()) {
    throw InvalidArgument("calibration needs equally long, non-empty inputs");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Cut below everything: every negative is wrong.
  std::size_t errors = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), false));
  std::size_t best_errors = errors;
  double best_cut = scores[order.front()] - 1.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      errors += positive[order[j]] ? 1 : 0;
      errors -= positive[order[j]] ? 0 : 1;
      ++j;
    }
    if (errors < best_errors) {
      best_errors = errors;
      best_cut = j < order.size() ? 0.5 * (scores[order[i]] + scores[order[j]]) : scores[order[i]];
    }
    i = j;
  }
  return best_cut;
}

SslModel train_ssl(const std::vector<const FrameSample*>& train, const PipelineConfig& config,
                   std::uint64_t seed) {
  if (train.empty()) throw InvalidArgument("empty training set");
  std::vector<Patch> pool;
  for (const auto* f : train) {
    pool.insert(pool.end(), f->dictionary_patches.begin(), f->dictionary_patches.end());
  }
  if (config.dictionary_max_patches > 0 &&
      pool.size() > static_cast<std::size_t>(config.dictionary_max_patches)) {
    std::mt19937_64 rng(derive_seed(seed, "dictionary_pool"));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(config.dictionary_max_patches));
  }

  SslModel model;
  model.dictionary = appearance::train_dictionary(pool, config.dictionary_size,
                                                  config.dictionary_epochs, config.schedule,
                                                  derive_seed(seed, "dictionary"),
                                                  config.patches.width);

  learn::TrainingSet set;
  for (const auto* f : train) {
    set.inputs.push_back(appearance::histogram_of(f->ssl_patches, model.dictionary));
    set.targets.push_back(f->eps_star);
  }
  model.regression = learn::fit_regression(set, config.ridge);

  std::vector<double> hats;
  std::vector<bool> flow_positive;
  for (std::size_t i = 0; i < train.size(); ++i) {
    hats.push_back(learn::predict(model.regression, set.inputs[i]));
    flow_positive.push_back(set.targets[i] > train[i]->threshold);
  }
  model.eps_hat_threshold = calibrate_threshold(hats, flow_positive);

  std::vector<learn::ObstacleClass> labels;
  for (std::size_t i = 0; i < train.size(); ++i) {
    labels.push_back(config.nb_labels_from_prediction
                         ? learn::label(hats[i], model.eps_hat_threshold)
                         : learn::label(set.targets[i], train[i]->threshold));
  }
  const bool both = std::count(labels.begin(), labels.end(), learn::ObstacleClass::obstacle) > 0 &&
                    std::count(labels.begin(), labels.end(), learn::ObstacleClass::clear) > 0;
  if (both) {
    model.naive_bayes = learn::fit_naive_bayes(set.inputs, labels, config.nb_alpha,
                                               config.nb_patch_count);
  }
  return model;
}

std::vector<Prediction> predict_frames(const SslModel& model,
                                       const std::vector<const FrameSample*>& frames,
                                       const PipelineConfig& config) {
  std::vector<Prediction> out;
  out.reserve(frames.size());
  for (const auto* f : frames) {
    Prediction p;
    const auto q = appearance::histogram_of(f->ssl_patches, model.dictionary);
    p.eps_star = f->eps_star;
    p.eps_hat = learn::predict(model.regression, q);
    p.threshold = f->threshold;
    p.eps_hat_threshold = model.eps_hat_threshold;
    p.truth = f->obstacle_visible;
    if (model.naive_bayes) {
      const auto post = learn::posterior(*model.naive_bayes, q, config.nb_patch_count);
      p.p_obstacle = post[0];
      p.entropy = learn::entropy(post);
      p.nb_class = learn::classify(post);
    }
    out.push_back(p);
  }
  return out;
}

namespace {

learn::ObstacleClass truth_class(const Prediction& p) {
  return p.truth ? learn::ObstacleClass::obstacle : learn::ObstacleClass::clear;
}

double pooled_err(const std::vector<const Prediction*>& preds) {
  std::vector<learn::ObstacleClass> predicted, truth;
  for (const auto* p : preds) {
    predicted.push_back(p->nb_class);
    truth.push_back(truth_class(*p));
  }
  return classification_error(predicted, truth);
}

}  // namespace

TestMetrics summarize(const std::vector<Prediction>& predictions, bool have_naive_bayes) {
  TestMetrics m;
  m.count = predictions.size();
  if (predictions.empty()) return m;

  std::vector<LabeledScore> scores, margins;
  std::vector<double> hats, stars;
  for (const auto& p : predictions) {
    scores.push_back({p.eps_hat, p.truth});
    margins.push_back({p.eps_hat - p.threshold, p.truth});
    hats.push_back(p.eps_hat);
    stars.push_back(p.eps_star);
  }
  try {
    m.auc = roc(scores).auc;
  } catch (const DegenerateData&) {
  }
  try {
    m.nrmse = learn::nrmse(hats, stars);
  } catch (const DegenerateData&) {
  }
  m.rates = tp_fp_rates(margins, 0.0);
  if (have_naive_bayes) {
    std::vector<const Prediction*> ptrs;
    double h = 0.0;
    for (const auto& p : predictions) {
      ptrs.push_back(&p);
      h += p.entropy;
    }
    m.err = pooled_err(ptrs);
    m.mean_entropy = h / static_cast<double>(predictions.size());
  }
  return m;
}

std::vector<FoldResult> run_kfold(const FoldPlan& plan, const std::vector<SceneDataset>& data,
                                  const PipelineConfig& config, std::uint64_t seed) {
  auto deref = [&](const std::vector<SampleRef>& refs) {
    std::vector<const FrameSample*> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(&data.at(r.scene).frames.at(r.frame));
    return out;
  };
  std::vector<FoldResult> results;
  for (std::size_t i = 0; i < plan.folds.size(); ++i) {
    const auto& fold = plan.folds[i];
    const auto model = train_ssl(deref(fold.train), config,
                                 derive_seed(seed, protocol_name(plan.protocol), i));
    FoldResult r;
    r.fold = i;
    r.train_count = fold.train.size();
    r.test = fold.test;
    r.predictions = predict_frames(model, deref(fold.test), config);
    r.metrics = summarize(r.predictions, model.naive_bayes.has_value());
    results.push_back(std::move(r));
  }
  return results;
}

ProtocolSummary summarize_protocol(const std::vector<FoldResult>& folds) {
  ProtocolSummary s;
  double auc_sum = 0.0, nrmse_sum = 0.0;
  std::size_t nrmse_folds = 0;
  s.min_auc = 1.0;
  std::vector<const Prediction*> with_nb;
  double h = 0.0;
  for (const auto& f : folds) {
    if (f.metrics.auc) {
      auc_sum += *f.metrics.auc;
      s.min_auc = std::min(s.min_auc, *f.metrics.auc);
      ++s.auc_folds;
    }
    if (f.metrics.nrmse) {
      nrmse_sum += *f.metrics.nrmse;
      ++nrmse_folds;
    }
    if (f.metrics.err) {
      for (const auto& p : f.predictions) {
        with_nb.push_back(&p);
        h += p.entropy;
      }
    }
  }
  if (s.auc_folds) s.mean_auc = auc_sum / static_cast<double>(s.auc_folds);
  else s.min_auc = 0.0;
  if (nrmse_folds) s.mean_nrmse = nrmse_sum / static_cast<double>(nrmse_folds);
  if (!with_nb.empty()) {
    s.err = pooled_err(with_nb);
    s.mean_entropy = h / static_cast<double>(with_nb.size());
  }
  return s;
}

HoldoutResult run_holdout(const SceneDataset& familiar, const std::vector<SceneDataset>& others,
                          double train_share, const PipelineConfig& config, std::uint64_t seed) {
  if (!(train_share > 0.0 && train_share < 1.0)) {
    throw InvalidArgument("train share must lie in (0, 1)");
  }
  const std::size_t n = familiar.frames.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "holdout"));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_share * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) throw InvalidArgument("holdout split leaves an empty side");

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::vector<const FrameSample*> train, test;
  for (auto i : train_idx) train.push_back(&familiar.frames[i]);
  for (auto i : test_idx) test.push_back(&familiar.frames[i]);

  HoldoutResult r;
  r.model = train_ssl(train, config, derive_seed(seed, "holdout_model"));
  r.in_distribution = predict_frames(r.model, test, config);
  for (const auto& other : others) {
    std::vector<const FrameSample*> frames;
    for (const auto& f : other.frames) frames.push_back(&f);
    r.shifted.push_back(predict_frames(r.model, frames, config));
  }
  return r;
}

BenchResult benchmark_pipeline(const scenario::ScenarioSpec& spec, const PipelineConfig& config,
                               std::size_t frame_count, std::size_t warmup) {
  if (frame_count == 0) throw InvalidArgument("benchmark needs at least one frame");
  auto states = spec.states();
  if (states.empty()) throw DegenerateData("scenario has no frames");
  const std::size_t total = frame_count + warmup;

  // Inputs are prepared outside the timed region: flow observations as a
  // tracker would deliver them, and the rendered frames.
  std::vector<flowsim::FlowObservation> observations;
  std::vector<flowsim::Image> images;
  const auto texture_seed = derive_seed(spec.seed, "texture");
  for (std::size_t i = 0; i < total; ++i) {
    const auto& ego = states[i % states.size()];
    observations.push_back(flowsim::observe_flow(spec.scene, spec.camera, ego, spec.flow,
                                                 derive_seed(spec.seed, "flow", i),
                                                 static_cast<std::int64_t>(i)));
    images.push_back(flowsim::render_view(spec.scene, spec.camera, ego, texture_seed));
  }

  auto short_spec = spec;
  short_spec.trajectory.max_frames = static_cast<int>(std::min<std::size_t>(states.size(), 200));
  const auto data = generate_dataset(short_spec, config);
  std::vector<const FrameSample*> train;
  for (const auto& f : data.frames) train.push_back(&f);
  const auto model = train_ssl(train, config, derive_seed(spec.seed, "bench_model"));

  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  BenchResult r;
  double sink = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& obs = observations[i];
    const auto t0 = clock::now();
    const auto derotated = flowfit::derotate(obs, obs.ego.rates);
    flowfit::ThresholdQuery query;
    query.velocity_x = std::hypot(obs.ego.velocity.x, obs.ego.velocity.y);
    query.height = obs.ego.height;
    query.obstacle_height = config.detect_obstacle_height;
    auto rc = flowfit::RansacConfig::make_default(derotated.records.size(), spec.flow.noise_sigma,
                                                  query, derive_seed(spec.seed, "ransac", i),
                                                  config.fit_order);
    rc.iterations = config.ransac_iterations;
    double eps = 0.0;
    try {
      eps = flowfit::ransac_fit(derotated, rc).eps_star;
    } catch (const flowfit::NoConsensus& e) {
      eps = e.best().eps_star;
    }
    const auto t1 = clock::now();
    const auto q = appearance::extract_histogram(images[i], model.dictionary, config.patches,
                                                 derive_seed(spec.seed, "ssl_patches", i));
    const auto t2 = clock::now();
    const double hat = learn::predict(model.regression, q);
    const auto t3 = clock::now();
    sink += eps + hat;
    if (i >= warmup) {
      r.fit_ms += ms(t1 - t0);
      r.histogram_ms += ms(t2 - t1);
      r.predict_ms += ms(t3 - t2);
    }
  }
  r.frames = frame_count;
  const double n = static_cast<double>(frame_count);
  r.fit_ms /= n;
  r.histogram_ms /= n;
  r.predict_ms /= n;
  if (!std::isfinite(sink)) throw DegenerateData("benchmark produced non-finite values");
  return r;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? io::format_number(*v) : "NA"; }

std::ofstream open_csv(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_frames(const fs::path& path, const std::vector<SceneDataset>& data) {
  auto out = open_csv(path);
  out << "scene,frame_id,x,y,h,eps_u,eps_v,eps_star,inliers,corners,consensus,threshold,"
         "obstacle_visible,obstacle_fraction\n";
  for (const auto& d : data) {
    for (const auto& f : d.frames) {
      out << d.name << ',' << f.frame_id << ',' << io::format_number(f.ego.x) << ','
          << io::format_number(f.ego.y) << ',' << io::format_number(f.ego.height) << ','
          << io::format_number(f.eps_u) << ',' << io::format_number(f.eps_v) << ','
          << io::format_number(f.eps_star) << ',' << f.inliers << ',' << f.corners << ','
          << (f.consensus ? 1 : 0) << ',' << io::format_number(f.threshold) << ','
          << (f.obstacle_visible ? 1 : 0) << ',' << io::format_number(f.obstacle_fraction)
          << '\n';
    }
  }
}

void write_protocol(const fs::path& dir, Protocol protocol, const std::vector<FoldResult>& folds,
                    const std::vector<SceneDataset>& data) {
  const std::string name = protocol_name(protocol);
  auto fo = open_csv(dir / ("folds_" + name + ".csv"));
  fo << "fold,train_count,test_count,auc,nrmse,err,mean_entropy,tp_rate,fp_rate\n";
  auto po = open_csv(dir / ("predictions_" + name + ".csv"));
  po << "fold,scene,frame_id,eps_star,eps_hat,threshold,eps_hat_threshold,truth,p_obstacle,"
        "entropy,nb_class\n";
  for (const auto& f : folds) {
    const auto& m = f.metrics;
    fo << f.fold << ',' << f.train_count << ',' << m.count << ',' << opt(m.auc) << ','
       << opt(m.nrmse) << ',' << opt(m.err) << ',' << opt(m.mean_entropy) << ','
       << opt(m.rates.tp_rate) << ',' << opt(m.rates.fp_rate) << '\n';
    for (std::size_t i = 0; i < f.predictions.size(); ++i) {
      const auto& p = f.predictions[i];
      const auto& ref = f.test[i];
      po << f.fold << ',' << data[ref.scene].name << ','
         << data[ref.scene].frames[ref.frame].frame_id << ',' << io::format_number(p.eps_star)
         << ',' << io::format_number(p.eps_hat) << ',' << io::format_number(p.threshold) << ','
         << io::format_number(p.eps_hat_threshold) << ',' << (p.truth ? "obstacle" : "clear") << ',' << io::format_number(p.p_obstacle) << ','
         << io::format_number(p.entropy) << ','
         << (p.nb_class == learn::ObstacleClass::obstacle ? "obstacle" : "clear") << '\n';
    }
  }
}

}  // namespace

EvaluateReport evaluate(const EvaluateOptions& options, const std::optional<fs::path>& out) {
  if (options.protocols.empty()) throw InvalidArgument("no protocol requested");
  const auto scenes =
      options.scenes.empty() ? scenario::evaluation_suite(options.seed) : options.scenes;
  EvaluateReport report;
  for (const auto& spec : scenes) report.datasets.push_back(generate_dataset(spec, options.pipeline));

  for (const auto protocol : options.protocols) {
    const auto plan = protocol == Protocol::kfold1
                          ? make_kfold1_plan(report.datasets, options.kfold1_parts, options.seed)
                          : make_kfold2_plan(report.datasets);
    report.protocols.emplace_back(protocol,
                                  run_kfold(plan, report.datasets, options.pipeline, options.seed));
  }

  if (out) {
    write_frames(*out / "frames.csv", report.datasets);
    auto so = open_csv(*out / "summary.csv");
    so << "protocol,folds,mean_auc,min_auc,auc_folds,mean_nrmse,err,mean_entropy\n";
    for (const auto& [protocol, folds] : report.protocols) {
      write_protocol(*out, protocol, folds, report.datasets);
      const auto s = summarize_protocol(folds);
      so << protocol_name(protocol) << ',' << folds.size() << ','
         << io::format_number(s.mean_auc) << ',' << io::format_number(s.min_auc) << ','
         << s.auc_folds << ',' << io::format_number(s.mean_nrmse) << ','
         << io::format_number(s.err) << ',' << io::format_number(s.mean_entropy) << '\n';
    }
  }
  return report;
}

}  // namespace flowssl::harness
