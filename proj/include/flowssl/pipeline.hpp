#pragma once

// Experiment driver: per-frame datasets from scenarios, SSL training and
// testing, the two K-fold protocols, the appearance-shift study and the
// processing-time benchmark.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowssl/appearance.hpp"
#include "flowssl/flowfit.hpp"
#include "flowssl/learn.hpp"
#include "flowssl/metrics.hpp"
#include "flowssl/scenario.hpp"

namespace flowssl::harness {

struct PipelineConfig {
  flowfit::FitOrder fit_order = flowfit::FitOrder::quadratic;
  int ransac_iterations = 100;
  double detect_obstacle_height = 0.03;  // dh of the detection threshold

  appearance::PatchConfig patches{5, 25};
  int dictionary_size = 30;
  int dictionary_epochs = 10;
  appearance::LearningRateSchedule schedule{0.1, 0.01};
  int dictionary_patches_per_frame = 4;
  int dictionary_max_patches = 6000;

  double ridge = learn::kDefaultRidge;
  double nb_alpha = 1.0;
  double nb_patch_count = 25.0;
  // Label Naive Bayes training data with the regression output against the
  // calibrated eps_hat threshold (true) or with eps* against the frame
  // threshold (false).
  bool nb_labels_from_prediction = true;
};

/// Everything kept per frame: flow roughness, ground truth and the patches
/// sampled from the rendered image (so the image itself can be dropped).
struct FrameSample {
  std::int64_t frame_id = 0;
  flowsim::EgoState ego;
  double eps_u = 0.0, eps_v = 0.0, eps_star = 0.0;
  std::size_t inliers = 0, corners = 0;
  bool consensus = true;
  double threshold = 0.0;  // detection threshold at this frame's h and V
  bool obstacle_visible = false;
  double obstacle_fraction = 0.0;  // share of pixels on obstacles
  std::vector<appearance::Patch> ssl_patches;
  std::vector<appearance::Patch> dictionary_patches;
};

struct SceneDataset {
  std::string name;
  flowsim::CameraIntrinsics camera;
  std::vector<FrameSample> frames;
};

/// Detection threshold for a frame: excess flow of a detect_dh obstacle at
/// the frame's height and horizontal speed (normalized units).
double frame_threshold(const flowsim::EgoState& ego, double detect_obstacle_height);

struct FrameFlow {
  flowsim::FlowObservation observation;
  flowfit::FlowFitResult fit;
  bool consensus = true;
};

/// Observe, derotate with the known rates and RANSAC-fit one frame. When no
/// planar consensus exists the best model's residuals are reported and
/// `consensus` is false.
FrameFlow process_flow(const scenario::ScenarioSpec& spec, const flowsim::EgoState& ego,
                       std::int64_t frame_id, const PipelineConfig& config);

SceneDataset generate_dataset(const scenario::ScenarioSpec& spec, const PipelineConfig& config);

struct SampleRef {
  std::size_t scene = 0;
  std::size_t frame = 0;
  friend bool operator==(const SampleRef&, const SampleRef&) = default;
  friend auto operator<=>(const SampleRef&, const SampleRef&) = default;
};

enum class Protocol { kfold1, kfold2 };
const char* protocol_name(Protocol p);

struct Fold {
  std::vector<SampleRef> train;
  std::vector<SampleRef> test;
};

struct FoldPlan {
  Protocol protocol = Protocol::kfold1;
  std::vector<std::string> scenes;
  std::vector<Fold> folds;
};

/// kfold1: every scene's frames are shuffled and cut into k parts; fold i
/// tests part i of every scene and trains on the rest.
FoldPlan make_kfold1_plan(const std::vector<SceneDataset>& data, int k, std::uint64_t seed);

/// kfold2: fold i tests all of scene i and trains on the other scenes.
FoldPlan make_kfold2_plan(const std::vector<SceneDataset>& data);

struct SslModel {
  appearance::TextonDictionary dictionary;
  learn::RegressionModel regression;
  // Operating threshold on eps_hat: the cut that best reproduces the flow
  // labels (eps* above the frame threshold) on the training frames.
  double eps_hat_threshold = 0.0;
  std::optional<learn::NaiveBayesModel> naive_bayes;  // empty if one class only
};

/// Cut on `scores` minimizing disagreement with `positive` (score > cut
/// means positive). Ties between cuts go to the lowest; the cut is placed
/// midway between adjacent distinct scores.
double calibrate_threshold(const std::vector<double>& scores, const std::vector<bool>& positive);

SslModel train_ssl(const std::vector<const FrameSample*>& train, const PipelineConfig& config,
                   std::uint64_t seed);

struct Prediction {
  double eps_star = 0.0;
  double eps_hat = 0.0;
  double threshold = 0.0;          // frame threshold for eps*
  double eps_hat_threshold = 0.0;  // model operating threshold
  bool truth = false;
  double p_obstacle = 0.5;
  double entropy = 1.0;
  learn::ObstacleClass nb_class = learn::ObstacleClass::clear;
};

struct TestMetrics {
  std::size_t count = 0;
  std::optional<double> auc;    // empty when the test set has one class
  std::optional<double> nrmse;  // empty when eps* is constant
  std::optional<double> err;    // empty without a Naive Bayes model
  std::optional<double> mean_entropy;
  DetectionRates rates;         // eps_hat thresholded at the frame threshold
};

std::vector<Prediction> predict_frames(const SslModel& model,
                                       const std::vector<const FrameSample*>& frames,
                                       const PipelineConfig& config);

TestMetrics summarize(const std::vector<Prediction>& predictions, bool have_naive_bayes);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_count = 0;
  TestMetrics metrics;
  std::vector<SampleRef> test;
  std::vector<Prediction> predictions;
};

std::vector<FoldResult> run_kfold(const FoldPlan& plan, const std::vector<SceneDataset>& data,
                                  const PipelineConfig& config, std::uint64_t seed);

struct ProtocolSummary {
  double mean_auc = 0.0;      // over folds with a defined AUC
  double min_auc = 0.0;
  std::size_t auc_folds = 0;
  double mean_nrmse = 0.0;
  double err = 0.0;           // pooled over all test samples
  double mean_entropy = 0.0;  // pooled over all test samples
};

ProtocolSummary summarize_protocol(const std::vector<FoldResult>& folds);

/// Train on a random share of `familiar`, test on the remaining frames and
/// on every frame of each other scene.
struct HoldoutResult {
  SslModel model;
  std::vector<Prediction> in_distribution;
  std::vector<std::vector<Prediction>> shifted;
};

HoldoutResult run_holdout(const SceneDataset& familiar, const std::vector<SceneDataset>& others,
                          double train_share, const PipelineConfig& config, std::uint64_t seed);

struct BenchResult {
  std::size_t frames = 0;
  double fit_ms = 0.0;        // derotation + RANSAC fit
  double histogram_ms = 0.0;  // patch sampling + nearest textons
  double predict_ms = 0.0;    // regression function
  double ssl_ms() const { return histogram_ms + predict_ms; }
  double combined_ms() const { return fit_ms + ssl_ms(); }
};

/// Mean per-frame wall-clock timings at the configured corner and patch
/// budgets; the first `warmup` frames are excluded.
BenchResult benchmark_pipeline(const scenario::ScenarioSpec& spec, const PipelineConfig& config,
                               std::size_t frame_count, std::size_t warmup = 5);

struct EvaluateOptions {
  std::vector<Protocol> protocols{Protocol::kfold1, Protocol::kfold2};
  int kfold1_parts = 9;
  std::uint64_t seed = 42;
  PipelineConfig pipeline;
  std::vector<scenario::ScenarioSpec> scenes;  // empty = built-in suite
};

struct EvaluateReport {
  std::vector<SceneDataset> datasets;
  std::vector<std::pair<Protocol, std::vector<FoldResult>>> protocols;
};

/// Generates the datasets, runs the requested protocols and, when `out` is
/// set, writes frames.csv, folds_<protocol>.csv, predictions_<protocol>.csv
/// and summary.csv below it.
EvaluateReport evaluate(const EvaluateOptions& options,
                        const std::optional<std::filesystem::path>& out);

}  // namespace flowssl::harness
