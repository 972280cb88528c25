#pragma once

// Texton appearance model: a dictionary of patch centroids learned with
// winner-take-all Kohonen updates, and normalized texton histograms.
//
// Patches are flattened channel-major: index = c * w * w + row * w + col.

#include <cstdint>
#include <span>
#include <vector>

#include "flowssl/flowsim.hpp"

namespace flowssl::appearance {

using Patch = std::vector<double>;
using TextonHistogram = std::vector<double>;

inline constexpr int kChannels = 3;

struct PatchConfig {
  int width = 5;
  int samples_per_image = 25;

  int patch_length() const { return width * width * kChannels; }
  void validate() const;
};

/// Pixel rectangle of an image; patches are drawn entirely inside it.
struct Region {
  int x = 0, y = 0, width = 0, height = 0;
};

struct LearningRateSchedule {
  double initial = 0.1;
  double final = 0.01;
};

struct TextonDictionary {
  int patch_width = 5;
  std::vector<Patch> textons;
  int epochs = 0;
  LearningRateSchedule schedule;
  std::uint64_t seed = 0;

  std::size_t size() const { return textons.size(); }
};

Patch extract_patch(const flowsim::Image& image, int left, int top, int width);

/// `count` patches at uniformly random top-left corners inside `region`.
/// Throws InvalidArgument when the region is smaller than a patch.
std::vector<Patch> sample_patches(const flowsim::Image& image, const Region& region, int count,
                                  const PatchConfig& config, std::uint64_t seed);

std::vector<Patch> sample_patches(const flowsim::Image& image, int count,
                                  const PatchConfig& config, std::uint64_t seed);

/// Kohonen (winner-take-all) clustering. Textons start at m distinct
/// training patches picked with k-means++ seeding; each presentation moves
/// the nearest texton toward the sample by the current rate, which decays
/// linearly from schedule.initial to schedule.final across epochs. The
/// presentation order is reshuffled each epoch from the seed.
TextonDictionary train_dictionary(std::span<const Patch> patches, int m, int epochs,
                                  const LearningRateSchedule& schedule, std::uint64_t seed,
                                  int patch_width = 5);

/// Index of the closest texton (Euclidean); ties go to the lowest index.
std::size_t nearest_texton(std::span<const double> patch, const TextonDictionary& dictionary);

/// Normalized bin counts of nearest textons for a set of patches.
TextonHistogram histogram_of(std::span<const Patch> patches, const TextonDictionary& dictionary);

TextonHistogram extract_histogram(const flowsim::Image& image, const TextonDictionary& dictionary,
                                  const PatchConfig& config, std::uint64_t seed);

TextonHistogram extract_histogram(const flowsim::Image& image, const Region& region,
                                  const TextonDictionary& dictionary, const PatchConfig& config,
                                  std::uint64_t seed);

}  // namespace flowssl::appearance
