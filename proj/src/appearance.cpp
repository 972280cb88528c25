#include "flowssl/appearance.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "flowssl/errors.hpp"

namespace flowssl::appearance {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b, double bound) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
    if (d > bound) break;
  }
  return d;
}

}  // namespace

void PatchConfig::validate() const {
  if (width < 2) throw InvalidArgument("patch width must be at least 2");
  if (samples_per_image < 1) throw InvalidArgument("samples per image must be at least 1");
}

Patch extract_patch(const flowsim::Image& image, int left, int top, int width) {
  if (width < 1 || left < 0 || top < 0 || left + width > image.width() ||
      top + width > image.height()) {
    throw InvalidArgument("patch lies outside the image");
  }
  Patch p(static_cast<std::size_t>(width * width * kChannels));
  std::size_t i = 0;
  for (int c = 0; c < kChannels; ++c) {
    for (int row = 0; row < width; ++row) {
      for (int col = 0; col < width; ++col) {
        p[i++] = image.at(left + col, top + row, c);
      }
    }
  }
  return p;
}

std::vector<Patch> sample_patches(const flowsim::Image& image, const Region& region, int count,
                                  const PatchConfig& config, std::uint64_t seed) {
  config.validate();
  if (count < 1) throw InvalidArgument("patch count must be at least 1");
  if (region.x < 0 || region.y < 0 || region.x + region.width > image.width() ||
      region.y + region.height > image.height()) {
    throw InvalidArgument("sampling region exceeds the image");
  }
  if (region.width < config.width || region.height < config.width) {
    throw InvalidArgument("image region (" + std::to_string(region.width) + "x" +
                          std::to_string(region.height) + ") is smaller than a " +
                          std::to_string(config.width) + "px patch");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> left(region.x, region.x + region.width - config.width);
  std::uniform_int_distribution<int> top(region.y, region.y + region.height - config.width);
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int l = left(rng);
    const int t = top(rng);
    out.push_back(extract_patch(image, l, t, config.width));
  }
  return out;
}

std::vector<Patch> sample_patches(const flowsim::Image& image, int count,
                                  const PatchConfig& config, std::uint64_t seed) {
  return sample_patches(image, Region{0, 0, image.width(), image.height()}, count, config, seed);
}

TextonDictionary train_dictionary(std::span<const Patch> patches, int m, int epochs,
                                  const LearningRateSchedule& schedule, std::uint64_t seed,
                                  int patch_width) {
  if (m < 2) throw InvalidArgument("dictionary needs at least two textons");
  if (epochs < 1) throw InvalidArgument("dictionary training needs at least one epoch");
  if (patches.size() < static_cast<std::size_t>(m)) {
    throw InvalidArgument("dictionary training needs at least m patches (" +
                          std::to_string(patches.size()) + " < " + std::to_string(m) + ")");
  }
  auto valid_rate = [](double r) { return r > 0.0 && r <= 1.0; };
  if (!valid_rate(schedule.initial) || !valid_rate(schedule.final)) {
    throw InvalidArgument("learning rates must lie in (0, 1]");
  }
  const std::size_t dim = patches.front().size();
  for (const auto& p : patches) {
    if (p.size() != dim) throw InvalidArgument("patches have inconsistent lengths");
  }

  std::mt19937_64 rng(seed);
  const std::size_t n = patches.size();

  // k-means++ seeding over distinct patch indices.
  std::vector<std::size_t> chosen;
  std::vector<bool> used(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  chosen.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  used[chosen.back()] = true;
  while (chosen.size() < static_cast<std::size_t>(m)) {
    const auto& last = patches[chosen.back()];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) {
        d2[i] = 0.0;
        continue;
      }
      d2[i] = std::min(d2[i], squared_distance(patches[i], last, d2[i]));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i] || d2[i] <= 0.0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0.0) break;
      }
    }
    if (pick == n) {
      // Every remaining patch coincides with a texton; take any unused one.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) free.push_back(i);
      }
      pick = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    used[pick] = true;
    chosen.push_back(pick);
  }

  TextonDictionary dict;
  dict.patch_width = patch_width;
  dict.epochs = epochs;
  dict.schedule = schedule;
  dict.seed = seed;
  for (auto idx : chosen) dict.textons.push_back(patches[idx]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int e = 0; e < epochs; ++e) {
    const double frac = epochs > 1 ? static_cast<double>(e) / (epochs - 1) : 0.0;
    const double rate = schedule.initial + (schedule.final - schedule.initial) * frac;
    std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      const auto& sample = patches[idx];
      auto& winner = dict.textons[nearest_texton(sample, dict)];
      for (std::size_t k = 0; k < dim; ++k) winner[k] += rate * (sample[k] - winner[k]);
    }
  }
  return dict;
}

std::size_t nearest_texton(std::span<const double> patch, const TextonDictionary& dictionary) {
  if (dictionary.textons.empty()) throw InvalidArgument("empty texton dictionary");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dictionary.textons.size(); ++i) {
    const auto& t = dictionary.textons[i];
    if (t.size() != patch.size()) throw InvalidArgument("patch and texton lengths differ");
    const double d = squared_distance(patch, t, best_d);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

TextonHistogram histogram_of(std::span<const Patch> patches, const TextonDictionary& dictionary) {
  if (patches.empty()) throw InvalidArgument("histogram needs at least one patch");
  TextonHistogram q(dictionary.size(), 0.0);
  for (const auto& p : patches) q[nearest_texton(p, dictionary)] += 1.0;
  const double n = static_cast<double>(patches.size());
  for (auto& v : q) v /= n;
  return q;
}

TextonHistogram extract_histogram(const flowsim::Image& image, const TextonDictionary& dictionary,
                                  const PatchConfig& config, std::uint64_t seed) {
  return histogram_of(sample_patches(image, config.samples_per_image, config, seed), dictionary);
}

TextonHistogram extract_histogram(const flowsim::Image& image, const Region& region,
                                  const TextonDictionary& dictionary, const PatchConfig& config,
                                  std::uint64_t seed) {
  return histogram_of(sample_patches(image, region, config.samples_per_image, config, seed),
                      dictionary);
}

}  // namespace flowssl::appearance
