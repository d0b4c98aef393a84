#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ccd/tensorcore/tensor.hpp"

namespace ccd::resample {

using FeatureRows = std::vector<std::vector<double>>;

struct SmoteConfig {
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
};

/// Where a synthetic row came from: base + lambda * (neighbor - base).
struct SyntheticOrigin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double lambda = 0.0;
};

struct SmoteResult {
  FeatureRows features;
  std::vector<int> labels;
  /// Rows [0, n_original) are the inputs verbatim and in order; row
  /// n_original + s was generated from origins[s].
  std::size_t n_original = 0;
  std::vector<SyntheticOrigin> origins;
};

/// k nearest same-class neighbours of `self` among `members` by Euclidean
/// distance; ties go to the lower original index.
std::vector<std::size_t> nearest_neighbors(const FeatureRows& x, std::span<const std::size_t> members,
                                           std::size_t self, std::size_t k);

/// Upsamples every class to the majority count. Classes absent from the
/// input stay absent. Throws DataError if a class that needs upsampling has
/// a single sample, ConfigError for k_neighbors = 0.
SmoteResult smote(const FeatureRows& x, std::span<const int> labels, const SmoteConfig& cfg);

/// Multi-part sample (one T x d tensor per modality; vectors are 1 x d).
struct PartSample {
  std::vector<tc::Tensor> parts;
  int label = 0;
};

struct PartSmoteResult {
  std::vector<PartSample> samples;
  std::size_t n_original = 0;
  std::vector<SyntheticOrigin> origins;
};

/// SMOTE for samples that carry sequences. Neighbours are found on the
/// concatenated per-part column means; a synthetic sample interpolates each
/// part frame by frame with one shared lambda when base and neighbour parts
/// have the same shape, and copies the base part otherwise.
PartSmoteResult smote_parts(const std::vector<PartSample>& samples, const SmoteConfig& cfg);

}  // namespace ccd::resample
