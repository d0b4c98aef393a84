#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "ccd/datamodel/io.hpp"
#include "ccd/datamodel/types.hpp"

namespace ccd::data {

/// How class information is spread over the modalities.
enum class SignalLayout {
  Shared,         // every modality separates every class
  Complementary,  // language: Confusion only; audio: Conflict only; video: both, at half strength
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_pairs = 20;
  std::size_t utterances_per_pair = 50;
  std::array<double, kNumClasses> class_mix = {0.047, 0.093, 0.860};
  /// Distance of each class centroid from the common origin, in noise SDs.
  /// 0 makes the classes indistinguishable.
  double separability = 3.0;
  SignalLayout layout = SignalLayout::Shared;
  /// SD of a per-pair offset added to every feature of that pair.
  double subject_noise = 0.3;

  std::size_t sentence_dim = 768;
  std::size_t frames_min = 6;
  std::size_t frames_max = 16;
  std::size_t audio_dim = 10;  // pitch
  std::size_t video_dim = 35;  // facial AUs
  bool include_audio_vec = false;
  std::size_t audio_vec_dim = 768;  // wav2vec
};

/// Deterministic synthetic corpus: Gaussian clusters per class and modality,
/// text that carries class-specific phrases with probability s/(1+s).
/// Throws ConfigError for invalid proportions or sizes.
Corpus synth_corpus(const SynthConfig& cfg);

/// Manifest matching synth_corpus(cfg).
FeatureManifest synth_manifest(const SynthConfig& cfg);

/// Exact per-class counts for n items: floor of n*p, remainders to the
/// largest fractional parts (ties to the lower class index).
std::array<std::size_t, kNumClasses> allocate_counts(std::size_t n, const std::array<double, kNumClasses>& mix);

}  // namespace ccd::data
