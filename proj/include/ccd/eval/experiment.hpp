#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccd/fusion/models.hpp"
#include "ccd/seqembed/encoder.hpp"
#include "ccd/trainer/trainer.hpp"

namespace ccd::eval {

/// Record field feeding each modality.
struct FeatureChoice {
  std::string language = "sentence_vec";  // sentence_vec | sentiment_vec | tfidf
  std::string audio = "audio_frames";     // audio_frames | audio_vec
  std::string video = "video_frames";     // video_frames

  /// True when the modality is read from a frame sequence.
  bool is_sequence(data::Modality m) const;
  /// Record field name behind a modality.
  const std::string& field(data::Modality m) const;
  bool operator==(const FeatureChoice&) const = default;
};

/// Optional replacements for the fields of a regime's TrainConfig.
struct TrainOverrides {
  std::optional<double> lr;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> dropout;
  std::optional<double> l2;
  std::optional<int> patience;

  train::TrainConfig apply(train::TrainConfig base) const;
  bool operator==(const TrainOverrides&) const = default;
};

/// Sequence encoder that turns a frame modality into one vector. Trained
/// per fold as a unimodal classifier before the vector-input models.
struct EncoderOptions {
  std::size_t value_embed_dim = 64;
  std::size_t output_dim = 768;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t window = 65;
  std::size_t max_sequence = 4096;
  std::size_t ffn_dim = 0;
  std::size_t hidden = 128;
  TrainOverrides train;

  seq::SeqEncoderConfig config(std::size_t input_dim) const;
  bool operator==(const EncoderOptions&) const = default;
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  /// Feature file; relative paths resolve against the data directory.
  std::string data;
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::size_t jobs = 1;
  double validation_fraction = 0.1;
  bool smote = true;
  std::size_t smote_k = 5;
  std::size_t tfidf_min_df = 1;
  FeatureChoice features;
  EncoderOptions encoder;
  /// Evaluated in order; all share one fold plan and one set of encoders per fold.
  std::vector<fusion::FusionSpec> models;
  TrainOverrides unimodal_train;
  TrainOverrides fusion_train;

  /// Unimodal regime for unimodal models, fusion regime otherwise, with the
  /// overrides and the given seed applied.
  train::TrainConfig train_config(fusion::Method method, std::uint64_t seed) const;
  train::TrainConfig encoder_train_config(std::uint64_t seed) const;

  /// Normalizes every model spec and checks ranges. Throws ConfigError.
  void validate();
  bool operator==(const ExperimentConfig&) const = default;
};

/// The five fusion methods over all three modalities.
std::vector<fusion::FusionSpec> default_fusion_models();

/// "early[language+audio+video]", "unimodal[audio]".
std::string model_label(const fusion::FusionSpec& spec);

/// Unknown keys, wrong types and unsupported schema versions raise ConfigError.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace ccd::eval
