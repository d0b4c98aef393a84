#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ccd/datamodel/norm.hpp"
#include "ccd/eval/experiment.hpp"
#include "ccd/fusion/models.hpp"
#include "ccd/textfeat/tfidf.hpp"
#include "ccd/trainer/trainer.hpp"

namespace ccd::eval {

/// Everything fitted on one training partition: normalization statistics,
/// the TF-IDF vocabulary, one sequence encoder per frame modality that a
/// vector-input model needs, and one classifier per configured model.
///
/// Fitting order: validation pairs are split off the training pairs; raw
/// statistics come from the whole training partition; each encoder is
/// trained as a unimodal classifier on SMOTE-upsampled fit records, then
/// frozen; embedded vectors get their own statistics; every classifier is
/// trained on SMOTE-upsampled fit records with the validation records
/// untouched. Nothing outside `train` is read.
class Pipeline {
 public:
  Pipeline(Pipeline&&) noexcept;
  Pipeline& operator=(Pipeline&&) noexcept;
  ~Pipeline();

  /// Throws DataError for unlabeled training records or missing fields.
  static Pipeline fit(const data::Corpus& corpus, std::span<const std::size_t> train, const ExperimentConfig& cfg,
                      std::uint64_t seed);

  /// predicted[model][i] for record indices[i].
  std::vector<std::vector<int>> predict(const data::Corpus& corpus, std::span<const std::size_t> indices) const;

  const ExperimentConfig& config() const noexcept;
  /// Training history of each model (a frame-unimodal model reports its encoder's).
  const std::vector<train::TrainHistory>& histories() const noexcept;

  /// Writes pipeline.json and parameters.ckpt into `dir` (created if needed).
  void save(const std::filesystem::path& dir) const;
  static Pipeline load(const std::filesystem::path& dir);

 private:
  struct State;
  explicit Pipeline(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

}  // namespace ccd::eval
