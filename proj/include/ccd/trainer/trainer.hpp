#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccd/fusion/models.hpp"

namespace ccd::train {

enum class Regime { Unimodal, Fusion };

std::string_view regime_name(Regime r) noexcept;
std::optional<Regime> parse_regime(std::string_view name);

struct TrainConfig {
  Regime regime = Regime::Fusion;
  double lr = 1e-4;
  std::size_t max_epochs = 50;
  /// 0 trains full-batch.
  std::size_t batch_size = 16;
  double dropout = 0.2;
  double l2 = 0.01;
  /// Epochs without a validation-loss improvement before stopping; negative
  /// disables early stopping (the best epoch is still restored).
  int patience = 15;
  std::uint64_t seed = 0;

  /// lr 1e-3, up to 100 epochs, full batch, dropout 0.5, no early stopping.
  static TrainConfig unimodal();
  /// lr 1e-4, dropout 0.2, l2 0.01, up to 50 epochs, batch 16, patience 15.
  static TrainConfig fusion();
  static TrainConfig for_regime(Regime r) { return r == Regime::Unimodal ? unimodal() : fusion(); }

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  /// NaN when there is no validation partition.
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Epoch whose parameters were restored; 0 when none was (no validation).
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  bool stopped_early = false;
};

/// Minimizes mean cross-entropy + L2 with Adam. Shuffles every epoch with
/// the run seed, tracks validation loss after every epoch and restores the
/// parameters of the lowest one. The validation partition must hold only
/// real records (source >= 0).
///
/// Throws DataError for an empty training set or a synthetic validation
/// sample, NumericError when a loss stops being finite.
TrainHistory train(fusion::Classifier& model, std::span<const fusion::Sample> train_set,
                   std::span<const fusion::Sample> val_set, const TrainConfig& cfg);

/// Eval-mode mean cross-entropy over a partition.
double mean_loss(const fusion::Classifier& model, std::span<const fusion::Sample> samples);

/// Eval-mode class probabilities, one row per sample.
tc::Tensor predict(const fusion::Classifier& model, std::span<const fusion::Sample> samples);

/// CSV with header "epoch,train_loss,val_loss"; missing validation losses are empty.
void write_history_csv(std::ostream& out, const TrainHistory& history);

struct GroupSplit {
  std::vector<std::string> fit;
  std::vector<std::string> validation;
};

/// Holds out ceil(fraction * n) groups (at least one group stays in `fit`),
/// chosen by a seeded shuffle; both lists come back sorted. Fraction 0 gives
/// an empty validation list. Throws ConfigError for fewer than 2 groups or a
/// fraction outside [0, 1).
GroupSplit make_validation_split(std::span<const std::string> groups, double fraction, std::uint64_t seed);

}  // namespace ccd::train
