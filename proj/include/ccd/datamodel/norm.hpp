#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ccd/datamodel/types.hpp"

namespace ccd::data {

/// Per-column mean and population standard deviation of one field.
struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t width() const noexcept { return mean.size(); }
  bool operator==(const ColumnStats&) const = default;
};

/// Streaming (Welford) accumulator for ColumnStats.
class ColumnAccumulator {
 public:
  explicit ColumnAccumulator(std::string name = {}) : name_(std::move(name)) {}

  void add(std::span<const double> row);
  std::size_t count() const noexcept { return count_; }
  /// Throws DataError naming the column if no rows were added.
  ColumnStats finish() const;

 private:
  std::string name_;
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Normalization statistics keyed by field name ("audio_frames", "tfidf", ...).
/// Always fitted on a training partition only.
class NormStats {
 public:
  void set(std::string field, ColumnStats stats) { fields_[std::move(field)] = std::move(stats); }
  bool contains(const std::string& field) const { return fields_.contains(field); }
  const ColumnStats& at(const std::string& field) const;
  const std::map<std::string, ColumnStats>& fields() const noexcept { return fields_; }

  bool operator==(const NormStats&) const = default;

 private:
  std::map<std::string, ColumnStats> fields_;
};

/// Fits statistics for the selected record fields. Frame fields pool every
/// frame of every record; vector fields pool every record carrying them.
NormStats fit_norm_stats(const Corpus& train, std::span<const std::string> fields);

/// z-scores in place; columns with zero spread map to 0.
void apply_norm(std::span<double> row, const ColumnStats& stats, const std::string& field = {});
void apply_norm(Frames& frames, const ColumnStats& stats, const std::string& field = {});
/// Normalizes every field covered by `stats` in every record.
Corpus apply_norm(const Corpus& corpus, const NormStats& stats);

}  // namespace ccd::data
