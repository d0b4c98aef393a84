#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccd/datamodel/types.hpp"

namespace ccd::eval {

using data::kNumClasses;

/// counts[actual][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> counts{};

  std::int64_t total() const noexcept;
  std::int64_t trace() const noexcept;
  void add(int actual, int predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct EvalReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;

  bool operator==(const EvalReport&) const = default;
};

/// Harmonic mean; 0 when p + r = 0.
double f1_score(double precision, double recall) noexcept;
/// Unweighted mean of the per-class F values.
double macro_f1(std::span<const double> f_values);

/// P, R, F per class, macro-F1 and accuracy; any 0/0 ratio is 0.
EvalReport report_from_confusion(const ConfusionMatrix& cm);
/// Throws ConfigError on a length mismatch or a label outside {0, 1, 2}.
EvalReport metrics(std::span<const int> actual, std::span<const int> predicted);

struct ErrorCell {
  int actual = 0;
  int predicted = 0;
  std::int64_t count = 0;
  /// count / misclassified.
  double share = 0.0;
};

struct ErrorAnalysis {
  std::int64_t total = 0;
  std::int64_t misclassified = 0;
  double accuracy = 0.0;
  /// Largest off-diagonal cell (row-major first on ties); empty when nothing is misclassified.
  std::optional<ErrorCell> dominant;
  /// Every off-diagonal cell in row-major order.
  std::vector<ErrorCell> cells;
  /// Misclassified records not present in any off-diagonal cell; nonzero
  /// only when the declared total exceeds the matrix total.
  std::int64_t unaccounted = 0;
};

/// Error breakdown of a confusion matrix. With `declared_total` (a corpus
/// size reported alongside a matrix whose cells do not add up to it),
/// misclassified = declared_total - trace and shares are taken over that.
/// Throws ConfigError for negative cells or a declared total below the matrix total.
ErrorAnalysis error_analysis(const ConfusionMatrix& cm, std::optional<std::int64_t> declared_total = std::nullopt);

/// Cohen's kappa over any integer labels; 1 when observed agreement is 1.
/// Throws ConfigError on a length mismatch or empty input.
double cohens_kappa(std::span<const int> a, std::span<const int> b);

struct AlignmentCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_words = 0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
  bool operator==(const AlignmentCounts&) const = default;
};

struct WerResult {
  AlignmentCounts counts;
  double rate = 0.0;
};

/// Minimum-edit-distance word alignment with unit costs. Among optimal
/// alignments the backtrace prefers substitution, then deletion, then
/// insertion. Throws ConfigError for an empty reference.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);
/// Tokenizes both strings with the text preprocessor first.
WerResult wer_text(const std::string& reference, const std::string& hypothesis);

}  // namespace ccd::eval
