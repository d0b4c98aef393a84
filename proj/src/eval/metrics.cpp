#include "ccd/eval/metrics.hpp"

#include <algorithm>
#include <map>

#include "ccd/common/error.hpp"
#include "ccd/textfeat/preprocess.hpp"

namespace ccd::eval {

namespace {

double ratio(double num, double den) noexcept { return den == 0.0 ? 0.0 : num / den; }

void check_label(int label) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw ConfigError("label " + std::to_string(label) + " is outside {0, 1, 2}");
  }
}

}  // namespace

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const noexcept {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

void ConfusionMatrix::add(int actual, int predicted) {
  check_label(actual);
  check_label(predicted);
  ++counts[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)];
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) counts[i][j] += other.counts[i][j];
  return *this;
}

double f1_score(double precision, double recall) noexcept {
  return ratio(2.0 * precision * recall, precision + recall);
}

double macro_f1(std::span<const double> f_values) {
  if (f_values.empty()) throw ConfigError("macro_f1: no classes");
  double total = 0.0;
  for (double f : f_values) total += f;
  return total / static_cast<double>(f_values.size());
}

EvalReport report_from_confusion(const ConfusionMatrix& cm) {
  EvalReport r;
  r.confusion = cm;
  std::array<double, kNumClasses> f{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::int64_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      predicted += cm.counts[k][c];
      actual += cm.counts[c][k];
    }
    const auto tp = static_cast<double>(cm.counts[c][c]);
    auto& m = r.per_class[c];
    m.precision = ratio(tp, static_cast<double>(predicted));
    m.recall = ratio(tp, static_cast<double>(actual));
    m.f1 = f1_score(m.precision, m.recall);
    m.support = actual;
    f[c] = m.f1;
  }
  r.macro_f1 = macro_f1(f);
  r.accuracy = ratio(static_cast<double>(cm.trace()), static_cast<double>(cm.total()));
  return r;
}

EvalReport metrics(std::span<const int> actual, std::span<const int> predicted) {
  if (actual.size() != predicted.size()) {
    throw ConfigError("metrics: " + std::to_string(actual.size()) + " actual labels vs " +
                      std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) cm.add(actual[i], predicted[i]);
  return report_from_confusion(cm);
}

ErrorAnalysis error_analysis(const ConfusionMatrix& cm, std::optional<std::int64_t> declared_total) {
  for (const auto& row : cm.counts)
    for (auto c : row)
      if (c < 0) throw ConfigError("error_analysis: negative cell");
  ErrorAnalysis out;
  const std::int64_t matrix_total = cm.total();
  out.total = declared_total.value_or(matrix_total);
  if (out.total < matrix_total) throw ConfigError("error_analysis: declared total is below the matrix total");
  out.misclassified = out.total - cm.trace();
  out.accuracy = ratio(static_cast<double>(cm.trace()), static_cast<double>(out.total));
  out.unaccounted = out.total - matrix_total;

  for (std::size_t i = 0; i < kNumClasses; ++i) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      if (i == j) continue;
      ErrorCell cell{static_cast<int>(i), static_cast<int>(j), cm.counts[i][j],
                     ratio(static_cast<double>(cm.counts[i][j]), static_cast<double>(out.misclassified))};
      if (cell.count > 0 && (!out.dominant || cell.count > out.dominant->count)) out.dominant = cell;
      out.cells.push_back(cell);
    }
  }
  return out;
}

double cohens_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ConfigError("cohens_kappa: label lists differ in length");
  if (a.empty()) throw ConfigError("cohens_kappa: no labels");
  const auto n = static_cast<double>(a.size());
  std::map<int, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
  }
  const double p_o = agree / n;
  if (p_o == 1.0) return 1.0;
  double p_e = 0.0;
  for (const auto& [label, m] : marginals) p_e += (m.first / n) * (m.second / n);
  return (p_o - p_e) / (1.0 - p_e);
}

WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw ConfigError("wer: empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  const std::size_t w = m + 1;
  std::vector<std::size_t> d((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) d[i * w] = i;
  for (std::size_t j = 0; j <= m; ++j) d[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = d[(i - 1) * w + j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      d[i * w + j] = std::min({diag, d[(i - 1) * w + j] + 1, d[i * w + j - 1] + 1});
    }
  }

  WerResult r;
  r.counts.reference_words = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = d[i * w + j];
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (here == d[(i - 1) * w + j - 1] + (same ? 0 : 1)) {
        if (!same) ++r.counts.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && here == d[(i - 1) * w + j] + 1) {
      ++r.counts.deletions;
      --i;
    } else {
      ++r.counts.insertions;
      --j;
    }
  }
  r.rate = static_cast<double>(r.counts.errors()) / static_cast<double>(n);
  return r;
}

WerResult wer_text(const std::string& reference, const std::string& hypothesis) {
  const auto ref = text::preprocess(reference);
  const auto hyp = text::preprocess(hypothesis);
  return wer(ref, hyp);
}

}  // namespace ccd::eval
