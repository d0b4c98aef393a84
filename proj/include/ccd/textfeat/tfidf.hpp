#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ccd::text {

using Document = std::vector<std::string>;

/// Terms sorted lexicographically; column i holds terms()[i].
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws DataError if terms are unsorted, duplicated, or df is outside [1, n_docs].
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> df, std::size_t n_docs);

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t n_docs() const noexcept { return n_docs_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::size_t>& df() const noexcept { return df_; }
  /// Column of a term, or -1 when out of vocabulary.
  long index(const std::string& term) const;
  /// ln((1 + n_docs) / (1 + df)) + 1
  double idf(std::size_t column) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string& text);

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t> index_;
};

/// Keeps terms with document frequency >= min_df. Throws DataError for an
/// empty document list or when every term is filtered out.
Vocabulary fit_vocab(std::span<const Document> docs, std::size_t min_df = 1);

/// Raw counts times smoothed idf, L2-normalized. Out-of-vocabulary tokens are
/// ignored; a document with no known token maps to the zero vector.
std::vector<double> tfidf(const Document& doc, const Vocabulary& vocab);
/// Unnormalized weights, exposed for inspection.
std::vector<double> tfidf_weights(const Document& doc, const Vocabulary& vocab);

}  // namespace ccd::text
