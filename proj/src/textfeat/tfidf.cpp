#include "ccd/textfeat/tfidf.hpp"

#include <cmath>
#include <set>

#include "ccd/common/error.hpp"
#include "json.hpp"

namespace ccd::text {

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> df, std::size_t n_docs)
    : terms_(std::move(terms)), df_(std::move(df)), n_docs_(n_docs) {
  if (terms_.size() != df_.size()) throw DataError("vocabulary: term and df lists differ in length");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i > 0 && !(terms_[i - 1] < terms_[i])) throw DataError("vocabulary terms must be sorted and unique");
    if (df_[i] < 1 || df_[i] > n_docs_) {
      throw DataError("vocabulary: df of '" + terms_[i] + "' outside [1, n_docs]");
    }
    index_.emplace(terms_[i], i);
  }
}

long Vocabulary::index(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

double Vocabulary::idf(std::size_t column) const {
  return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(df_[column]))) + 1.0;
}

std::string Vocabulary::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["n_docs"] = n_docs_;
  j["terms"] = terms_;
  j["df"] = df_;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1) throw DataError("unsupported vocabulary schema_version");
    return Vocabulary(j.at("terms").get<std::vector<std::string>>(), j.at("df").get<std::vector<std::size_t>>(),
                      j.at("n_docs").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

Vocabulary fit_vocab(std::span<const Document> docs, std::size_t min_df) {
  if (docs.empty()) throw DataError("fit_vocab: no documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    for (const auto& t : std::set<std::string>(doc.begin(), doc.end())) ++df[t];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> counts;
  for (const auto& [t, n] : df) {
    if (n >= min_df) {
      terms.push_back(t);
      counts.push_back(n);
    }
  }
  if (terms.empty()) throw DataError("fit_vocab: every term has df below min_df=" + std::to_string(min_df));
  return Vocabulary(std::move(terms), std::move(counts), docs.size());
}

std::vector<double> tfidf_weights(const Document& doc, const Vocabulary& vocab) {
  std::vector<double> w(vocab.size(), 0.0);
  for (const auto& t : doc) {
    const long i = vocab.index(t);
    if (i >= 0) w[static_cast<std::size_t>(i)] += 1.0;
  }
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] != 0.0) w[i] *= vocab.idf(i);
  return w;
}

std::vector<double> tfidf(const Document& doc, const Vocabulary& vocab) {
  std::vector<double> w = tfidf_weights(doc, vocab);
  double norm = 0.0;
  for (double x : w) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : w) x /= norm;
  }
  return w;
}

}  // namespace ccd::text
