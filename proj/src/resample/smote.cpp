#include "ccd/resample/smote.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "ccd/common/error.hpp"
#include "ccd/common/rng.hpp"
#include "ccd/datamodel/types.hpp"

namespace ccd::resample {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::string class_name(int c) {
  std::string s = "class " + std::to_string(c);
  if (c >= 0 && c < static_cast<int>(data::kNumClasses)) s += " (" + std::string(data::label_name(data::label_from_index(c))) + ")";
  return s;
}

/// Plans synthetic (base, neighbor, lambda) triples for every minority class.
std::vector<std::pair<int, SyntheticOrigin>> plan(const FeatureRows& x, std::span<const int> labels,
                                                  const SmoteConfig& cfg) {
  if (cfg.k_neighbors == 0) throw ConfigError("SMOTE k_neighbors must be >= 1");
  if (x.size() != labels.size()) throw DataError("SMOTE: feature and label counts differ");
  for (const auto& row : x)
    if (row.size() != x.front().size()) throw DataError("SMOTE: feature rows differ in width");

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  std::size_t majority = 0;
  for (const auto& [c, idx] : members) majority = std::max(majority, idx.size());

  std::vector<std::pair<int, SyntheticOrigin>> out;
  for (const auto& [c, idx] : members) {
    if (idx.size() == majority) continue;
    if (idx.size() < 2) throw DataError("SMOTE: " + class_name(c) + " has a single sample; need at least 2");
    const std::size_t k = std::min(cfg.k_neighbors, idx.size() - 1);
    std::vector<std::vector<std::size_t>> nn(idx.size());
    for (std::size_t m = 0; m < idx.size(); ++m) nn[m] = nearest_neighbors(x, idx, idx[m], k);

    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
    std::uniform_int_distribution<std::size_t> pick_base(0, idx.size() - 1), pick_nn(0, k - 1);
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    for (std::size_t s = idx.size(); s < majority; ++s) {
      const std::size_t m = pick_base(rng);
      const std::size_t j = nn[m][pick_nn(rng)];
      out.push_back({c, SyntheticOrigin{idx[m], j, lambda(rng)}});
    }
  }
  return out;
}

}  // namespace

std::vector<std::size_t> nearest_neighbors(const FeatureRows& x, std::span<const std::size_t> members,
                                           std::size_t self, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(members.size());
  for (std::size_t j : members)
    if (j != self) d.emplace_back(squared_distance(x[self], x[j]), j);
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

SmoteResult smote(const FeatureRows& x, std::span<const int> labels, const SmoteConfig& cfg) {
  SmoteResult r;
  r.features = x;
  r.labels.assign(labels.begin(), labels.end());
  r.n_original = x.size();
  for (const auto& [c, o] : plan(x, labels, cfg)) {
    const auto& a = x[o.base];
    const auto& b = x[o.neighbor];
    std::vector<double> v(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) v[j] = a[j] + o.lambda * (b[j] - a[j]);
    r.features.push_back(std::move(v));
    r.labels.push_back(c);
    r.origins.push_back(o);
  }
  return r;
}

PartSmoteResult smote_parts(const std::vector<PartSample>& samples, const SmoteConfig& cfg) {
  FeatureRows keys;
  std::vector<int> labels;
  keys.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<double> key;
    for (const auto& p : s.parts) {
      for (std::size_t c = 0; c < p.cols(); ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < p.rows(); ++r) m += p(r, c);
        key.push_back(p.rows() ? m / static_cast<double>(p.rows()) : 0.0);
      }
    }
    keys.push_back(std::move(key));
    labels.push_back(s.label);
  }
  PartSmoteResult r;
  r.samples = samples;
  r.n_original = samples.size();
  for (const auto& [c, o] : plan(keys, labels, cfg)) {
    const auto& a = samples[o.base];
    const auto& b = samples[o.neighbor];
    PartSample s;
    s.label = c;
    for (std::size_t i = 0; i < a.parts.size(); ++i) {
      tc::Tensor p = a.parts[i];
      if (b.parts[i].same_shape(p)) {
        auto pv = p.values();
        auto bv = b.parts[i].values();
        for (std::size_t j = 0; j < pv.size(); ++j) pv[j] += o.lambda * (bv[j] - pv[j]);
      }
      s.parts.push_back(std::move(p));
    }
    r.samples.push_back(std::move(s));
    r.origins.push_back(o);
  }
  return r;
}

}  // namespace ccd::resample
