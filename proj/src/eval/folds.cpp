#include "ccd/eval/folds.hpp"

#include <algorithm>

#include "ccd/common/error.hpp"
#include "ccd/common/rng.hpp"

namespace ccd::eval {

FoldPlan plan_folds(std::span<const std::string> groups, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2, got " + std::to_string(k));
  if (k > groups.size()) {
    throw ConfigError("cannot split " + std::to_string(groups.size()) + " pairs into " + std::to_string(k) +
                      " folds");
  }
  std::vector<std::string> order(groups.begin(), groups.end());
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw ConfigError("plan_folds: duplicate pair id");
  }
  Rng rng(derive_seed(seed, 4));
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) plan.folds[i % k].test.push_back(order[i]);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      const auto& t = plan.folds[g].test;
      plan.folds[f].train.insert(plan.folds[f].train.end(), t.begin(), t.end());
    }
  }
  for (auto& fold : plan.folds) {
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return plan;
}

}  // namespace ccd::eval
