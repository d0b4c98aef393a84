#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccd::eval {

struct Fold {
  std::vector<std::string> train;  // sorted
  std::vector<std::string> test;   // sorted
};

/// Subject-independent k-fold partition of pair ids.
struct FoldPlan {
  std::vector<Fold> folds;

  std::size_t k() const noexcept { return folds.size(); }
};

/// Seeded shuffle of the (sorted) group ids, then round-robin assignment, so
/// fold sizes differ by at most one. Throws ConfigError for k < 2, k greater
/// than the number of groups, or duplicate ids.
FoldPlan plan_folds(std::span<const std::string> groups, std::size_t k, std::uint64_t seed);

}  // namespace ccd::eval
