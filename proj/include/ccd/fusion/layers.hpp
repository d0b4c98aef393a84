#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccd/common/rng.hpp"
#include "ccd/tensorcore/graph.hpp"
#include "ccd/tensorcore/nn.hpp"

namespace ccd::fusion {

inline constexpr std::size_t kNumClasses = 3;

/// d_in -> hidden -> relu -> dropout -> hidden -> relu -> dropout -> 3 logits.
class MlpClassifier {
 public:
  MlpClassifier() = default;
  MlpClassifier(const std::string& name, std::size_t d_in, std::size_t hidden, double dropout, Rng& rng);

  /// Batch of rows -> logits (B x 3). Softmax is applied by the loss or by probabilities().
  tc::Var logits(tc::Var x, bool training, Rng& rng) const;
  /// Eval-mode class probabilities, one row per input row.
  tc::Tensor probabilities(const tc::Tensor& x) const;

  std::size_t in_features() const noexcept { return l1_.in_features(); }
  tc::Linear& output_layer() noexcept { return l3_; }
  void collect(std::vector<tc::Parameter*>& out);

 private:
  tc::Linear l1_, l2_, l3_;
  double dropout_ = 0.0;
};

/// Concatenation in the order given (callers pass canonical modality order).
tc::Var early_fuse(std::span<const tc::Var> parts);
std::vector<double> early_fuse(std::span<const std::vector<double>> parts);

/// Unweighted mean of per-modality probability rows (each B x 3).
tc::Tensor late_fuse(std::span<const tc::Tensor> probs);
std::vector<double> late_fuse(std::span<const std::vector<double>> probs);

/// [x | 1] per row.
tc::Var append_one(tc::Var x);
/// Row-wise outer product flattened row-major: out[b, i*n + j] = a[b,i] * c[b,j].
tc::Var outer_rows(tc::Var a, tc::Var c);
/// Bias-augmented outer product of every part, flattened row-major; the
/// all-bias entry is the last column. Output width prod(d_i + 1).
tc::Var tensor_fuse(std::span<const tc::Var> parts);
std::vector<double> tensor_fuse(std::span<const std::vector<double>> parts);

/// Argmax with ties to the lowest index.
int argmax(std::span<const double> p);

}  // namespace ccd::fusion
