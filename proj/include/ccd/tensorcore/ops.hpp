#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "ccd/common/rng.hpp"
#include "ccd/tensorcore/graph.hpp"

namespace ccd::tc {

// Differentiable operations on rank-2 tensors. Every op records itself on
// the graph owning its operands and returns the output node.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(Var a, Var row);
Var sum(Var a);
Var mean(Var a);
Var log(Var a);

Var relu(Var a);
/// Inverted dropout: zeroes each entry with probability `rate` and scales
/// survivors by 1/(1-rate) when training; identity otherwise.
Var dropout(Var a, double rate, Rng& rng, bool training);
/// Row-wise layer normalization with learned gain and bias (both 1 x n).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Row-wise softmax with max subtraction.
Var softmax(Var a);
Var log_softmax(Var a);
/// Mean over rows of -log softmax(logits)[target]. Takes raw logits.
Var cross_entropy(Var logits, std::span<const int> targets);
/// Mean over rows of -logp[target] for rows that already hold log-probabilities.
Var nll(Var log_probs, std::span<const int> targets);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
/// Rows `rows[i]` of `a`, in the given order; repeats are allowed.
Var select_rows(Var a, std::span<const std::size_t> rows);

/// Which keys each query may attend to.
///
/// `sliding` implements a banded mask |i - j| <= (window - 1) / 2; with
/// `global_first` position 0 is a global token that attends to, and is
/// attended by, every position. `segmented` packs several independent
/// sequences into one tensor: query segment s (query_lengths[s] rows) sees
/// only key segment s (key_lengths[s] rows). Masked pairs get exactly zero weight.
class AttentionMask {
 public:
  static AttentionMask full() { return AttentionMask(0, false, true); }
  static AttentionMask sliding(std::size_t window, bool global_first);
  /// Throws ConfigError unless both lists have equal length and every key segment is non-empty.
  static AttentionMask segmented(std::span<const std::size_t> query_lengths,
                                 std::span<const std::size_t> key_lengths);

  bool is_full() const noexcept { return full_; }
  std::size_t window() const noexcept { return window_; }
  bool global_first() const noexcept { return global_; }
  bool allows(std::size_t query, std::size_t key) const noexcept;
  /// Contiguous key range [first, last] for a query excluding the global
  /// token column; `with_global` tells whether key 0 must be visited too.
  struct KeyRange {
    std::size_t first;
    std::size_t last;  // inclusive; first > last means empty
    bool with_global;
  };
  KeyRange keys_for(std::size_t query, std::size_t n_keys) const noexcept;
  /// Throws ShapeError when a segmented mask does not cover tq x tk exactly.
  void check_extent(std::size_t tq, std::size_t tk) const;

 private:
  struct Segments {
    std::vector<std::size_t> query_segment;  // segment of each query row
    std::vector<std::size_t> key_begin;      // first key row of each segment
    std::size_t total_keys = 0;
  };

  AttentionMask(std::size_t window, bool global_first, bool full)
      : window_(window), global_(global_first), full_(full) {}

  std::size_t window_;
  bool global_;
  bool full_;
  std::shared_ptr<const Segments> segments_;
};

/// Multi-head scaled dot-product attention. q is Tq x d, k is Tk x d, v is
/// Tk x dv; columns are split evenly into `n_heads` heads and the head
/// outputs are concatenated. Keys are visited in ascending index order.
Var attention(Var q, Var k, Var v, const AttentionMask& mask, std::size_t n_heads = 1);

/// Forward-only attention weights (Tq x Tk) of one head, zero where masked.
Tensor attention_weights(const Tensor& q, const Tensor& k, const AttentionMask& mask,
                         std::size_t n_heads = 1, std::size_t head = 0);

// Plain tensor helpers.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& logits);

}  // namespace ccd::tc
