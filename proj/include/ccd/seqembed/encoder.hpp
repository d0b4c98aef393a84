#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccd/common/rng.hpp"
#include "ccd/datamodel/types.hpp"
#include "ccd/tensorcore/graph.hpp"
#include "ccd/tensorcore/nn.hpp"
#include "ccd/tensorcore/ops.hpp"

namespace ccd::seq {

enum class Positional { Sinusoidal, None };

struct SeqEncoderConfig {
  std::size_t input_dim = 0;  // d of the frame feature set
  std::size_t value_embed_dim = 64;
  std::size_t output_dim = 768;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t window = 65;  // odd
  std::size_t max_sequence = 4096;
  std::size_t ffn_dim = 0;  // 0 means 2 * value_embed_dim
  Positional positional = Positional::Sinusoidal;
  /// Ignore the window and let every token see every token.
  bool full_attention = false;

  std::size_t ffn_width() const noexcept { return ffn_dim ? ffn_dim : 2 * value_embed_dim; }
  tc::AttentionMask mask() const;
  /// Throws ConfigError.
  void validate() const;

  bool operator==(const SeqEncoderConfig&) const = default;
};

/// Sinusoidal position table, rows x dim.
tc::Tensor sinusoidal_positions(std::size_t rows, std::size_t dim);

/// Row-per-frame tensor view of a frame matrix.
tc::Tensor frames_tensor(const data::Frames& frames);

/// Value embedding plus a prepended global token plus positions:
/// (T x d) -> ((T+1) x E), frames beyond max_sequence dropped from the tail.
class FrameTokenizer {
 public:
  FrameTokenizer() = default;
  FrameTokenizer(const std::string& name, std::size_t input_dim, std::size_t embed_dim, std::size_t max_sequence,
                 Positional positional, Rng& rng);

  tc::Var operator()(tc::Graph& g, const tc::Tensor& frames) const;
  /// Tokens of several sequences stacked in order, equal row for row to
  /// calling the tokenizer on each; `lengths` receives each sequence's token count.
  tc::Var packed(tc::Graph& g, std::span<const tc::Tensor* const> frames, std::vector<std::size_t>& lengths) const;

  std::size_t input_dim() const noexcept { return value_embed_.in_features(); }
  std::size_t embed_dim() const noexcept { return value_embed_.out_features(); }
  void collect(std::vector<tc::Parameter*>& out);

 private:
  tc::Linear value_embed_;
  mutable tc::Parameter global_;
  std::size_t max_sequence_ = 0;
  Positional positional_ = Positional::Sinusoidal;
};

/// Pre-norm transformer block with banded self-attention.
struct EncoderLayer {
  tc::LayerNorm ln_attn;
  tc::Linear wq, wk, wv, wo;
  tc::LayerNorm ln_ffn;
  tc::Linear ff_in, ff_out;

  EncoderLayer() = default;
  EncoderLayer(const std::string& name, std::size_t dim, std::size_t ffn_dim, Rng& rng);
  tc::Var operator()(tc::Var x, const tc::AttentionMask& mask, std::size_t n_heads) const;
  void collect(std::vector<tc::Parameter*>& out);
};

/// Frame sequence -> one output_dim vector read off the global token.
class SeqEncoder {
 public:
  SeqEncoder() = default;
  SeqEncoder(std::string name, const SeqEncoderConfig& cfg, Rng& rng);

  tc::Var tokenize(tc::Graph& g, const tc::Tensor& frames) const;
  /// Final-layer states, (T+1) x E, before the output projection.
  tc::Var states(tc::Graph& g, const tc::Tensor& frames) const;
  /// 1 x output_dim.
  tc::Var encode(tc::Graph& g, const tc::Tensor& frames) const;
  /// Forward-only convenience.
  std::vector<double> embed(const tc::Tensor& frames) const;

  bool fitted() const noexcept { return fitted_; }
  const SeqEncoderConfig& config() const noexcept { return cfg_; }
  const std::string& name() const noexcept { return name_; }
  std::vector<tc::Parameter*> parameters();

 private:
  void require_fitted() const;
  tc::Var run_layers(tc::Graph& g, const tc::Tensor& frames) const;

  std::string name_;
  SeqEncoderConfig cfg_;
  bool fitted_ = false;
  FrameTokenizer tokenizer_;
  std::vector<EncoderLayer> layers_;
  tc::LayerNorm ln_final_;
  tc::Linear project_;
};

}  // namespace ccd::seq
