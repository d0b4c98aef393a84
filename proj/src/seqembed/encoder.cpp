#include "ccd/seqembed/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ccd/common/error.hpp"

namespace ccd::seq {

using tc::Graph;
using tc::Tensor;
using tc::Var;

tc::AttentionMask SeqEncoderConfig::mask() const {
  return full_attention ? tc::AttentionMask::full() : tc::AttentionMask::sliding(window, true);
}

void SeqEncoderConfig::validate() const {
  if (input_dim == 0) throw ConfigError("encoder input_dim must be >= 1");
  if (value_embed_dim == 0 || output_dim == 0) throw ConfigError("encoder dims must be >= 1");
  if (n_heads == 0) throw ConfigError("encoder n_heads must be >= 1");
  if (value_embed_dim % n_heads != 0) {
    throw ConfigError("value_embed_dim " + std::to_string(value_embed_dim) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (output_dim % n_heads != 0) {
    throw ConfigError("output_dim " + std::to_string(output_dim) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (window == 0 || window % 2 == 0) throw ConfigError("window must be odd and >= 1");
  if (max_sequence == 0) throw ConfigError("max_sequence must be >= 1");
}

Tensor sinusoidal_positions(std::size_t rows, std::size_t dim) {
  Tensor t = Tensor::zeros(rows, dim);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double a = static_cast<double>(pos) * freq;
      t(pos, i) = i % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return t;
}

Tensor frames_tensor(const data::Frames& frames) {
  return Tensor({frames.rows, frames.cols}, frames.values);
}

FrameTokenizer::FrameTokenizer(const std::string& name, std::size_t input_dim, std::size_t embed_dim,
                               std::size_t max_sequence, Positional positional, Rng& rng)
    : value_embed_(name + ".value_embed", input_dim, embed_dim, rng),
      global_(name + ".global", Tensor::zeros(1, embed_dim)),
      max_sequence_(max_sequence),
      positional_(positional) {
  std::normal_distribution<double> n(0.0, 0.02);
  for (double& x : global_.value.values()) x = n(rng);
}

Var FrameTokenizer::operator()(Graph& g, const Tensor& frames) const {
  if (frames.rank() != 2 || frames.cols() != input_dim()) {
    throw ShapeError("frame width " + std::to_string(frames.cols()) + " does not match the embedder input dim " +
                     std::to_string(input_dim()));
  }
  const std::size_t t = std::min(frames.rows(), max_sequence_);
  Var tokens = g.param(global_);
  if (t > 0) {
    Var input = g.constant(frames);
    if (t < frames.rows()) input = tc::slice_rows(input, 0, t);
    const Var parts[] = {tokens, value_embed_(input)};
    tokens = tc::concat_rows(parts);
  }
  if (positional_ == Positional::Sinusoidal) {
    tokens = tc::add(tokens, g.constant(sinusoidal_positions(t + 1, embed_dim())));
  }
  return tokens;
}

Var FrameTokenizer::packed(Graph& g, std::span<const Tensor* const> frames, std::vector<std::size_t>& lengths) const {
  if (frames.empty()) throw ShapeError("packed tokenizer needs at least one sequence");
  const std::size_t d = input_dim();
  lengths.clear();
  std::vector<double> stacked;
  std::size_t total = 0;
  for (const Tensor* f : frames) {
    if (f->rank() != 2 || f->cols() != d) {
      throw ShapeError("frame width " + std::to_string(f->cols()) + " does not match the embedder input dim " +
                       std::to_string(d));
    }
    const std::size_t t = std::min(f->rows(), max_sequence_);
    stacked.insert(stacked.end(), f->values().begin(), f->values().begin() + static_cast<std::ptrdiff_t>(t * d));
    lengths.push_back(t + 1);
    total += t;
  }
  // Row 0 of `source` is the global token, row 1 + r the r-th stacked frame.
  Var source = g.param(global_);
  if (total > 0) {
    const Var parts[] = {source, value_embed_(g.constant(Tensor::matrix(total, d, std::move(stacked))))};
    source = tc::concat_rows(parts);
  }
  std::vector<std::size_t> rows;
  std::size_t next = 1;
  for (std::size_t len : lengths) {
    rows.push_back(0);
    for (std::size_t r = 1; r < len; ++r) rows.push_back(next++);
  }
  Var tokens = tc::select_rows(source, rows);
  if (positional_ == Positional::Sinusoidal) {
    const std::size_t e = embed_dim();
    const Tensor table = sinusoidal_positions(*std::max_element(lengths.begin(), lengths.end()), e);
    Tensor pos = Tensor::zeros(rows.size(), e);
    std::size_t at = 0;
    for (std::size_t len : lengths)
      for (std::size_t r = 0; r < len; ++r, ++at) std::copy_n(table.row(r).begin(), e, pos.row(at).begin());
    tokens = tc::add(tokens, g.constant(std::move(pos)));
  }
  return tokens;
}

void FrameTokenizer::collect(std::vector<tc::Parameter*>& out) {
  value_embed_.collect(out);
  out.push_back(&global_);
}

EncoderLayer::EncoderLayer(const std::string& name, std::size_t dim, std::size_t ffn_dim, Rng& rng)
    : ln_attn(name + ".ln_attn", dim),
      wq(name + ".wq", dim, dim, rng),
      wk(name + ".wk", dim, dim, rng),
      wv(name + ".wv", dim, dim, rng),
      wo(name + ".wo", dim, dim, rng),
      ln_ffn(name + ".ln_ffn", dim),
      ff_in(name + ".ff_in", dim, ffn_dim, rng),
      ff_out(name + ".ff_out", ffn_dim, dim, rng) {}

Var EncoderLayer::operator()(Var x, const tc::AttentionMask& mask, std::size_t n_heads) const {
  Var h = ln_attn(x);
  x = tc::add(x, wo(tc::attention(wq(h), wk(h), wv(h), mask, n_heads)));
  return tc::add(x, ff_out(tc::relu(ff_in(ln_ffn(x)))));
}

void EncoderLayer::collect(std::vector<tc::Parameter*>& out) {
  ln_attn.collect(out);
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  ln_ffn.collect(out);
  ff_in.collect(out);
  ff_out.collect(out);
}

SeqEncoder::SeqEncoder(std::string name, const SeqEncoderConfig& cfg, Rng& rng) : name_(std::move(name)), cfg_(cfg) {
  cfg_.validate();
  tokenizer_ = FrameTokenizer(name_, cfg_.input_dim, cfg_.value_embed_dim, cfg_.max_sequence, cfg_.positional, rng);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    layers_.emplace_back(name_ + ".layer" + std::to_string(l), cfg_.value_embed_dim, cfg_.ffn_width(), rng);
  }
  ln_final_ = tc::LayerNorm(name_ + ".ln_final", cfg_.value_embed_dim);
  project_ = tc::Linear(name_ + ".project", cfg_.value_embed_dim, cfg_.output_dim, rng);
  fitted_ = true;
}

void SeqEncoder::require_fitted() const {
  if (!fitted_) throw ConfigError("sequence encoder used before it was constructed for a feature set");
}

Var SeqEncoder::tokenize(Graph& g, const Tensor& frames) const {
  require_fitted();
  return tokenizer_(g, frames);
}

Var SeqEncoder::run_layers(Graph& g, const Tensor& frames) const {
  Var x = tokenize(g, frames);
  const auto mask = cfg_.mask();
  for (const auto& layer : layers_) x = layer(x, mask, cfg_.n_heads);
  return x;
}

Var SeqEncoder::states(Graph& g, const Tensor& frames) const { return ln_final_(run_layers(g, frames)); }

Var SeqEncoder::encode(Graph& g, const Tensor& frames) const {
  // Layer norm is row-wise, so normalizing only the global row is exact.
  return project_(ln_final_(tc::slice_rows(run_layers(g, frames), 0, 1)));
}

std::vector<double> SeqEncoder::embed(const Tensor& frames) const {
  Graph g;
  Var out = encode(g, frames);
  return {out.value().values().begin(), out.value().values().end()};
}

std::vector<tc::Parameter*> SeqEncoder::parameters() {
  std::vector<tc::Parameter*> out;
  tokenizer_.collect(out);
  for (auto& l : layers_) l.collect(out);
  ln_final_.collect(out);
  project_.collect(out);
  return out;
}

}  // namespace ccd::seq
