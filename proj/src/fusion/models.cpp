#include "ccd/fusion/models.hpp"

#include <algorithm>

#include "ccd/common/error.hpp"
#include "ccd/tensorcore/ops.hpp"

namespace ccd::fusion {

using tc::Graph;
using tc::Tensor;
using tc::Var;

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::Unimodal, "unimodal"}, {Method::Early, "early"},
    {Method::Late, "late"},         {Method::Tensor, "tensor"},
    {Method::XattnEarly, "xattn_early"}, {Method::XattnLate, "xattn_late"},
};

void check_dims(Batch batch, std::span<const std::size_t> dims) {
  if (batch.empty()) throw DataError("empty batch");
  for (const Sample* s : batch) {
    if (s->parts.size() != dims.size()) {
      throw ShapeError("sample has " + std::to_string(s->parts.size()) + " parts, model expects " +
                       std::to_string(dims.size()));
    }
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (s->parts[i].cols() != dims[i]) {
        throw ShapeError("part " + std::to_string(i) + " has width " + std::to_string(s->parts[i].cols()) +
                         ", model expects " + std::to_string(dims[i]));
      }
    }
  }
}

std::vector<Var> stacked_parts(Graph& g, Batch batch, std::span<const std::size_t> dims) {
  std::vector<Var> parts;
  for (std::size_t i = 0; i < dims.size(); ++i) parts.push_back(g.constant(stack_part(batch, i, dims[i])));
  return parts;
}

Tensor softmax_of(const Var& logits) { return tc::softmax_rows(logits.value()); }

}  // namespace

std::string_view method_name(Method m) noexcept {
  for (const auto& [k, name] : kMethodNames)
    if (k == m) return name;
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& [k, n] : kMethodNames)
    if (n == name) return k;
  return std::nullopt;
}

bool uses_sequences(Method m) noexcept { return m == Method::XattnEarly || m == Method::XattnLate; }

void FusionSpec::normalize() {
  std::sort(modalities.begin(), modalities.end());
  modalities.erase(std::unique(modalities.begin(), modalities.end()), modalities.end());
  if (method == Method::Unimodal) {
    if (modalities.size() != 1) throw ConfigError("unimodal method takes exactly one modality");
  } else if (modalities.size() < 2) {
    throw ConfigError(std::string(method_name(method)) + " fusion needs at least two modalities");
  }
  if (hidden == 0) throw ConfigError("hidden width must be >= 1");
  if (uses_sequences(method)) {
    if (xattn.embed_dim == 0 || xattn.n_heads == 0 || xattn.embed_dim % xattn.n_heads != 0) {
      throw ConfigError("xattn embed_dim must be a positive multiple of n_heads");
    }
    if (xattn.n_blocks == 0) throw ConfigError("xattn n_blocks must be >= 1");
  }
}

Tensor stack_part(Batch batch, std::size_t index, std::size_t dim) {
  Tensor out = Tensor::zeros(batch.size(), dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Tensor& p = batch[b]->parts[index];
    if (p.size() != dim) throw ShapeError("vector part must be 1 x " + std::to_string(dim));
    std::copy(p.values().begin(), p.values().end(), out.row(b).begin());
  }
  return out;
}

std::vector<int> batch_labels(Batch batch) {
  std::vector<int> y;
  y.reserve(batch.size());
  for (const Sample* s : batch) y.push_back(s->label);
  return y;
}

// ---- ConcatModel ----

ConcatModel::ConcatModel(Method method, std::span<const std::size_t> dims, std::size_t hidden, double dropout,
                         Rng& rng)
    : method_(method), dims_(dims.begin(), dims.end()) {
  std::size_t total = 0;
  for (std::size_t d : dims_) total += d;
  mlp_ = MlpClassifier(std::string(method_name(method)) + ".mlp", total, hidden, dropout, rng);
}

Var ConcatModel::logits(Graph& g, Batch batch, bool training, Rng& rng) const {
  check_dims(batch, dims_);
  auto parts = stacked_parts(g, batch, dims_);
  return mlp_.logits(early_fuse(parts), training, rng);
}

Var ConcatModel::loss(Graph& g, Batch batch, bool training, Rng& rng) const {
  const auto y = batch_labels(batch);
  return tc::cross_entropy(logits(g, batch, training, rng), y);
}

Tensor ConcatModel::predict_proba(Batch batch) const {
  Graph g;
  Rng unused(0);
  return softmax_of(logits(g, batch, false, unused));
}

std::vector<tc::Parameter*> ConcatModel::parameters() {
  std::vector<tc::Parameter*> out;
  mlp_.collect(out);
  return out;
}

// ---- EncoderModel ----

EncoderModel::EncoderModel(const seq::SeqEncoderConfig& cfg, std::size_t hidden, double dropout, Rng& rng)
    : encoder_("encoder", cfg, rng), mlp_("encoder.mlp", cfg.output_dim, hidden, dropout, rng) {}

Var EncoderModel::logits(Graph& g, Batch batch, bool training, Rng& rng) const {
  if (batch.empty()) throw DataError("empty batch");
  std::vector<Var> rows;
  rows.reserve(batch.size());
  for (const Sample* s : batch) {
    if (s->parts.size() != 1) throw ShapeError("encoder model takes exactly one part per sample");
    rows.push_back(encoder_.encode(g, s->parts[0]));
  }
  return mlp_.logits(rows.size() == 1 ? rows[0] : tc::concat_rows(rows), training, rng);
}

Var EncoderModel::loss(Graph& g, Batch batch, bool training, Rng& rng) const {
  const auto y = batch_labels(batch);
  return tc::cross_entropy(logits(g, batch, training, rng), y);
}

Tensor EncoderModel::predict_proba(Batch batch) const {
  Graph g;
  Rng unused(0);
  return softmax_of(logits(g, batch, false, unused));
}

std::vector<tc::Parameter*> EncoderModel::parameters() {
  auto out = encoder_.parameters();
  mlp_.collect(out);
  return out;
}

// ---- LateModel ----

LateModel::LateModel(std::span<const std::size_t> dims, std::size_t hidden, double dropout, Rng& rng)
    : dims_(dims.begin(), dims.end()) {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    heads_.emplace_back("late.head" + std::to_string(i), dims_[i], hidden, dropout, rng);
  }
}

Var LateModel::loss(Graph& g, Batch batch, bool training, Rng& rng) const {
  check_dims(batch, dims_);
  const auto y = batch_labels(batch);
  auto parts = stacked_parts(g, batch, dims_);
  Var total = tc::cross_entropy(heads_[0].logits(parts[0], training, rng), y);
  for (std::size_t i = 1; i < heads_.size(); ++i) {
    total = tc::add(total, tc::cross_entropy(heads_[i].logits(parts[i], training, rng), y));
  }
  return total;
}

Tensor LateModel::predict_proba(Batch batch) const {
  check_dims(batch, dims_);
  std::vector<Tensor> probs;
  for (std::size_t i = 0; i < heads_.size(); ++i) {
    probs.push_back(heads_[i].probabilities(stack_part(batch, i, dims_[i])));
  }
  return late_fuse(probs);
}

std::vector<tc::Parameter*> LateModel::parameters() {
  std::vector<tc::Parameter*> out;
  for (auto& h : heads_) h.collect(out);
  return out;
}

// ---- TensorModel ----

TensorModel::TensorModel(std::span<const std::size_t> dims, std::size_t proj_dim, std::size_t hidden, double dropout,
                         Rng& rng)
    : dims_(dims.begin(), dims.end()) {
  std::size_t fused = 1;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (proj_dim > 0) proj_.emplace_back("tensor.proj" + std::to_string(i), dims_[i], proj_dim, rng);
    fused *= (proj_dim > 0 ? proj_dim : dims_[i]) + 1;
  }
  mlp_ = MlpClassifier("tensor.mlp", fused, hidden, dropout, rng);
}

Var TensorModel::logits(Graph& g, Batch batch, bool training, Rng& rng) const {
  check_dims(batch, dims_);
  auto parts = stacked_parts(g, batch, dims_);
  if (!proj_.empty())
    for (std::size_t i = 0; i < parts.size(); ++i) parts[i] = proj_[i](parts[i]);
  return mlp_.logits(tensor_fuse(parts), training, rng);
}

Var TensorModel::loss(Graph& g, Batch batch, bool training, Rng& rng) const {
  const auto y = batch_labels(batch);
  return tc::cross_entropy(logits(g, batch, training, rng), y);
}

Tensor TensorModel::predict_proba(Batch batch) const {
  Graph g;
  Rng unused(0);
  return softmax_of(logits(g, batch, false, unused));
}

std::vector<tc::Parameter*> TensorModel::parameters() {
  std::vector<tc::Parameter*> out;
  for (auto& p : proj_) p.collect(out);
  mlp_.collect(out);
  return out;
}

// ---- CrossAttentionBlock ----

CrossAttentionBlock::CrossAttentionBlock(const std::string& name, std::size_t dim, std::size_t ffn_dim,
                                         std::size_t n_heads, Rng& rng)
    : ln_q_(name + ".ln_q", dim),
      ln_kv_(name + ".ln_kv", dim),
      ln_ffn_(name + ".ln_ffn", dim),
      wq_(name + ".wq", dim, dim, rng),
      wk_(name + ".wk", dim, dim, rng),
      wv_(name + ".wv", dim, dim, rng),
      wo_(name + ".wo", dim, dim, rng),
      ff_in_(name + ".ff_in", dim, ffn_dim, rng),
      ff_out_(name + ".ff_out", ffn_dim, dim, rng),
      n_heads_(n_heads) {
  if (n_heads == 0 || dim % n_heads != 0) throw ConfigError(name + ": dim must be a multiple of n_heads");
}

Var CrossAttentionBlock::attention_output(Var alpha, Var beta, const tc::AttentionMask& mask) const {
  if (alpha.value().cols() != beta.value().cols()) throw ShapeError("cross-attention: model dims differ");
  Var kv = ln_kv_(beta);
  return tc::attention(wq_(ln_q_(alpha)), wk_(kv), wv_(kv), mask, n_heads_);
}

Var CrossAttentionBlock::operator()(Var alpha, Var beta, const tc::AttentionMask& mask) const {
  Var h = tc::add(alpha, wo_(attention_output(alpha, beta, mask)));
  return tc::add(h, ff_out_(tc::relu(ff_in_(ln_ffn_(h)))));
}

Tensor CrossAttentionBlock::scores(const Tensor& alpha, const Tensor& beta, std::size_t head) const {
  Graph g;
  Var q = wq_(ln_q_(g.constant(alpha)));
  Var k = wk_(ln_kv_(g.constant(beta)));
  return tc::attention_weights(q.value(), k.value(), tc::AttentionMask::full(), n_heads_, head);
}

Tensor CrossAttentionBlock::values(const Tensor& beta) const {
  Graph g;
  return wv_(ln_kv_(g.constant(beta))).value();
}

void CrossAttentionBlock::collect(std::vector<tc::Parameter*>& out) {
  ln_q_.collect(out);
  ln_kv_.collect(out);
  ln_ffn_.collect(out);
  wq_.collect(out);
  wk_.collect(out);
  wv_.collect(out);
  wo_.collect(out);
  ff_in_.collect(out);
  ff_out_.collect(out);
}

// ---- CrossAttentionModel ----

CrossAttentionModel::CrossAttentionModel(Method method, std::span<const std::size_t> dims, const XattnOptions& opt,
                                         std::size_t hidden, double dropout, Rng& rng)
    : method_(method), dims_(dims.begin(), dims.end()) {
  if (!uses_sequences(method)) throw ConfigError("CrossAttentionModel needs an xattn method");
  if (dims_.size() < 2) throw ConfigError("cross-attention fusion needs at least two modalities");
  const std::size_t e = opt.embed_dim;
  const std::size_t ffn = opt.ffn_dim ? opt.ffn_dim : 2 * e;
  const std::string base = std::string(method_name(method));
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    tokenizers_.emplace_back(base + ".tok" + std::to_string(m), dims_[m], e, opt.max_sequence, opt.positional, rng);
  }
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    for (std::size_t b = 0; b < dims_.size(); ++b) {
      if (a == b) continue;
      Stream s{a, b, {}};
      for (std::size_t k = 0; k < opt.n_blocks; ++k) {
        s.blocks.emplace_back(base + ".stream" + std::to_string(a) + "from" + std::to_string(b) + ".block" +
                                  std::to_string(k),
                              e, ffn, opt.n_heads, rng);
      }
      streams_.push_back(std::move(s));
    }
  }
  pool_dim_ = (dims_.size() - 1) * e;
  for (std::size_t a = 0; a < dims_.size(); ++a) pool_norm_.emplace_back(base + ".pool" + std::to_string(a), pool_dim_);
  if (method == Method::XattnEarly) {
    heads_.emplace_back(base + ".mlp", dims_.size() * pool_dim_, hidden, dropout, rng);
  } else {
    for (std::size_t a = 0; a < dims_.size(); ++a) {
      heads_.emplace_back(base + ".head" + std::to_string(a), pool_dim_, hidden, dropout, rng);
    }
  }
}

std::size_t CrossAttentionModel::classifier_input_dim() const noexcept { return heads_.front().in_features(); }

std::vector<Var> CrossAttentionModel::pooled(Graph& g, Batch batch) const {
  check_dims(batch, dims_);
  const std::size_t m = dims_.size();
  // The batch is packed per modality: sample b's tokens follow sample b-1's,
  // and segmented masks keep samples from attending to each other.
  std::vector<Var> tokens;
  std::vector<std::vector<std::size_t>> lengths(m);
  std::vector<std::vector<std::size_t>> firsts(m);  // row of each sample's global token
  std::vector<const Tensor*> parts(batch.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t b = 0; b < batch.size(); ++b) parts[b] = &batch[b]->parts[i];
    tokens.push_back(tokenizers_[i].packed(g, parts, lengths[i]));
    std::size_t offset = 0;
    for (std::size_t len : lengths[i]) {
      firsts[i].push_back(offset);
      offset += len;
    }
  }
  std::vector<std::vector<Var>> per_target(m);
  for (const auto& st : streams_) {
    const auto mask = tc::AttentionMask::segmented(lengths[st.target], lengths[st.source]);
    Var x = tokens[st.target];
    for (const auto& blk : st.blocks) x = blk(x, tokens[st.source], mask);
    per_target[st.target].push_back(tc::select_rows(x, firsts[st.target]));
  }
  std::vector<Var> out;
  for (std::size_t a = 0; a < m; ++a) out.push_back(pool_norm_[a](tc::concat_cols(per_target[a])));
  return out;
}

Var CrossAttentionModel::loss(Graph& g, Batch batch, bool training, Rng& rng) const {
  const auto y = batch_labels(batch);
  auto pooled_rows = pooled(g, batch);
  if (method_ == Method::XattnEarly) {
    return tc::cross_entropy(heads_[0].logits(early_fuse(pooled_rows), training, rng), y);
  }
  Var total = tc::cross_entropy(heads_[0].logits(pooled_rows[0], training, rng), y);
  for (std::size_t a = 1; a < heads_.size(); ++a) {
    total = tc::add(total, tc::cross_entropy(heads_[a].logits(pooled_rows[a], training, rng), y));
  }
  return total;
}

Tensor CrossAttentionModel::predict_proba(Batch batch) const {
  Graph g;
  Rng unused(0);
  auto pooled_rows = pooled(g, batch);
  if (method_ == Method::XattnEarly) return softmax_of(heads_[0].logits(early_fuse(pooled_rows), false, unused));
  std::vector<Tensor> probs;
  for (std::size_t a = 0; a < heads_.size(); ++a) probs.push_back(softmax_of(heads_[a].logits(pooled_rows[a], false, unused)));
  return late_fuse(probs);
}

std::vector<tc::Parameter*> CrossAttentionModel::parameters() {
  std::vector<tc::Parameter*> out;
  for (auto& t : tokenizers_) t.collect(out);
  for (auto& s : streams_)
    for (auto& b : s.blocks) b.collect(out);
  for (auto& n : pool_norm_) n.collect(out);
  for (auto& h : heads_) h.collect(out);
  return out;
}

std::unique_ptr<Classifier> make_classifier(const FusionSpec& spec_in, std::span<const std::size_t> dims,
                                            double dropout, Rng& rng) {
  FusionSpec spec = spec_in;
  spec.normalize();
  if (dims.size() != spec.modalities.size()) throw ConfigError("one input width per modality is required");
  switch (spec.method) {
    case Method::Unimodal:
    case Method::Early: return std::make_unique<ConcatModel>(spec.method, dims, spec.hidden, dropout, rng);
    case Method::Late: return std::make_unique<LateModel>(dims, spec.hidden, dropout, rng);
    case Method::Tensor:
      return std::make_unique<TensorModel>(dims, spec.tensor_proj_dim, spec.hidden, dropout, rng);
    case Method::XattnEarly:
    case Method::XattnLate:
      return std::make_unique<CrossAttentionModel>(spec.method, dims, spec.xattn, spec.hidden, dropout, rng);
  }
  throw ConfigError("unknown fusion method");
}

}  // namespace ccd::fusion
