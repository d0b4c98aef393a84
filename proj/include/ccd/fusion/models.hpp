#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccd/common/rng.hpp"
#include "ccd/datamodel/types.hpp"
#include "ccd/fusion/layers.hpp"
#include "ccd/seqembed/encoder.hpp"
#include "ccd/tensorcore/graph.hpp"

namespace ccd::fusion {

enum class Method { Unimodal, Early, Late, Tensor, XattnEarly, XattnLate };

std::string_view method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name);
/// Cross-attention methods consume frame sequences; the rest consume vectors.
bool uses_sequences(Method m) noexcept;

struct XattnOptions {
  std::size_t embed_dim = 32;
  std::size_t n_heads = 2;
  std::size_t n_blocks = 1;
  std::size_t ffn_dim = 0;  // 0 means 2 * embed_dim
  std::size_t max_sequence = 4096;
  seq::Positional positional = seq::Positional::Sinusoidal;

  bool operator==(const XattnOptions&) const = default;
};

struct FusionSpec {
  Method method = Method::Early;
  /// Kept in canonical order (language, audio, video) by normalize().
  std::vector<data::Modality> modalities = {data::Modality::Language, data::Modality::Audio,
                                            data::Modality::Video};
  std::size_t hidden = 128;
  /// Width each modality is projected to before the outer product; 0 keeps
  /// the raw width.
  std::size_t tensor_proj_dim = 8;
  XattnOptions xattn;

  /// Sorts modalities canonically and checks the method's arity. Throws ConfigError.
  void normalize();
  bool operator==(const FusionSpec&) const = default;
};

/// One training or evaluation example: a tensor per participating modality
/// in canonical order (1 x d for vector methods, T x d for sequence methods).
struct Sample {
  std::vector<tc::Tensor> parts;
  int label = 0;
  /// Index of the originating record, or -1 for a synthetic (SMOTE) sample.
  long source = -1;
};

using Batch = std::span<const Sample* const>;

class Classifier {
 public:
  virtual ~Classifier() = default;

  /// Mean cross-entropy over the batch (summed over heads for late variants).
  virtual tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const = 0;
  /// Eval-mode probabilities, B x 3.
  virtual tc::Tensor predict_proba(Batch batch) const = 0;
  virtual std::vector<tc::Parameter*> parameters() = 0;
  virtual Method method() const noexcept = 0;
};

/// Single MLP over the concatenated parts; unimodal when there is one part.
class ConcatModel final : public Classifier {
 public:
  ConcatModel(Method method, std::span<const std::size_t> dims, std::size_t hidden, double dropout, Rng& rng);
  tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const override;
  tc::Tensor predict_proba(Batch batch) const override;
  std::vector<tc::Parameter*> parameters() override;
  Method method() const noexcept override { return method_; }
  MlpClassifier& head() noexcept { return mlp_; }

 private:
  tc::Var logits(tc::Graph& g, Batch batch, bool training, Rng& rng) const;

  Method method_;
  std::vector<std::size_t> dims_;
  MlpClassifier mlp_;
};

/// One MLP per modality; probabilities averaged.
class LateModel final : public Classifier {
 public:
  LateModel(std::span<const std::size_t> dims, std::size_t hidden, double dropout, Rng& rng);
  tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const override;
  tc::Tensor predict_proba(Batch batch) const override;
  std::vector<tc::Parameter*> parameters() override;
  Method method() const noexcept override { return Method::Late; }

 private:
  std::vector<std::size_t> dims_;
  std::vector<MlpClassifier> heads_;
};

/// Optional per-modality projection, bias-augmented outer product, MLP.
class TensorModel final : public Classifier {
 public:
  TensorModel(std::span<const std::size_t> dims, std::size_t proj_dim, std::size_t hidden, double dropout,
              Rng& rng);
  tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const override;
  tc::Tensor predict_proba(Batch batch) const override;
  std::vector<tc::Parameter*> parameters() override;
  Method method() const noexcept override { return Method::Tensor; }
  std::size_t fused_dim() const noexcept { return mlp_.in_features(); }

 private:
  tc::Var logits(tc::Graph& g, Batch batch, bool training, Rng& rng) const;

  std::vector<std::size_t> dims_;
  std::vector<tc::Linear> proj_;
  MlpClassifier mlp_;
};

/// Unimodal classifier over one frame sequence: sequence encoder, then MLP.
class EncoderModel final : public Classifier {
 public:
  EncoderModel(const seq::SeqEncoderConfig& cfg, std::size_t hidden, double dropout, Rng& rng);
  tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const override;
  tc::Tensor predict_proba(Batch batch) const override;
  std::vector<tc::Parameter*> parameters() override;
  Method method() const noexcept override { return Method::Unimodal; }
  const seq::SeqEncoder& encoder() const noexcept { return encoder_; }

 private:
  tc::Var logits(tc::Graph& g, Batch batch, bool training, Rng& rng) const;

  seq::SeqEncoder encoder_;
  MlpClassifier mlp_;
};

/// Pre-norm cross-attention: queries from alpha, keys and values from beta,
/// then a residual feed-forward.
class CrossAttentionBlock {
 public:
  CrossAttentionBlock() = default;
  CrossAttentionBlock(const std::string& name, std::size_t dim, std::size_t ffn_dim, std::size_t n_heads, Rng& rng);

  /// `mask` may pack several samples into alpha and beta (see AttentionMask::segmented).
  tc::Var operator()(tc::Var alpha, tc::Var beta, const tc::AttentionMask& mask = tc::AttentionMask::full()) const;
  /// The attention result before the output projection, len(alpha) x dim.
  tc::Var attention_output(tc::Var alpha, tc::Var beta,
                           const tc::AttentionMask& mask = tc::AttentionMask::full()) const;
  /// Scoring matrix of one head, len(alpha) x len(beta), rows summing to 1.
  tc::Tensor scores(const tc::Tensor& alpha, const tc::Tensor& beta, std::size_t head = 0) const;
  /// Value projection of beta (after its layer norm).
  tc::Tensor values(const tc::Tensor& beta) const;
  void collect(std::vector<tc::Parameter*>& out);

 private:
  tc::LayerNorm ln_q_, ln_kv_, ln_ffn_;
  tc::Linear wq_, wk_, wv_, wo_, ff_in_, ff_out_;
  std::size_t n_heads_ = 1;
};

/// Pairwise crossmodal streams pooled at each target's global token.
class CrossAttentionModel final : public Classifier {
 public:
  CrossAttentionModel(Method method, std::span<const std::size_t> dims, const XattnOptions& opt, std::size_t hidden,
                      double dropout, Rng& rng);
  tc::Var loss(tc::Graph& g, Batch batch, bool training, Rng& rng) const override;
  tc::Tensor predict_proba(Batch batch) const override;
  std::vector<tc::Parameter*> parameters() override;
  Method method() const noexcept override { return method_; }

  std::size_t n_streams() const noexcept { return streams_.size(); }
  /// Width of one target's pooled vector: (modalities - 1) * embed_dim.
  std::size_t pool_dim() const noexcept { return pool_dim_; }
  std::size_t classifier_input_dim() const noexcept;
  /// Pooled vectors, one B x pool_dim matrix per target modality.
  std::vector<tc::Var> pooled(tc::Graph& g, Batch batch) const;

 private:
  struct Stream {
    std::size_t target = 0;
    std::size_t source = 0;
    std::vector<CrossAttentionBlock> blocks;
  };

  Method method_;
  std::vector<std::size_t> dims_;
  std::vector<seq::FrameTokenizer> tokenizers_;
  std::vector<Stream> streams_;
  std::vector<tc::LayerNorm> pool_norm_;
  std::size_t pool_dim_ = 0;
  std::vector<MlpClassifier> heads_;  // one for early, one per target for late
};

/// Builds the classifier for a spec given each part's input width.
std::unique_ptr<Classifier> make_classifier(const FusionSpec& spec, std::span<const std::size_t> dims,
                                            double dropout, Rng& rng);

/// Stacks part `index` of every sample into a B x d matrix (each part 1 x d).
tc::Tensor stack_part(Batch batch, std::size_t index, std::size_t dim);
std::vector<int> batch_labels(Batch batch);

}  // namespace ccd::fusion
