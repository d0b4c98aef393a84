#include "ccd/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "ccd/common/error.hpp"
#include "ccd/tensorcore/adam.hpp"
#include "ccd/tensorcore/checkpoint.hpp"

namespace ccd::train {

using fusion::Sample;
using tc::Tensor;

namespace {

// Eval-mode passes are chunked to bound the size of one graph.
constexpr std::size_t kEvalChunk = 64;

std::vector<const Sample*> pointers(std::span<const Sample> samples) {
  std::vector<const Sample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

std::string format_loss(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view regime_name(Regime r) noexcept { return r == Regime::Unimodal ? "unimodal" : "fusion"; }

std::optional<Regime> parse_regime(std::string_view name) {
  if (name == "unimodal") return Regime::Unimodal;
  if (name == "fusion") return Regime::Fusion;
  return std::nullopt;
}

TrainConfig TrainConfig::unimodal() {
  TrainConfig c;
  c.regime = Regime::Unimodal;
  c.lr = 1e-3;
  c.max_epochs = 100;
  c.batch_size = 0;
  c.dropout = 0.5;
  c.l2 = 0.0;
  c.patience = -1;
  return c;
}

TrainConfig TrainConfig::fusion() { return TrainConfig{}; }

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be >= 0");
  if (patience >= 0 && static_cast<std::size_t>(patience) > max_epochs) {
    throw ConfigError("patience must not exceed max_epochs");
  }
}

double mean_loss(const fusion::Classifier& model, std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("mean_loss: empty partition");
  const auto ptrs = pointers(samples);
  Rng unused(0);
  double total = 0.0;
  for (std::size_t begin = 0; begin < ptrs.size(); begin += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, ptrs.size() - begin);
    tc::Graph g;
    const double chunk = model.loss(g, fusion::Batch(ptrs.data() + begin, n), false, unused).value()[0];
    total += chunk * static_cast<double>(n);
  }
  return total / static_cast<double>(ptrs.size());
}

Tensor predict(const fusion::Classifier& model, std::span<const Sample> samples) {
  const auto ptrs = pointers(samples);
  Tensor out = Tensor::zeros(ptrs.size(), fusion::kNumClasses);
  for (std::size_t begin = 0; begin < ptrs.size(); begin += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, ptrs.size() - begin);
    const Tensor p = model.predict_proba(fusion::Batch(ptrs.data() + begin, n));
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(begin * p.cols()));
  }
  return out;
}

TrainHistory train(fusion::Classifier& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training partition");
  for (const auto& s : val_set) {
    if (s.source < 0) throw DataError("train: validation partition contains a synthetic sample");
  }

  const auto params = model.parameters();
  tc::AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.l2;
  tc::AdamState state;

  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  auto order = pointers(train_set);
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : cfg.batch_size;
  const bool has_val = !val_set.empty();
  const std::size_t patience = cfg.patience < 0 ? 0 : static_cast<std::size_t>(cfg.patience);

  TrainHistory history;
  tc::TensorTable best;
  std::size_t wait = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t n = std::min(batch, order.size() - begin);
      for (auto* p : params) p->zero_grad();
      tc::Graph g;
      const tc::Var loss = model.loss(g, fusion::Batch(order.data() + begin, n), true, dropout_rng);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss " + format_loss(value) + " at epoch " + std::to_string(epoch) +
                           ", batch starting at " + std::to_string(begin) + " (lr " + format_loss(cfg.lr) + ")");
      }
      g.backward(loss);
      tc::adam_step(params, state, adam);
      total += value * static_cast<double>(n);
    }

    EpochRecord rec{epoch, total / static_cast<double>(order.size())};
    if (has_val) {
      rec.val_loss = mean_loss(model, val_set);
      if (!std::isfinite(rec.val_loss)) {
        throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
      }
      if (history.best_epoch == 0 || rec.val_loss < history.best_val_loss) {
        history.best_epoch = epoch;
        history.best_val_loss = rec.val_loss;
        best = tc::snapshot(params);
        wait = 0;
      } else {
        ++wait;
      }
    }
    history.epochs.push_back(rec);
    if (has_val && cfg.patience >= 0 && wait >= std::max<std::size_t>(patience, 1)) {
      history.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }

  if (history.best_epoch != 0) tc::restore(params, best);
  return history;
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_loss(e.train_loss) << ',';
    if (!std::isnan(e.val_loss)) out << format_loss(e.val_loss);
    out << '\n';
  }
}

GroupSplit make_validation_split(std::span<const std::string> groups, double fraction, std::uint64_t seed) {
  if (groups.size() < 2) throw ConfigError("validation split needs at least 2 groups, got " +
                                           std::to_string(groups.size()));
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<std::string> shuffled(groups.begin(), groups.end());
  std::sort(shuffled.begin(), shuffled.end());
  if (std::adjacent_find(shuffled.begin(), shuffled.end()) != shuffled.end()) {
    throw ConfigError("validation split: duplicate group id");
  }
  Rng rng(derive_seed(seed, 3));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  // The epsilon keeps 0.1 * 20 at 2 rather than 3 after rounding error.
  auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(groups.size()) - 1e-9));
  n_val = std::min(n_val, groups.size() - 1);

  GroupSplit split;
  split.validation.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.fit.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.fit.begin(), split.fit.end());
  return split;
}

}  // namespace ccd::train
