#include "ccd/fusion/layers.hpp"

#include "ccd/common/error.hpp"
#include "ccd/tensorcore/ops.hpp"

namespace ccd::fusion {

using tc::Graph;
using tc::Tensor;
using tc::Var;

MlpClassifier::MlpClassifier(const std::string& name, std::size_t d_in, std::size_t hidden, double dropout, Rng& rng)
    : l1_(name + ".fc1", d_in, hidden, rng),
      l2_(name + ".fc2", hidden, hidden, rng),
      l3_(name + ".out", hidden, kNumClasses, rng),
      dropout_(dropout) {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(name + ": dropout must be in [0, 1)");
}

Var MlpClassifier::logits(Var x, bool training, Rng& rng) const {
  Var h = tc::dropout(tc::relu(l1_(x)), dropout_, rng, training);
  h = tc::dropout(tc::relu(l2_(h)), dropout_, rng, training);
  return l3_(h);
}

Tensor MlpClassifier::probabilities(const Tensor& x) const {
  Graph g;
  Rng unused(0);
  return tc::softmax_rows(logits(g.constant(x), false, unused).value());
}

void MlpClassifier::collect(std::vector<tc::Parameter*>& out) {
  l1_.collect(out);
  l2_.collect(out);
  l3_.collect(out);
}

Var early_fuse(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("early_fuse: no modalities");
  return parts.size() == 1 ? parts[0] : tc::concat_cols(parts);
}

std::vector<double> early_fuse(std::span<const std::vector<double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Tensor late_fuse(std::span<const Tensor> probs) {
  if (probs.empty()) throw ConfigError("late_fuse: no modalities");
  Tensor out = Tensor::zeros(probs[0].rows(), probs[0].cols());
  for (const auto& p : probs) {
    if (!p.same_shape(out)) throw ShapeError("late_fuse: probability shapes differ");
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  const double n = static_cast<double>(probs.size());
  for (double& v : out.values()) v /= n;
  return out;
}

std::vector<double> late_fuse(std::span<const std::vector<double>> probs) {
  if (probs.empty()) throw ConfigError("late_fuse: no modalities");
  std::vector<double> out(probs[0].size(), 0.0);
  for (const auto& p : probs) {
    if (p.size() != out.size()) throw ShapeError("late_fuse: probability widths differ");
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  for (double& v : out) v /= static_cast<double>(probs.size());
  return out;
}

Var append_one(Var x) {
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), n = X.cols();
  Tensor out = Tensor::zeros(rows, n + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out(r, j) = X(r, j);
    out(r, n) = 1.0;
  }
  return x.graph->record(std::move(out), {x}, [ix = x.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    Tensor& dx = g.grad_accumulator(ix);
    for (std::size_t r = 0; r < dx.rows(); ++r)
      for (std::size_t j = 0; j < dx.cols(); ++j) dx(r, j) += G(r, j);
  });
}

Var outer_rows(Var a, Var c) {
  const Tensor& A = a.value();
  const Tensor& C = c.value();
  if (A.rows() != C.rows()) throw ShapeError("outer_rows: row counts differ");
  const std::size_t rows = A.rows(), m = A.cols(), n = C.cols();
  Tensor out = Tensor::zeros(rows, m * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out(r, i * n + j) = A(r, i) * C(r, j);
  return a.graph->record(std::move(out), {a, c}, [ia = a.id, ic = c.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    const Tensor& A = g.value(ia);
    const Tensor& C = g.value(ic);
    const std::size_t rows = A.rows(), m = A.cols(), n = C.cols();
    if (g.needs_grad(ia)) {
      Tensor& dA = g.grad_accumulator(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += G(r, i * n + j) * C(r, j);
          dA(r, i) += s;
        }
    }
    if (g.needs_grad(ic)) {
      Tensor& dC = g.grad_accumulator(ic);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          const double ai = A(r, i);
          for (std::size_t j = 0; j < n; ++j) dC(r, j) += G(r, i * n + j) * ai;
        }
    }
  });
}

Var tensor_fuse(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("tensor_fuse: no modalities");
  Var out = append_one(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) out = outer_rows(out, append_one(parts[i]));
  return out;
}

std::vector<double> tensor_fuse(std::span<const std::vector<double>> parts) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& p : parts) vars.push_back(g.constant(Tensor::row_vector(p)));
  const Tensor& t = tensor_fuse(vars).value();
  return {t.values().begin(), t.values().end()};
}

int argmax(std::span<const double> p) {
  int best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace ccd::fusion
