#include "ccd/tensorcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "ccd/common/error.hpp"

namespace ccd::tc {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

Tensor like(const Tensor& t) { return Tensor::zeros(t.rows(), t.cols()); }

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

std::vector<int> copy_targets(std::span<const int> targets, std::size_t rows, std::size_t classes,
                              const char* op) {
  if (targets.size() != rows) {
    throw ShapeError(std::string(op) + ": " + std::to_string(rows) + " rows but " +
                     std::to_string(targets.size()) + " targets");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw ShapeError(std::string(op) + ": target " + std::to_string(t) + " out of range");
    }
  }
  return {targets.begin(), targets.end()};
}

// C (m x n, row stride n) += A (m x k) * B (k x n, row stride n), where
// A(i, p) = a[i * a_si + p * a_sp]. Mostly-zero A (TF-IDF rows, dropout
// masks) takes a row loop that skips zeros; otherwise a 4 x 8 register
// block keeps the accumulators out of memory.
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_si, std::size_t a_sp,
              const double* b, double* c) {
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) zeros += a[i * a_si + p * a_sp] == 0.0;
  const bool sparse = 2 * zeros > m * k;
  constexpr std::size_t R = 4, C = 8;
  const std::size_t m_blk = sparse ? 0 : m - m % R;
  const std::size_t n_blk = n - n % C;
  for (std::size_t i0 = 0; i0 < m_blk; i0 += R) {
    for (std::size_t j0 = 0; j0 < n_blk; j0 += C) {
      double acc[R][C] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j0;
        for (std::size_t r = 0; r < R; ++r) {
          const double av = a[(i0 + r) * a_si + p * a_sp];
          for (std::size_t jj = 0; jj < C; ++jj) acc[r][jj] += av * brow[jj];
        }
      }
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t jj = 0; jj < C; ++jj) c[(i0 + r) * n + j0 + jj] += acc[r][jj];
    }
    if (n_blk < n) {
      for (std::size_t i = i0; i < i0 + R; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a[i * a_si + p * a_sp];
          for (std::size_t j = n_blk; j < n; ++j) c[i * n + j] += av * b[p * n + j];
        }
    }
  }
  for (std::size_t i = m_blk; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * a_si + p * a_sp];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros(m, n);
  gemm_acc(m, n, k, a.values().data(), k, 1, b.values().data(), c.values().data());
  return c;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = like(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - m);
      z += o[j];
    }
    for (double& x : o) x /= z;
  }
  return out;
}

Var matmul(Var a, Var b) {
  Graph& g = *a.graph;
  Tensor out = matmul(a.value(), b.value());
  return g.record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    const Tensor& A = g.value(ia);
    const Tensor& B = g.value(ib);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    const double* g_data = G.values().data();
    const double* a_data = A.values().data();
    const double* b_data = B.values().data();
    if (g.needs_grad(ia)) {
      // dA = G * B^T; B is transposed first so the kernel reads contiguous rows.
      std::vector<double> bt(k * n);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b_data[p * n + j];
      gemm_acc(m, k, n, g_data, n, 1, bt.data(), g.grad_accumulator(ia).values().data());
    }
    if (g.needs_grad(ib)) {
      gemm_acc(k, n, m, a_data, 1, k, g_data, g.grad_accumulator(ib).values().data());
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  Tensor out = Tensor::zeros(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
  return a.graph->record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    Tensor& dA = g.grad_accumulator(ia);
    for (std::size_t i = 0; i < dA.rows(); ++i)
      for (std::size_t j = 0; j < dA.cols(); ++j) dA(i, j) += G(j, i);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g.grad_accumulator(ia), G);
    if (g.needs_grad(ib)) accumulate(g.grad_accumulator(ib), G);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g.grad_accumulator(ia), G);
    if (g.needs_grad(ib)) {
      auto d = g.grad_accumulator(ib).values();
      auto gv = G.values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gv[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.graph->record(std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    auto gv = g.grad(self).values();
    if (g.needs_grad(ia)) {
      auto d = g.grad_accumulator(ia).values();
      auto other = g.value(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * other[i];
    }
    if (g.needs_grad(ib)) {
      auto d = g.grad_accumulator(ib).values();
      auto other = g.value(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * other[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& x : out.values()) x *= s;
  return a.graph->record(std::move(out), {a}, [ia = a.id, s](Graph& g, std::size_t self) {
    auto gv = g.grad(self).values();
    auto d = g.grad_accumulator(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * gv[i];
  });
}

Var add_row(Var a, Var row) {
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw ShapeError("add_row: row " + shape_string(R.shape()) + " does not fit " + shape_string(A.shape()));
  }
  Tensor out = A;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += R[j];
  }
  return a.graph->record(std::move(out), {a, row}, [ia = a.id, ir = row.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g.grad_accumulator(ia), G);
    if (g.needs_grad(ir)) {
      Tensor& dR = g.grad_accumulator(ir);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dR[j] += G(i, j);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.graph->record(Tensor::matrix(1, 1, {s}), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const double gs = g.grad(self)[0];
    for (double& d : g.grad_accumulator(ia).values()) d += gs;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var log(Var a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = std::log(x);
  return a.graph->record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    auto gv = g.grad(self).values();
    auto x = g.value(ia).values();
    auto d = g.grad_accumulator(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] / x[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return a.graph->record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    auto gv = g.grad(self).values();
    auto x = g.value(ia).values();
    auto d = g.grad_accumulator(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (x[i] > 0.0) d[i] += gv[i];
  });
}

Var dropout(Var a, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(a.value().size());
  Tensor out = a.value();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    (*mask)[i] = u(rng) < rate ? 0.0 : keep_scale;
    o[i] *= (*mask)[i];
  }
  return a.graph->record(std::move(out), {a}, [ia = a.id, mask](Graph& g, std::size_t self) {
    auto gv = g.grad(self).values();
    auto d = g.grad_accumulator(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * (*mask)[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), n = X.cols();
  expect_shape(gain.value(), 1, n, "layer_norm gain");
  expect_shape(bias.value(), 1, n, "layer_norm bias");
  auto xhat = std::make_shared<Tensor>(Tensor::zeros(rows, n));
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out = Tensor::zeros(rows, n);
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = X.row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xr[j] - mu) * inv;
      (*xhat)(r, j) = h;
      out(r, j) = h * G[j] + B[j];
    }
  }
  return x.graph->record(
      std::move(out), {x, gain, bias},
      [ix = x.id, ig = gain.id, ib = bias.id, xhat, inv_std](Graph& g, std::size_t self) {
        const Tensor& dY = g.grad(self);
        const std::size_t rows = dY.rows(), n = dY.cols();
        const Tensor& gain_v = g.value(ig);
        if (g.needs_grad(ig)) {
          Tensor& dG = g.grad_accumulator(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) dG[j] += dY(r, j) * (*xhat)(r, j);
        }
        if (g.needs_grad(ib)) {
          Tensor& dB = g.grad_accumulator(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) dB[j] += dY(r, j);
        }
        if (g.needs_grad(ix)) {
          Tensor& dX = g.grad_accumulator(ix);
          const double nn = static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = dY(r, j) * gain_v[j];
              s1 += dh;
              s2 += dh * (*xhat)(r, j);
            }
            const double inv = (*inv_std)[r];
            for (std::size_t j = 0; j < n; ++j) {
              const double dh = dY(r, j) * gain_v[j];
              dX(r, j) += inv / nn * (nn * dh - s1 - (*xhat)(r, j) * s2);
            }
          }
        }
      });
}

Var softmax(Var a) {
  Tensor out = softmax_rows(a.value());
  return a.graph->record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    const Tensor& P = g.value(self);
    Tensor& dA = g.grad_accumulator(ia);
    for (std::size_t r = 0; r < P.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < P.cols(); ++j) dot += G(r, j) * P(r, j);
      for (std::size_t j = 0; j < P.cols(); ++j) dA(r, j) += P(r, j) * (G(r, j) - dot);
    }
  });
}

Var log_softmax(Var a) {
  const Tensor& X = a.value();
  Tensor out = like(X);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto in = X.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - m);
    const double lse = m + std::log(z);
    auto o = out.row(r);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - lse;
  }
  return a.graph->record(std::move(out), {a}, [ia = a.id](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    const Tensor& Y = g.value(self);
    Tensor& dA = g.grad_accumulator(ia);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) gs += G(r, j);
      for (std::size_t j = 0; j < Y.cols(); ++j) dA(r, j) += G(r, j) - std::exp(Y(r, j)) * gs;
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Tensor& X = logits.value();
  auto tgt = copy_targets(targets, X.rows(), X.cols(), "cross_entropy");
  auto probs = std::make_shared<Tensor>(softmax_rows(X));
  double loss = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    auto in = X.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - m);
    loss += m + std::log(z) - in[tgt[r]];
  }
  const double rows = static_cast<double>(X.rows());
  loss /= rows;
  return logits.graph->record(
      Tensor::matrix(1, 1, {loss}), {logits},
      [il = logits.id, probs, tgt = std::move(tgt), rows](Graph& g, std::size_t self) {
        const double gs = g.grad(self)[0] / rows;
        Tensor& dX = g.grad_accumulator(il);
        for (std::size_t r = 0; r < probs->rows(); ++r) {
          for (std::size_t j = 0; j < probs->cols(); ++j) {
            const double onehot = static_cast<int>(j) == tgt[r] ? 1.0 : 0.0;
            dX(r, j) += gs * ((*probs)(r, j) - onehot);
          }
        }
      });
}

Var nll(Var log_probs, std::span<const int> targets) {
  const Tensor& X = log_probs.value();
  auto tgt = copy_targets(targets, X.rows(), X.cols(), "nll");
  double loss = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) loss -= X(r, tgt[r]);
  const double rows = static_cast<double>(X.rows());
  loss /= rows;
  return log_probs.graph->record(Tensor::matrix(1, 1, {loss}), {log_probs},
                                 [il = log_probs.id, tgt = std::move(tgt), rows](Graph& g, std::size_t self) {
                                   const double gs = g.grad(self)[0] / rows;
                                   Tensor& dX = g.grad_accumulator(il);
                                   for (std::size_t r = 0; r < tgt.size(); ++r) dX(r, tgt[r]) -= gs;
                                 });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row counts differ");
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.value().cols();
  }
  Tensor out = Tensor::zeros(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(P.row(r).begin(), P.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
  }
  return parts[0].graph->record(std::move(out), parts,
                                [ids = std::move(ids), offsets = std::move(offsets)](Graph& g, std::size_t self) {
                                  const Tensor& G = g.grad(self);
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (!g.needs_grad(ids[k])) continue;
                                    Tensor& d = g.grad_accumulator(ids[k]);
                                    for (std::size_t r = 0; r < d.rows(); ++r)
                                      for (std::size_t j = 0; j < d.cols(); ++j) d(r, j) += G(r, offsets[k] + j);
                                  }
                                });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) throw ShapeError("concat_rows: column counts differ");
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += p.value().rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Var& p : parts) values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  return parts[0].graph->record(Tensor::matrix(rows, cols, std::move(values)), parts,
                                [ids = std::move(ids), offsets = std::move(offsets)](Graph& g, std::size_t self) {
                                  const Tensor& G = g.grad(self);
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (!g.needs_grad(ids[k])) continue;
                                    Tensor& d = g.grad_accumulator(ids[k]);
                                    for (std::size_t r = 0; r < d.rows(); ++r)
                                      for (std::size_t j = 0; j < d.cols(); ++j) d(r, j) += G(offsets[k] + r, j);
                                  }
                                });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  if (begin + count > A.rows()) throw ShapeError("slice_rows: range exceeds " + shape_string(A.shape()));
  std::vector<double> values(A.values().begin() + static_cast<std::ptrdiff_t>(begin * A.cols()),
                             A.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * A.cols()));
  return a.graph->record(Tensor::matrix(count, A.cols(), std::move(values)), {a},
                         [ia = a.id, begin](Graph& g, std::size_t self) {
                           const Tensor& G = g.grad(self);
                           Tensor& d = g.grad_accumulator(ia);
                           for (std::size_t r = 0; r < G.rows(); ++r)
                             for (std::size_t j = 0; j < G.cols(); ++j) d(begin + r, j) += G(r, j);
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  if (begin + count > A.cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(A.shape()));
  Tensor out = Tensor::zeros(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t j = 0; j < count; ++j) out(r, j) = A(r, begin + j);
  return a.graph->record(std::move(out), {a}, [ia = a.id, begin](Graph& g, std::size_t self) {
    const Tensor& G = g.grad(self);
    Tensor& d = g.grad_accumulator(ia);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t j = 0; j < G.cols(); ++j) d(r, begin + j) += G(r, j);
  });
}

Var select_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& A = a.value();
  const std::size_t n = A.cols();
  Tensor out = Tensor::zeros(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= A.rows()) throw ShapeError("select_rows: row " + std::to_string(rows[r]) + " outside " + shape_string(A.shape()));
    std::copy_n(A.values().begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n, out.row(r).begin());
  }
  return a.graph->record(std::move(out), {a},
                         [ia = a.id, idx = std::vector<std::size_t>(rows.begin(), rows.end())](Graph& g, std::size_t self) {
                           const Tensor& G = g.grad(self);
                           Tensor& d = g.grad_accumulator(ia);
                           for (std::size_t r = 0; r < idx.size(); ++r)
                             for (std::size_t j = 0; j < G.cols(); ++j) d(idx[r], j) += G(r, j);
                         });
}

// --- attention -------------------------------------------------------------

AttentionMask AttentionMask::sliding(std::size_t window, bool global_first) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("attention window must be odd and >= 1, got " + std::to_string(window));
  }
  return AttentionMask(window, global_first, false);
}

AttentionMask AttentionMask::segmented(std::span<const std::size_t> query_lengths,
                                       std::span<const std::size_t> key_lengths) {
  if (query_lengths.size() != key_lengths.size()) {
    throw ConfigError("segmented mask: " + std::to_string(query_lengths.size()) + " query segments but " +
                      std::to_string(key_lengths.size()) + " key segments");
  }
  auto seg = std::make_shared<Segments>();
  for (std::size_t s = 0; s < query_lengths.size(); ++s) {
    if (key_lengths[s] == 0) throw ConfigError("segmented mask: key segment " + std::to_string(s) + " is empty");
    seg->query_segment.insert(seg->query_segment.end(), query_lengths[s], s);
    seg->key_begin.push_back(seg->total_keys);
    seg->total_keys += key_lengths[s];
  }
  seg->key_begin.push_back(seg->total_keys);
  AttentionMask mask(0, false, false);
  mask.segments_ = std::move(seg);
  return mask;
}

void AttentionMask::check_extent(std::size_t tq, std::size_t tk) const {
  if (segments_ && (segments_->query_segment.size() != tq || segments_->total_keys != tk)) {
    throw ShapeError("segmented mask covers " + std::to_string(segments_->query_segment.size()) + " x " +
                     std::to_string(segments_->total_keys) + ", attention is " + std::to_string(tq) + " x " +
                     std::to_string(tk));
  }
}

bool AttentionMask::allows(std::size_t query, std::size_t key) const noexcept {
  if (full_) return true;
  if (segments_) {
    const std::size_t s = segments_->query_segment[query];
    return key >= segments_->key_begin[s] && key < segments_->key_begin[s + 1];
  }
  if (global_ && (query == 0 || key == 0)) return true;
  const std::size_t half = (window_ - 1) / 2;
  const std::size_t dist = query > key ? query - key : key - query;
  return dist <= half;
}

AttentionMask::KeyRange AttentionMask::keys_for(std::size_t query, std::size_t n_keys) const noexcept {
  if (n_keys == 0) return {1, 0, false};
  if (full_ || (global_ && query == 0)) return {0, n_keys - 1, false};
  if (segments_) {
    const std::size_t s = segments_->query_segment[query];
    return {segments_->key_begin[s], segments_->key_begin[s + 1] - 1, false};
  }
  const std::size_t half = (window_ - 1) / 2;
  const std::size_t lowest = global_ ? 1 : 0;
  std::size_t first = query > half ? query - half : 0;
  first = std::max(first, lowest);
  const std::size_t last = std::min(n_keys - 1, query + half);
  return {first, last, global_};
}

namespace {

struct HeadLayout {
  std::size_t heads, dk, dv;
};

HeadLayout head_layout(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads) {
  if (n_heads == 0) throw ConfigError("attention needs at least one head");
  if (q.cols() != k.cols()) throw ShapeError("attention: query/key widths differ");
  if (k.rows() != v.rows()) throw ShapeError("attention: key/value lengths differ");
  if (k.rows() == 0) throw ShapeError("attention: no keys");
  if (q.cols() % n_heads != 0 || v.cols() % n_heads != 0) {
    throw ShapeError("attention: widths not divisible by " + std::to_string(n_heads) + " heads");
  }
  return {n_heads, q.cols() / n_heads, v.cols() / n_heads};
}

template <typename F>
void for_each_key(const AttentionMask::KeyRange& range, F&& f) {
  if (range.with_global) f(std::size_t{0});
  for (std::size_t j = range.first; j <= range.last && range.first <= range.last; ++j) f(j);
}

}  // namespace

Var attention(Var q, Var k, Var v, const AttentionMask& mask, std::size_t n_heads) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  const HeadLayout hl = head_layout(Q, K, V, n_heads);
  const std::size_t tq = Q.rows(), tk = K.rows();
  mask.check_extent(tq, tk);
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hl.dk));

  // Weights of the visited keys in visiting order, for (head h, query i) in
  // probs->values[probs->start[h * tq + i] ..).
  struct Probs {
    std::vector<double> values;
    std::vector<std::size_t> start;
  };
  auto probs = std::make_shared<Probs>();
  probs->start.reserve(hl.heads * tq + 1);
  Tensor out = Tensor::zeros(tq, V.cols());
  std::vector<double> scores;
  for (std::size_t h = 0; h < hl.heads; ++h) {
    const std::size_t qo = h * hl.dk, vo = h * hl.dv;
    for (std::size_t i = 0; i < tq; ++i) {
      const auto range = mask.keys_for(i, tk);
      scores.clear();
      probs->start.push_back(probs->values.size());
      for_each_key(range, [&](std::size_t j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < hl.dk; ++c) dot += Q(i, qo + c) * K(j, qo + c);
        scores.push_back(dot * scale_factor);
      });
      if (scores.empty()) continue;
      const double m = *std::max_element(scores.begin(), scores.end());
      double z = 0.0;
      for (double& s : scores) {
        s = std::exp(s - m);
        z += s;
      }
      std::size_t n = 0;
      for_each_key(range, [&](std::size_t j) {
        const double w = scores[n++] / z;
        probs->values.push_back(w);
        for (std::size_t c = 0; c < hl.dv; ++c) out(i, vo + c) += w * V(j, vo + c);
      });
    }
  }
  probs->start.push_back(probs->values.size());

  return q.graph->record(
      std::move(out), {q, k, v},
      [iq = q.id, ik = k.id, iv = v.id, probs, mask, hl, scale_factor](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        const Tensor& Q = g.value(iq);
        const Tensor& K = g.value(ik);
        const Tensor& V = g.value(iv);
        const std::size_t tq = Q.rows(), tk = K.rows();
        Tensor dQ = Tensor::zeros(Q.rows(), Q.cols());
        Tensor dK = Tensor::zeros(K.rows(), K.cols());
        Tensor dV = Tensor::zeros(V.rows(), V.cols());
        std::vector<double> dp;
        for (std::size_t h = 0; h < hl.heads; ++h) {
          const std::size_t qo = h * hl.dk, vo = h * hl.dv;
          for (std::size_t i = 0; i < tq; ++i) {
            const std::size_t row = h * tq + i;
            const std::size_t visited = probs->start[row + 1] - probs->start[row];
            if (visited == 0) continue;
            const double* p = probs->values.data() + probs->start[row];
            const auto range = mask.keys_for(i, tk);
            dp.assign(visited, 0.0);
            double weighted = 0.0;
            std::size_t n = 0;
            for_each_key(range, [&](std::size_t j) {
              double d = 0.0;
              for (std::size_t c = 0; c < hl.dv; ++c) {
                d += G(i, vo + c) * V(j, vo + c);
                dV(j, vo + c) += p[n] * G(i, vo + c);
              }
              dp[n] = d;
              weighted += p[n] * d;
              ++n;
            });
            n = 0;
            for_each_key(range, [&](std::size_t j) {
              const double ds = p[n] * (dp[n] - weighted) * scale_factor;
              ++n;
              for (std::size_t c = 0; c < hl.dk; ++c) {
                dQ(i, qo + c) += ds * K(j, qo + c);
                dK(j, qo + c) += ds * Q(i, qo + c);
              }
            });
          }
        }
        if (g.needs_grad(iq)) accumulate(g.grad_accumulator(iq), dQ);
        if (g.needs_grad(ik)) accumulate(g.grad_accumulator(ik), dK);
        if (g.needs_grad(iv)) accumulate(g.grad_accumulator(iv), dV);
      });
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const AttentionMask& mask, std::size_t n_heads,
                         std::size_t head) {
  const HeadLayout hl = head_layout(q, k, k, n_heads);
  if (head >= hl.heads) throw ShapeError("attention_weights: head index out of range");
  Graph g;
  // Attending over identity values returns the weight matrix itself; repeat
  // the identity once per head so each head sees the same layout.
  Tensor v = Tensor::zeros(k.rows(), k.rows() * hl.heads);
  for (std::size_t h = 0; h < hl.heads; ++h)
    for (std::size_t j = 0; j < k.rows(); ++j) v(j, h * k.rows() + j) = 1.0;
  Var out = attention(g.constant(q), g.constant(k), g.constant(v), mask, n_heads);
  Tensor w = Tensor::zeros(q.rows(), k.rows());
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < k.rows(); ++j) w(i, j) = out.value()(i, head * k.rows() + j);
  return w;
}

}  // namespace ccd::tc
