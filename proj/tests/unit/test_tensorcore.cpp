#include <cmath>
#include <numbers>
#include <sstream>

#include "ccd/common/error.hpp"
#include "ccd/tensorcore/adam.hpp"
#include "ccd/tensorcore/checkpoint.hpp"
#include "ccd/tensorcore/nn.hpp"
#include "ccd/tensorcore/ops.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace ccd;
using namespace ccd::tc;
using ccd::testing::grad_check;

namespace {

Parameter random_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(r, c);
  for (double& x : t.values()) x = u(rng);
  return Parameter(name, t);
}

// Fixed random projection to turn any tensor into a scalar loss so that
// every output entry carries a distinct upstream gradient.
Var project(Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor w = Tensor::zeros(y.value().rows(), y.value().cols());
  for (double& x : w.values()) x = u(rng);
  return sum(mul(y, y.graph->constant(w)));
}

constexpr double kOpTol = 1e-4;

}  // namespace

TEST_CASE("matmul identity and arithmetic") {
  Graph g;
  Tensor x = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  Var out = matmul(g.constant(Tensor::identity(2)), g.constant(x));
  CHECK(out.value() == x);

  Var r = matmul(g.constant(Tensor::from_rows({{1, 2}, {3, 4}})), g.constant(Tensor::from_rows({{1}, {1}})));
  CHECK(r.value() == Tensor::from_rows({{3}, {7}}));

  CHECK_THROWS_AS(matmul(g.constant(Tensor::zeros(2, 3)), g.constant(Tensor::zeros(2, 3))), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(1);
  Parameter a = random_param("a", 3, 4, rng);
  Parameter b = random_param("b", 4, 2, rng);
  auto res = grad_check({&a, &b}, [&](Graph& g) { return project(matmul(g.param(a), g.param(b))); });
  CHECK(res.max_rel_error < kOpTol);
}

TEST_CASE("softmax is normalized and stable") {
  Graph g;
  Var s = softmax(g.constant(Tensor::from_rows({{0, 0, 0}})));
  for (double p : s.value().values()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Var big = softmax(g.constant(Tensor::from_rows({{1000, 0, 0}})));
  CHECK(std::isfinite(big.value()[0]));
  CHECK(big.value()[0] == doctest::Approx(1.0));
  CHECK(big.value()[1] < 1e-300);

  Rng rng(7);
  Parameter x = random_param("x", 6, 5, rng, -20, 20);
  Var p = softmax(g.param(x));
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0;
    for (double v : p.value().row(r)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax and log_softmax gradients") {
  Rng rng(2);
  Parameter x = random_param("x", 3, 4, rng, -3, 3);
  CHECK(grad_check({&x}, [&](Graph& g) { return project(softmax(g.param(x))); }).max_rel_error < kOpTol);
  CHECK(grad_check({&x}, [&](Graph& g) { return project(log_softmax(g.param(x))); }).max_rel_error < kOpTol);
}

TEST_CASE("relu, dropout, cross entropy basics") {
  Graph g;
  CHECK(relu(g.constant(Tensor::from_rows({{-1, 2}}))).value() == Tensor::from_rows({{0, 2}}));

  Rng rng(3);
  Tensor x = Tensor::from_rows({{1, 2, 3, 4}});
  CHECK(dropout(g.constant(x), 0.5, rng, false).value() == x);
  CHECK_THROWS_AS(dropout(g.constant(x), 1.0, rng, true), ConfigError);
  CHECK_THROWS_AS(dropout(g.constant(x), -0.1, rng, true), ConfigError);

  Tensor ones({1, 4000}, 1.0);
  Var d = dropout(g.constant(ones), 0.25, rng, true);
  std::size_t kept = 0;
  for (double v : d.value().values()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    kept += v != 0.0;
  }
  CHECK(kept > 2800);
  CHECK(kept < 3200);

  const int target = 1;
  Var ce = cross_entropy(g.constant(Tensor::from_rows({{0, 0, 0}})), std::span<const int>(&target, 1));
  CHECK(ce.value()[0] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("elementwise and structural op gradients") {
  Rng rng(4);
  Parameter a = random_param("a", 3, 4, rng);
  Parameter b = random_param("b", 3, 4, rng);
  Parameter row = random_param("row", 1, 4, rng);
  Parameter pos = random_param("pos", 3, 4, rng, 0.5, 2.0);

  auto check = [](double err) { CHECK(err < kOpTol); };
  check(grad_check({&a, &b}, [&](Graph& g) { return project(add(g.param(a), g.param(b))); }).max_rel_error);
  check(grad_check({&a, &b}, [&](Graph& g) { return project(sub(g.param(a), g.param(b))); }).max_rel_error);
  check(grad_check({&a, &b}, [&](Graph& g) { return project(mul(g.param(a), g.param(b))); }).max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return project(scale(g.param(a), -2.5)); }).max_rel_error);
  check(grad_check({&a, &row}, [&](Graph& g) { return project(add_row(g.param(a), g.param(row))); })
            .max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return project(transpose(g.param(a))); }).max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return sum(mul(g.param(a), g.param(a))); }).max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return mean(mul(g.param(a), g.param(a))); }).max_rel_error);
  check(grad_check({&pos}, [&](Graph& g) { return project(log(g.param(pos))); }).max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return project(relu(g.param(a))); }).max_rel_error);
  check(grad_check({&a, &b},
                   [&](Graph& g) {
                     std::vector<Var> parts{g.param(a), g.param(b)};
                     return project(concat_cols(parts));
                   })
            .max_rel_error);
  check(grad_check({&a, &row},
                   [&](Graph& g) {
                     std::vector<Var> parts{g.param(a), g.param(row)};
                     return project(concat_rows(parts));
                   })
            .max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return project(slice_rows(g.param(a), 1, 2)); }).max_rel_error);
  check(grad_check({&a}, [&](Graph& g) { return project(slice_cols(g.param(a), 1, 2)); }).max_rel_error);
  check(grad_check({&a},
                   [&](Graph& g) {
                     const std::size_t rows[] = {2, 0, 2};
                     return project(select_rows(g.param(a), rows));
                   })
            .max_rel_error);
  check(grad_check({&a},
                   [&](Graph& g) {
                     Rng local(11);  // same mask on every evaluation
                     return project(dropout(g.param(a), 0.3, local, true));
                   })
            .max_rel_error);
}

TEST_CASE("layer norm and loss gradients") {
  Rng rng(5);
  Parameter x = random_param("x", 4, 6, rng, -2, 2);
  Parameter gain = random_param("gain", 1, 6, rng, 0.5, 1.5);
  Parameter bias = random_param("bias", 1, 6, rng);
  CHECK(grad_check({&x, &gain, &bias},
                   [&](Graph& g) { return project(layer_norm(g.param(x), g.param(gain), g.param(bias))); })
            .max_rel_error < kOpTol);

  Parameter logits = random_param("logits", 5, 3, rng, -3, 3);
  const std::vector<int> targets{0, 2, 1, 1, 0};
  CHECK(grad_check({&logits}, [&](Graph& g) { return cross_entropy(g.param(logits), targets); }).max_rel_error <
        kOpTol);
  CHECK(grad_check({&logits}, [&](Graph& g) { return nll(log_softmax(g.param(logits)), targets); })
            .max_rel_error < kOpTol);
}

TEST_CASE("shared subexpressions accumulate gradients") {
  // y = x*x + x  =>  dy/dx = 2x + 1 (scalar chain rule oracle)
  Parameter x("x", Tensor::from_rows({{1.7}}));
  x.zero_grad();
  Graph g;
  Var xv = g.param(x);
  Var y = add(mul(xv, xv), xv);
  g.backward(y);
  CHECK(x.grad[0] == doctest::Approx(2 * 1.7 + 1).epsilon(1e-15));

  // z = (x*x)*(x*x) reuses the same intermediate twice: dz/dx = 4x^3
  Parameter w("w", Tensor::from_rows({{0.9}}));
  w.zero_grad();
  Graph g2;
  Var wv = g2.param(w);
  Var sq = mul(wv, wv);
  g2.backward(mul(sq, sq));
  CHECK(w.grad[0] == doctest::Approx(4 * 0.9 * 0.9 * 0.9).epsilon(1e-14));
}

TEST_CASE("attention masks and weights") {
  SUBCASE("sliding window with global token") {
    auto mask = AttentionMask::sliding(3, true);
    Rng rng(6);
    Parameter q = random_param("q", 7, 4, rng);
    Parameter k = random_param("k", 7, 4, rng);
    Tensor w = attention_weights(q.value, k.value, mask);
    for (std::size_t i = 0; i < 7; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        const bool allowed = i == 0 || j == 0 || (i > j ? i - j : j - i) <= 1;
        CHECK(mask.allows(i, j) == allowed);
        if (!allowed) CHECK(w(i, j) == 0.0);
        else CHECK(w(i, j) > 0.0);
        total += w(i, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
  SUBCASE("equal logits give uniform weights over the window") {
    Tensor q = Tensor::zeros(6, 2);
    Tensor k = Tensor::zeros(6, 2);
    Tensor w = attention_weights(q, k, AttentionMask::sliding(3, true));
    CHECK(w(0, 3) == doctest::Approx(1.0 / 6));
    CHECK(w(3, 0) == doctest::Approx(1.0 / 4));  // global + {2,3,4}
    CHECK(w(3, 2) == doctest::Approx(1.0 / 4));
    CHECK(w(1, 1) == doctest::Approx(1.0 / 3));  // global + {1,2}
    CHECK(w(5, 5) == doctest::Approx(1.0 / 3));  // global + {4,5}
  }
  SUBCASE("even windows are rejected") { CHECK_THROWS_AS(AttentionMask::sliding(4, true), ConfigError); }
}

TEST_CASE("attention gradients") {
  Rng rng(8);
  Parameter q = random_param("q", 6, 4, rng);
  Parameter k = random_param("k", 6, 4, rng);
  Parameter v = random_param("v", 6, 6, rng);
  Parameter kx = random_param("kx", 3, 4, rng);
  Parameter vx = random_param("vx", 3, 6, rng);
  for (auto mask : {AttentionMask::full(), AttentionMask::sliding(3, true), AttentionMask::sliding(3, false)}) {
    auto res = grad_check({&q, &k, &v}, [&](Graph& g) {
      return project(attention(g.param(q), g.param(k), g.param(v), mask, 2));
    });
    CHECK(res.max_rel_error < kOpTol);
  }
  auto cross = grad_check({&q, &kx, &vx}, [&](Graph& g) {
    return project(attention(g.param(q), g.param(kx), g.param(vx), AttentionMask::full(), 2));
  });
  CHECK(cross.max_rel_error < kOpTol);
}

TEST_CASE("segmented attention equals attending each segment separately") {
  Rng rng(9);
  const std::vector<std::size_t> q_len{2, 1, 3}, k_len{3, 1, 2};
  Parameter q = random_param("q", 6, 4, rng);
  Parameter k = random_param("k", 6, 4, rng);
  Parameter v = random_param("v", 6, 2, rng);
  const auto mask = AttentionMask::segmented(q_len, k_len);
  Graph g;
  const Tensor packed = attention(g.param(q), g.param(k), g.param(v), mask, 2).value();
  std::size_t qo = 0, ko = 0;
  for (std::size_t s = 0; s < q_len.size(); ++s) {
    Graph h;
    const Tensor alone = attention(slice_rows(h.param(q), qo, q_len[s]), slice_rows(h.param(k), ko, k_len[s]),
                                   slice_rows(h.param(v), ko, k_len[s]), AttentionMask::full(), 2)
                             .value();
    for (std::size_t i = 0; i < q_len[s]; ++i)
      for (std::size_t c = 0; c < 2; ++c) CHECK(packed(qo + i, c) == alone(i, c));
    for (std::size_t j = 0; j < 6; ++j) CHECK(mask.allows(qo, j) == (j >= ko && j < ko + k_len[s]));
    qo += q_len[s];
    ko += k_len[s];
  }
  auto res = grad_check({&q, &k, &v}, [&](Graph& gg) { return project(attention(gg.param(q), gg.param(k), gg.param(v), mask, 2)); });
  CHECK(res.max_rel_error < kOpTol);

  const std::vector<std::size_t> empty_key{1, 0}, two{1, 1}, one{1};
  CHECK_THROWS_AS(AttentionMask::segmented(two, empty_key), ConfigError);
  CHECK_THROWS_AS(AttentionMask::segmented(two, one), ConfigError);
  Graph bad;
  CHECK_THROWS_AS(attention(bad.param(q), bad.param(k), bad.param(v), AttentionMask::segmented(two, two)), ShapeError);
}

TEST_CASE("adam update rules") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Parameter p("p", Tensor::from_rows({{1.0, -2.0}}));
    p.zero_grad();
    AdamState state;
    adam_step({&p}, state, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    CHECK(p.value == Tensor::from_rows({{1.0, -2.0}}));
  }
  SUBCASE("first step moves by about lr") {
    Parameter p("p", Tensor::from_rows({{0.5}}));
    p.zero_grad();
    p.grad[0] = 1.0;
    AdamState state;
    adam_step({&p}, state, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    // m_hat = 1, v_hat = 1 after bias correction
    CHECK(p.value[0] == doctest::Approx(0.5 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  SUBCASE("weight decay adds to the gradient") {
    Parameter p("p", Tensor::from_rows({{2.0}}));
    p.zero_grad();
    AdamState state;
    adam_step({&p}, state, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
    CHECK(p.value[0] < 2.0);
  }
  SUBCASE("identical runs are identical") {
    auto run = [] {
      Rng rng(42);
      Parameter w = random_param("w", 3, 3, rng);
      AdamState state;
      for (int i = 0; i < 20; ++i) {
        w.zero_grad();
        Graph g;
        g.backward(project(mul(g.param(w), g.param(w))));
        adam_step({&w}, state, AdamConfig{});
      }
      return w.value;
    };
    CHECK(run() == run());
  }
  SUBCASE("shape mismatch") {
    Tensor p = Tensor::zeros(2, 2);
    AdamMoments m;
    CHECK_THROWS_AS(adam_update(p, Tensor::zeros(1, 2), m, 1, AdamConfig{}), ShapeError);
  }
}

TEST_CASE("checkpoint round trip") {
  TensorTable t;
  t["audio/enc.weight"] = Tensor::from_rows({{1.5, -2.25}, {std::numbers::pi, 1e-300}});
  t["bias"] = Tensor({3}, std::vector<double>{0.0, -0.0, 7.0});
  std::stringstream buf;
  write_checkpoint(buf, t);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 7) == "CCDCKPT");
  CHECK(static_cast<unsigned char>(bytes[8]) == kCheckpointVersion);  // little-endian version
  TensorTable back = read_checkpoint(buf);
  CHECK(back == t);

  std::stringstream bad("NOTACKPT.........");
  CHECK_THROWS_AS(read_checkpoint(bad), DataError);

  std::string truncated = bytes.substr(0, bytes.size() - 3);
  std::stringstream tr(truncated);
  CHECK_THROWS_AS(read_checkpoint(tr), DataError);
}

TEST_CASE("snapshot and restore by name") {
  Rng rng(9);
  Linear lin("head", 3, 2, rng);
  std::vector<Parameter*> params;
  lin.collect(params);
  TensorTable snap = snapshot(params, "clf/");
  CHECK(snap.count("clf/head.weight") == 1);
  lin.weight().value.fill(0.0);
  restore(params, snap, "clf/");
  CHECK(lin.weight().value == snap.at("clf/head.weight"));
  snap.erase("clf/head.bias");
  CHECK_THROWS_AS(restore(params, snap, "clf/"), DataError);
}
