// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: ccd_acceptance [criterion-name ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ccd/cli/cli.hpp"
#include "ccd/common/error.hpp"
#include "ccd/datamodel/synth.hpp"
#include "ccd/eval/crossval.hpp"
#include "ccd/eval/experiment.hpp"
#include "ccd/eval/folds.hpp"
#include "ccd/eval/metrics.hpp"
#include "ccd/fusion/layers.hpp"
#include "ccd/fusion/models.hpp"
#include "ccd/resample/smote.hpp"
#include "ccd/seqembed/encoder.hpp"
#include "ccd/tensorcore/ops.hpp"
#include "ccd/trainer/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ccd;
namespace fs = std::filesystem;
using tc::Graph;
using tc::Parameter;
using tc::Tensor;
using tc::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

eval::ExperimentConfig small_config() { return eval::load_config(fs::path(CCD_SOURCE_DIR) / "configs/synthetic_small.json"); }

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(r, c);
  for (double& x : t.values()) x = u(rng);
  return t;
}

// Fixed random projection so every output entry gets a distinct upstream gradient.
Var project(Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return tc::sum(tc::mul(y, y.graph->constant(random_tensor(y.value().rows(), y.value().cols(), rng))));
}

void jitter(const std::vector<Parameter*>& params, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (Parameter* p : params)
    for (double& v : p->value.values()) v += u(rng);
}

// ---- criteria ----

Outcome metric_arithmetic() {
  const std::vector<double> roberta{0.37, 0.43, 0.85}, aus{0.46, 0.32, 0.88};
  const double a = eval::macro_f1(roberta), b = eval::macro_f1(aus);
  return {std::abs(a - 0.55) <= 0.005 && std::abs(b - 0.55) <= 0.005, fmt("text row %.4f, facial row %.4f", a, b)};
}

Outcome error_analysis_table() {
  eval::ConfusionMatrix cm;
  cm.counts = {{{366, 12, 48}, {61, 665, 198}, {193, 492, 7867}}};
  const auto ea = eval::error_analysis(cm, 9943);
  const bool dominant = ea.dominant && ea.dominant->actual == 2 && ea.dominant->predicted == 1 &&
                        ea.dominant->count == 492 && std::abs(100.0 * ea.dominant->share - 47.08) <= 0.01;
  const bool pass = ea.misclassified == 1045 && dominant && std::abs(ea.accuracy - 0.8949) <= 0.0001;
  return {pass, fmt("misclassified %lld, Other->Conflict %lld (%.2f%%), accuracy %.4f", (long long)ea.misclassified,
                    ea.dominant ? (long long)ea.dominant->count : 0LL, ea.dominant ? 100.0 * ea.dominant->share : 0.0,
                    ea.accuracy)};
}

Outcome wer_oracle() {
  std::mt19937_64 rng(2024);
  static const char* vocab[] = {"a", "b", "c", "d"};
  auto tokens = [&](std::size_t lo) {
    std::vector<std::string> out(std::uniform_int_distribution<std::size_t>(lo, 8)(rng));
    for (auto& w : out) w = vocab[std::uniform_int_distribution<int>(0, 3)(rng)];
    return out;
  };
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
  for (int i = 0; i < 1000; ++i) {
    auto ref = tokens(1);
    pairs.emplace_back(std::move(ref), tokens(0));
  }
  std::vector<std::size_t> got;
  bool identity = true;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [ref, hyp] : pairs) {
    got.push_back(eval::wer(ref, hyp).counts.errors());
    identity = identity && eval::wer(ref, ref).rate == 0.0;
  }
  const double t = seconds_since(t0);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) mismatches += got[i] != oracle::wer_errors(pairs[i].first, pairs[i].second);
  return {mismatches == 0 && identity && t < 5.0,
          fmt("%zu/1000 mismatches, identity %s, %.3f s", mismatches, identity ? "0" : "nonzero", t)};
}

Outcome gradient_checks() {
  constexpr double kOp = 1e-4, kStack = 1e-3;
  std::vector<std::pair<std::string, double>> ops, stacks;
  Rng rng(4);
  Parameter a("a", random_tensor(3, 4, rng)), b("b", random_tensor(3, 4, rng));
  Parameter row("row", random_tensor(1, 4, rng)), pos("pos", random_tensor(3, 4, rng, 0.5, 2.0));
  Parameter m("m", random_tensor(4, 5, rng));
  auto op = [&](const std::string& name, std::vector<Parameter*> ps, std::function<Var(Graph&)> f) {
    ops.emplace_back(name, testing::grad_check(ps, f).max_rel_error);
  };
  op("matmul", {&a, &m}, [&](Graph& g) { return project(tc::matmul(g.param(a), g.param(m))); });
  op("transpose", {&a}, [&](Graph& g) { return project(tc::transpose(g.param(a))); });
  op("add", {&a, &b}, [&](Graph& g) { return project(tc::add(g.param(a), g.param(b))); });
  op("sub", {&a, &b}, [&](Graph& g) { return project(tc::sub(g.param(a), g.param(b))); });
  op("mul", {&a, &b}, [&](Graph& g) { return project(tc::mul(g.param(a), g.param(b))); });
  op("scale", {&a}, [&](Graph& g) { return project(tc::scale(g.param(a), -2.5)); });
  op("add_row", {&a, &row}, [&](Graph& g) { return project(tc::add_row(g.param(a), g.param(row))); });
  op("sum", {&a}, [&](Graph& g) { return tc::sum(tc::mul(g.param(a), g.param(a))); });
  op("mean", {&a}, [&](Graph& g) { return tc::mean(tc::mul(g.param(a), g.param(a))); });
  op("log", {&pos}, [&](Graph& g) { return project(tc::log(g.param(pos))); });
  op("relu", {&a}, [&](Graph& g) { return project(tc::relu(g.param(a))); });
  op("dropout", {&a}, [&](Graph& g) {
    Rng local(11);  // same mask on every evaluation
    return project(tc::dropout(g.param(a), 0.3, local, true));
  });
  op("softmax", {&a}, [&](Graph& g) { return project(tc::softmax(g.param(a))); });
  op("log_softmax", {&a}, [&](Graph& g) { return project(tc::log_softmax(g.param(a))); });
  Parameter gain("gain", random_tensor(1, 4, rng, 0.5, 1.5));
  op("layer_norm", {&a, &gain, &row}, [&](Graph& g) { return project(tc::layer_norm(g.param(a), g.param(gain), g.param(row))); });
  const std::vector<int> targets{0, 2, 1};
  op("cross_entropy", {&a}, [&](Graph& g) { return tc::cross_entropy(g.param(a), targets); });
  op("nll", {&a}, [&](Graph& g) { return tc::nll(tc::log_softmax(g.param(a)), targets); });
  op("concat_cols", {&a, &b}, [&](Graph& g) {
    const Var parts[] = {g.param(a), g.param(b)};
    return project(tc::concat_cols(parts));
  });
  op("concat_rows", {&a, &row}, [&](Graph& g) {
    const Var parts[] = {g.param(a), g.param(row)};
    return project(tc::concat_rows(parts));
  });
  op("slice_rows", {&a}, [&](Graph& g) { return project(tc::slice_rows(g.param(a), 1, 2)); });
  op("slice_cols", {&a}, [&](Graph& g) { return project(tc::slice_cols(g.param(a), 1, 2)); });
  op("select_rows", {&a}, [&](Graph& g) {
    const std::size_t rows[] = {2, 0, 2};
    return project(tc::select_rows(g.param(a), rows));
  });

  Parameter q("q", random_tensor(6, 4, rng)), k("k", random_tensor(6, 4, rng)), v("v", random_tensor(6, 6, rng));
  const std::vector<std::size_t> q_len{2, 1, 3}, k_len{3, 1, 2};
  const std::pair<std::string, tc::AttentionMask> masks[] = {
      {"attention/full", tc::AttentionMask::full()},
      {"attention/sliding", tc::AttentionMask::sliding(3, false)},
      {"attention/sliding+global", tc::AttentionMask::sliding(3, true)},
      {"attention/segmented", tc::AttentionMask::segmented(q_len, k_len)}};
  for (const auto& [name, mask] : masks) {
    op(name, {&q, &k, &v}, [&](Graph& g) { return project(tc::attention(g.param(q), g.param(k), g.param(v), mask, 2)); });
  }
  Parameter x1("x1", random_tensor(3, 2, rng)), x2("x2", random_tensor(3, 3, rng)), x3("x3", random_tensor(3, 2, rng));
  op("tensor_fuse", {&x1, &x2, &x3}, [&](Graph& g) {
    const Var parts[] = {g.param(x1), g.param(x2), g.param(x3)};
    return project(fusion::tensor_fuse(parts));
  });

  {
    seq::SeqEncoderConfig cfg;
    cfg.input_dim = 3;
    cfg.value_embed_dim = 4;
    cfg.output_dim = 4;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.window = 3;
    cfg.ffn_dim = 6;
    Rng r(18);
    seq::SeqEncoder enc("e", cfg, r);
    jitter(enc.parameters(), 19);
    const Tensor x = random_tensor(5, 3, r), w = random_tensor(1, 4, r);
    stacks.emplace_back("seq_encoder", testing::grad_check(enc.parameters(), [&](Graph& g) {
                                         return tc::sum(tc::mul(enc.encode(g, x), g.constant(w)));
                                       }).max_rel_error);
  }
  for (fusion::Method method : {fusion::Method::XattnEarly, fusion::Method::XattnLate}) {
    Rng r(13);
    fusion::XattnOptions opt;
    opt.embed_dim = 4;
    opt.n_heads = 2;
    opt.n_blocks = 2;
    fusion::CrossAttentionModel model(method, std::vector<std::size_t>{3, 2, 2}, opt, 5, 0.0, r);
    auto params = model.parameters();
    jitter(params, 14);
    const std::vector<fusion::Sample> s = {
        {{random_tensor(1, 3, r), random_tensor(3, 2, r), random_tensor(2, 2, r)}, 0, 0},
        {{random_tensor(1, 3, r), random_tensor(2, 2, r), random_tensor(4, 2, r)}, 2, 1}};
    const std::vector<const fusion::Sample*> batch = {&s[0], &s[1]};
    Rng unused(0);
    stacks.emplace_back(std::string("cross_attention/") + std::string(fusion::method_name(method)),
                        testing::grad_check(params, [&](Graph& g) { return model.loss(g, batch, false, unused); })
                            .max_rel_error);
  }

  auto worst = [](const auto& list) {
    return *std::max_element(list.begin(), list.end(), [](const auto& x, const auto& y) { return x.second < y.second; });
  };
  const auto wo = worst(ops), ws = worst(stacks);
  return {wo.second < kOp && ws.second < kStack,
          fmt("%zu ops, worst %s %.2e; %zu stacks, worst %s %.2e", ops.size(), wo.first.c_str(), wo.second,
              stacks.size(), ws.first.c_str(), ws.second)};
}

Outcome tensor_fusion() {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::size_t failures = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<std::vector<double>> parts(3);
    for (auto& p : parts) {
      p.resize(dim(rng));
      for (double& x : p) x = n(rng);
    }
    std::vector<double> want;
    for (std::size_t i = 0; i <= parts[0].size(); ++i)
      for (std::size_t j = 0; j <= parts[1].size(); ++j)
        for (std::size_t k = 0; k <= parts[2].size(); ++k) {
          const double l = i < parts[0].size() ? parts[0][i] : 1.0;
          const double a = j < parts[1].size() ? parts[1][j] : 1.0;
          const double v = k < parts[2].size() ? parts[2][k] : 1.0;
          want.push_back(l * a * v);
        }
    const auto got = fusion::tensor_fuse(parts);
    const std::size_t len = (parts[0].size() + 1) * (parts[1].size() + 1) * (parts[2].size() + 1);
    failures += got.size() != len || got != want;
  }
  return {failures == 0, fmt("%zu/100 triples differ from the triple loop", failures)};
}

data::Corpus small_corpus(std::uint64_t seed, double separability) {
  data::SynthConfig sc;
  sc.seed = seed;
  sc.n_pairs = 6;
  sc.utterances_per_pair = 15;
  sc.class_mix = {0.2, 0.3, 0.5};
  sc.separability = separability;
  sc.sentence_dim = 8;
  sc.frames_min = 2;
  sc.frames_max = 4;
  return data::synth_corpus(sc);
}

eval::ExperimentConfig tiny_config(const std::string& data) {
  eval::ExperimentConfig cfg;
  cfg.data = data;
  cfg.seed = 3;
  cfg.folds = 3;
  cfg.smote_k = 2;
  cfg.encoder.value_embed_dim = 4;
  cfg.encoder.output_dim = 4;
  cfg.encoder.n_layers = 1;
  cfg.encoder.n_heads = 1;
  cfg.encoder.window = 3;
  cfg.encoder.hidden = 8;
  cfg.encoder.train.max_epochs = 3;
  cfg.fusion_train.max_epochs = 3;
  cfg.fusion_train.patience = 2;
  cfg.models = eval::default_fusion_models();
  for (auto& m : cfg.models) {
    m.hidden = 8;
    m.xattn.embed_dim = 4;
    m.xattn.n_heads = 1;
  }
  return cfg;
}

Outcome smote() {
  std::vector<std::string> problems;
  std::size_t synthetic = 0;
  double worst_residual = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    std::normal_distribution<double> n(0.0, 1.0);
    resample::FeatureRows x;
    std::vector<int> y;
    const std::size_t counts[] = {3 + seed % 4, 9 + seed, 40};
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < counts[c]; ++i) {
        std::vector<double> row(6);
        for (double& v : row) v = n(rng) + 2.0 * c;
        x.push_back(row);
        y.push_back(c);
      }
    std::vector<std::size_t> perm(y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    resample::FeatureRows xs;
    std::vector<int> ys;
    for (std::size_t i : perm) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
    const auto r = resample::smote(xs, ys, {5, seed});
    std::map<int, std::size_t> hist;
    for (int c : r.labels) ++hist[c];
    if (hist.size() != 3 || hist[0] != 40 || hist[1] != 40 || hist[2] != 40) problems.push_back("histogram");
    for (std::size_t i = r.n_original; i < r.features.size(); ++i) {
      const auto& o = r.origins[i - r.n_original];
      if (ys[o.base] != r.labels[i] || ys[o.neighbor] != r.labels[i] || o.base == o.neighbor || o.lambda < 0.0 ||
          o.lambda > 1.0)
        problems.push_back("origin");
      double res = 0.0;
      for (std::size_t j = 0; j < r.features[i].size(); ++j) {
        const double e = xs[o.base][j] + o.lambda * (xs[o.neighbor][j] - xs[o.base][j]) - r.features[i][j];
        res += e * e;
      }
      worst_residual = std::max(worst_residual, std::sqrt(res));
      ++synthetic;
    }
    if (resample::smote(xs, ys, {5, seed}).features != r.features) problems.push_back("determinism");
  }
  if (worst_residual >= 1e-9) problems.push_back("residual");

  // Validation rejects synthetic samples outright.
  bool guard = false;
  {
    Rng rng(1);
    fusion::FusionSpec spec;
    spec.modalities = {data::Modality::Audio};
    spec.method = fusion::Method::Unimodal;
    spec.hidden = 4;
    const std::size_t dims[] = {2};
    auto model = fusion::make_classifier(spec, dims, 0.0, rng);
    std::vector<fusion::Sample> fit = {{{random_tensor(1, 2, rng)}, 0, 0}, {{random_tensor(1, 2, rng)}, 1, 1}};
    std::vector<fusion::Sample> val = {{{random_tensor(1, 2, rng)}, 0, -1}};
    try {
      train::train(*model, fit, val, train::TrainConfig::fusion());
    } catch (const DataError&) {
      guard = true;
    }
  }
  if (!guard) problems.push_back("validation guard");

  // Under cross-validation every test prediction is a real record, once.
  const auto corpus = small_corpus(9, 3.0);
  const auto cfg = tiny_config("");
  const auto cv = eval::cross_validate(corpus, cfg);
  for (const auto& m : cv.models) {
    std::int64_t per_fold = 0;
    for (const auto& f : m.per_fold) per_fold += f.confusion.total();
    if (m.pooled.confusion.total() != static_cast<std::int64_t>(corpus.size()) || per_fold != m.pooled.confusion.total() ||
        m.predictions.size() != corpus.size())
      problems.push_back("test partition of " + m.label);
  }
  std::string detail = fmt("%zu synthetic points, worst residual %.1e", synthetic, worst_residual);
  for (const auto& p : problems) detail += "; failed: " + p;
  return {problems.empty(), detail};
}

Outcome fold_plan() {
  std::vector<std::string> pairs;
  for (int i = 0; i < 19; ++i) pairs.push_back("p" + std::to_string(100 + i));
  const std::set<std::string> all(pairs.begin(), pairs.end());
  std::size_t violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto plan = eval::plan_folds(pairs, 5, seed);
    std::vector<std::size_t> sizes;
    std::multiset<std::string> tested;
    for (const auto& f : plan.folds) {
      sizes.push_back(f.test.size());
      std::set<std::string> tr(f.train.begin(), f.train.end()), te(f.test.begin(), f.test.end());
      std::set<std::string> uni = tr;
      uni.insert(te.begin(), te.end());
      const bool overlap = std::any_of(te.begin(), te.end(), [&](const auto& p) { return tr.contains(p); });
      violations += overlap || uni != all || tr.size() + te.size() != 19;
      tested.insert(f.test.begin(), f.test.end());
    }
    std::sort(sizes.rbegin(), sizes.rend());
    violations += sizes != std::vector<std::size_t>{4, 4, 4, 4, 3};
    violations += tested.size() != 19 || std::set<std::string>(tested.begin(), tested.end()) != all;
  }
  return {violations == 0, fmt("100 seeds, %zu violations", violations)};
}

data::Corpus e2e_corpus(std::uint64_t seed, double separability, data::SignalLayout layout) {
  data::SynthConfig sc;
  sc.seed = seed;
  sc.n_pairs = 20;
  sc.utterances_per_pair = 50;
  sc.separability = separability;
  sc.layout = layout;
  return data::synth_corpus(sc);
}

Outcome end_to_end() {
  const auto cfg = small_config();
  const auto t0 = std::chrono::steady_clock::now();
  const auto high = eval::cross_validate(e2e_corpus(1, 3.0, data::SignalLayout::Shared), cfg);
  const double t = seconds_since(t0);
  const auto zero = eval::cross_validate(e2e_corpus(1, 0.0, data::SignalLayout::Shared), cfg);
  double lo = 1.0, hi = 0.0;
  std::string worst_lo, worst_hi;
  for (const auto& m : high.models)
    if (m.pooled.macro_f1 < lo) lo = m.pooled.macro_f1, worst_lo = m.label;
  for (const auto& m : zero.models)
    if (m.pooled.macro_f1 > hi) hi = m.pooled.macro_f1, worst_hi = m.label;
  return {lo >= 0.90 && t < 600.0 && hi <= 0.40,
          fmt("%zu methods on 1000 utterances: lowest MF %.4f (%s) in %.0f s; separability 0: highest MF %.4f (%s)",
              high.models.size(), lo, worst_lo.c_str(), t, hi, worst_hi.c_str())};
}

Outcome ordering() {
  auto cfg = small_config();
  const auto early_it = std::find_if(cfg.models.begin(), cfg.models.end(),
                                     [](const auto& m) { return m.method == fusion::Method::Early; });
  if (early_it == cfg.models.end()) return {false, "config has no early fusion model"};
  const fusion::FusionSpec early = *early_it;
  cfg.models = {early};
  for (auto m : data::kAllModalities) {
    fusion::FusionSpec u = early;
    u.method = fusion::Method::Unimodal;
    u.modalities = {m};
    cfg.models.push_back(u);
  }
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    data::SynthConfig sc;
    sc.seed = 100 + seed;
    sc.separability = 1.5;
    sc.layout = data::SignalLayout::Complementary;
    const auto r = eval::cross_validate(data::synth_corpus(sc), cfg);
    double best_uni = 0.0;
    for (std::size_t i = 1; i < r.models.size(); ++i) best_uni = std::max(best_uni, r.models[i].pooled.macro_f1);
    const double e = r.models[0].pooled.macro_f1;
    pass = pass && e >= best_uni - 0.02;
    detail += fmt("%sseed %llu early %.3f vs unimodal %.3f", detail.empty() ? "" : "; ", (unsigned long long)seed, e,
                  best_uni);
  }
  return {pass, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "ccd_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream out, err;
  const cli::Environment env{dir};
  auto run = [&](std::vector<std::string> args) { return cli::run(args, out, err, env); };
  if (run({"synth", "--out", (dir / "corpus.jsonl").string(), "--pairs", "6", "--utterances", "20", "--sentence-dim",
           "8", "--frames-min", "2", "--frames-max", "4", "--separability", "2"}) != 0)
    return {false, "synth failed: " + err.str()};
  std::ofstream(dir / "cfg.json") << eval::config_to_json(tiny_config("corpus.jsonl"));
  for (const char* o : {"a", "b"})
    if (run({"crossval", "--config", (dir / "cfg.json").string(), "--out", (dir / o).string()}) != 0)
      return {false, "crossval failed: " + err.str()};
  std::size_t files = 0, differing = 0;
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(dir / "a")) names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(dir / "b")) names_b.insert(e.path().filename().string());
  for (const auto& n : names_a) {
    ++files;
    differing += slurp(dir / "a" / n) != slurp(dir / "b" / n);
  }
  fs::remove_all(dir);
  return {names_a == names_b && files > 0 && differing == 0,
          fmt("%zu report files, %zu differ, file sets %s", files, differing, names_a == names_b ? "equal" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-arithmetic", metric_arithmetic},
      {"error-analysis", error_analysis_table},
      {"wer", wer_oracle},
      {"gradient-checks", gradient_checks},
      {"tensor-fusion", tensor_fusion},
      {"smote", smote},
      {"fold-plan", fold_plan},
      {"end-to-end", end_to_end},
      {"ordering", ordering},
      {"determinism", determinism},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == w; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
      return 2;
    }
  }
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && !wanted.contains(name)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
