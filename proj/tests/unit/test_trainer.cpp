#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "ccd/common/error.hpp"
#include "ccd/tensorcore/nn.hpp"
#include "ccd/tensorcore/ops.hpp"
#include "ccd/trainer/trainer.hpp"
#include "doctest.h"

using namespace ccd;
using namespace ccd::train;
using ccd::fusion::Sample;
using ccd::tc::Graph;
using ccd::tc::Tensor;
using ccd::tc::Var;

namespace {

// Multinomial logistic regression: convex in its parameters.
class Logistic final : public fusion::Classifier {
 public:
  Logistic(std::size_t d, Rng& rng) : linear_("logistic", d, fusion::kNumClasses, rng), d_(d) {}

  Var loss(Graph& g, fusion::Batch batch, bool, Rng&) const override {
    return tc::cross_entropy(linear_(g.constant(fusion::stack_part(batch, 0, d_))), fusion::batch_labels(batch));
  }
  Tensor predict_proba(fusion::Batch batch) const override {
    Graph g;
    return tc::softmax_rows(linear_(g.constant(fusion::stack_part(batch, 0, d_))).value());
  }
  std::vector<tc::Parameter*> parameters() override {
    std::vector<tc::Parameter*> out;
    linear_.collect(out);
    return out;
  }
  fusion::Method method() const noexcept override { return fusion::Method::Unimodal; }
  tc::Linear& linear() { return linear_; }

 private:
  tc::Linear linear_;
  std::size_t d_;
};

// Well-separated Gaussian clusters; label i % classes.
std::vector<Sample> clusters(std::size_t n, std::size_t d, int classes, double sep, std::uint64_t seed,
                             long source_base = 0) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = noise(rng) + (j == static_cast<std::size_t>(y) ? sep : 0.0);
    out.push_back({{Tensor::row_vector(v)}, y, source_base + static_cast<long>(i)});
  }
  return out;
}

double macro_f1(const std::vector<int>& y, const std::vector<int>& p) {
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      tp += (y[i] == c && p[i] == c);
      fp += (y[i] != c && p[i] == c);
      fn += (y[i] == c && p[i] != c);
    }
    total += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return total / 3.0;
}

}  // namespace

TEST_CASE("regime defaults") {
  const auto u = TrainConfig::unimodal();
  CHECK(u.lr == 1e-3);
  CHECK(u.max_epochs == 100);
  CHECK(u.batch_size == 0);
  CHECK(u.dropout == 0.5);
  CHECK(u.patience < 0);
  const auto f = TrainConfig::fusion();
  CHECK(f.lr == 1e-4);
  CHECK(f.dropout == 0.2);
  CHECK(f.l2 == 0.01);
  CHECK(f.max_epochs == 50);
  CHECK(f.batch_size == 16);
  CHECK(f.patience == 15);
  CHECK(TrainConfig::for_regime(Regime::Unimodal) == u);
  CHECK(parse_regime("fusion") == Regime::Fusion);
  CHECK_FALSE(parse_regime("other").has_value());

  TrainConfig bad = f;
  bad.lr = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f;
  bad.patience = 51;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("separable data reaches validation macro-F1 >= 0.95") {
  const auto fit = clusters(240, 6, 3, 4.0, 1);
  const auto val = clusters(60, 6, 3, 4.0, 2, 1000);
  Rng rng(3);
  fusion::FusionSpec spec;
  spec.method = fusion::Method::Unimodal;
  spec.modalities = {data::Modality::Audio};
  TrainConfig cfg = TrainConfig::fusion();
  cfg.lr = 1e-3;
  const std::size_t dims[] = {6};
  auto model = fusion::make_classifier(spec, dims, cfg.dropout, rng);
  const auto history = train::train(*model, fit, val, cfg);
  const Tensor p = predict(*model, val);
  std::vector<int> y, yhat;
  for (std::size_t i = 0; i < val.size(); ++i) {
    y.push_back(val[i].label);
    yhat.push_back(fusion::argmax(p.row(i)));
  }
  CHECK(macro_f1(y, yhat) >= 0.95);
  CHECK(history.best_epoch >= 1);
}

TEST_CASE("full-batch loss is non-increasing on a convex problem") {
  // Two linearly separable classes.
  auto data = clusters(80, 4, 2, 3.0, 5);
  Rng rng(6);
  Logistic model(4, rng);
  TrainConfig cfg = TrainConfig::unimodal();
  cfg.dropout = 0.0;
  cfg.max_epochs = 60;
  const auto h = train::train(model, data, {}, cfg);
  REQUIRE(h.epochs.size() == 60);
  for (std::size_t e = 1; e < h.epochs.size(); ++e) CHECK(h.epochs[e].train_loss <= h.epochs[e - 1].train_loss);
  CHECK(h.best_epoch == 0);
  CHECK(std::isnan(h.epochs[0].val_loss));
}

TEST_CASE("best epoch is restored") {
  // Noisy labels so validation loss turns up and early stopping fires.
  auto fit = clusters(60, 8, 3, 0.5, 7);
  auto val = clusters(60, 8, 3, 0.5, 8, 500);
  Rng rng(9);
  Logistic model(8, rng);
  TrainConfig cfg = TrainConfig::fusion();
  cfg.lr = 0.05;
  cfg.l2 = 0.0;
  cfg.patience = 3;
  const auto h = train::train(model, fit, val, cfg);
  double best = h.epochs[0].val_loss;
  for (const auto& e : h.epochs) best = std::min(best, e.val_loss);
  CHECK(h.best_val_loss == best);
  CHECK(std::abs(mean_loss(model, val) - best) <= 1e-12);
  CHECK(h.stopped_early);
  CHECK(h.epochs.size() == h.best_epoch + 3);
}

TEST_CASE("patience 0 stops after the first non-improving epoch") {
  auto fit = clusters(60, 8, 3, 0.5, 7);
  auto val = clusters(60, 8, 3, 0.5, 8, 500);
  Rng rng(9);
  Logistic model(8, rng);
  TrainConfig cfg = TrainConfig::fusion();
  cfg.lr = 0.05;
  cfg.patience = 0;
  const auto h = train::train(model, fit, val, cfg);
  REQUIRE(h.epochs.size() >= 2);
  for (std::size_t e = 1; e + 1 < h.epochs.size(); ++e) CHECK(h.epochs[e].val_loss < h.epochs[e - 1].val_loss);
  CHECK(h.epochs.back().val_loss >= h.epochs[h.epochs.size() - 2].val_loss);
}

TEST_CASE("same seed gives identical history") {
  auto run = [] {
    auto fit = clusters(64, 5, 3, 2.0, 11);
    auto val = clusters(30, 5, 3, 2.0, 12, 100);
    Rng rng(13);
    fusion::FusionSpec spec;
    spec.method = fusion::Method::Unimodal;
    spec.modalities = {data::Modality::Video};
    TrainConfig cfg = TrainConfig::fusion();
    cfg.max_epochs = 5;
    cfg.patience = 3;
    cfg.seed = 99;
    const std::size_t dims[] = {5};
    auto model = fusion::make_classifier(spec, dims, cfg.dropout, rng);
    std::ostringstream csv;
    write_history_csv(csv, train::train(*model, fit, val, cfg));
    return csv.str();
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.rfind("epoch,train_loss,val_loss\n1,", 0) == 0);
}

TEST_CASE("validation rejects synthetic samples and empty training") {
  auto fit = clusters(9, 3, 3, 1.0, 1);
  auto val = clusters(3, 3, 3, 1.0, 2);
  val[1].source = -1;
  Rng rng(1);
  Logistic model(3, rng);
  CHECK_THROWS_AS(train::train(model, fit, val, TrainConfig::fusion()), DataError);
  CHECK_THROWS_AS(train::train(model, {}, {}, TrainConfig::fusion()), DataError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  auto fit = clusters(9, 3, 3, 1.0, 1);
  Rng rng(1);
  Logistic model(3, rng);
  model.linear().weight().value[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train::train(model, fit, {}, TrainConfig::fusion());
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("validation split") {
  std::vector<std::string> groups;
  for (int i = 0; i < 16; ++i) groups.push_back("p" + std::to_string(100 + i));

  const auto s = make_validation_split(groups, 0.1, 4);
  CHECK(s.validation.size() == 2);
  CHECK(s.fit.size() == 14);
  std::set<std::string> all(s.fit.begin(), s.fit.end());
  for (const auto& v : s.validation) CHECK(all.insert(v).second);
  CHECK(all == std::set<std::string>(groups.begin(), groups.end()));
  CHECK(make_validation_split(groups, 0.1, 4).validation == s.validation);

  groups.resize(10);
  CHECK(make_validation_split(groups, 0.1, 1).validation.size() == 1);
  CHECK(make_validation_split(groups, 0.0, 1).validation.empty());
  CHECK(make_validation_split(groups, 0.0, 1).fit.size() == 10);
  groups.resize(1);
  CHECK_THROWS_AS(make_validation_split(groups, 0.1, 1), ConfigError);
}
