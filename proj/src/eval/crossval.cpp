#include "ccd/eval/crossval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "ccd/common/error.hpp"
#include "ccd/eval/pipeline.hpp"
#include "json.hpp"

namespace ccd::eval {

using ordered_json = nlohmann::ordered_json;

namespace {

struct FoldOutput {
  std::vector<std::size_t> test;
  std::vector<std::vector<int>> predicted;  // [model][j]
  std::vector<train::TrainHistory> histories;
};

void check_plan(const data::Corpus& corpus, const FoldPlan& plan) {
  std::map<std::string, int> seen;
  for (const auto& fold : plan.folds) {
    std::set<std::string> train(fold.train.begin(), fold.train.end());
    for (const auto& p : fold.test) {
      if (train.contains(p)) throw DataError("fold plan puts pair " + p + " in train and test");
      ++seen[p];
    }
  }
  for (const auto& p : corpus.pair_ids()) {
    if (seen[p] != 1) throw DataError("fold plan must test pair " + p + " exactly once");
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  ordered_json classes = ordered_json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    classes[std::string(data::label_name(data::label_from_index(static_cast<int>(c))))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
  }
  j["per_class"] = classes;
  j["macro_f1"] = r.macro_f1;
  j["accuracy"] = r.accuracy;
  ordered_json cm = ordered_json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  j["confusion"] = cm;
  return j;
}

}  // namespace

CrossValResult cross_validate(const data::Corpus& corpus, const ExperimentConfig& cfg_in, const FoldPlan& plan) {
  ExperimentConfig cfg = cfg_in;
  cfg.validate();
  check_plan(corpus, plan);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].label) throw DataError("record " + std::to_string(i) + " has no label");
  }

  const std::size_t k = plan.k();
  std::vector<FoldOutput> outputs(k);
  std::vector<std::exception_ptr> errors(k);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t f = next++; f < k; f = next++) {
      try {
        const auto& fold = plan.folds[f];
        const auto train_idx = corpus.indices_for_pairs({fold.train.begin(), fold.train.end()});
        auto test_idx = corpus.indices_for_pairs({fold.test.begin(), fold.test.end()});
        const Pipeline pipe = Pipeline::fit(corpus, train_idx, cfg, derive_seed(cfg.seed, 1000 + f));
        outputs[f].predicted = pipe.predict(corpus, test_idx);
        outputs[f].histories = pipe.histories();
        outputs[f].test = std::move(test_idx);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg.jobs, k);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  CrossValResult result;
  result.plan = plan;
  for (auto& o : outputs) result.histories.push_back(std::move(o.histories));
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    ModelResult mr;
    mr.spec = cfg.models[m];
    mr.label = model_label(mr.spec);
    mr.predictions.assign(corpus.size(), -1);
    ConfusionMatrix pooled;
    for (const auto& o : outputs) {
      ConfusionMatrix fold_cm;
      for (std::size_t j = 0; j < o.test.size(); ++j) {
        const std::size_t i = o.test[j];
        const int y = data::class_index(*corpus[i].label);
        fold_cm.add(y, o.predicted[m][j]);
        mr.predictions[i] = o.predicted[m][j];
      }
      pooled += fold_cm;
      mr.per_fold.push_back(report_from_confusion(fold_cm));
    }
    mr.pooled = report_from_confusion(pooled);
    double mean = 0.0;
    for (const auto& r : mr.per_fold) mean += r.accuracy;
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (const auto& r : mr.per_fold) ss += (r.accuracy - mean) * (r.accuracy - mean);
    mr.accuracy_mean = mean;
    mr.accuracy_sd = std::sqrt(ss / static_cast<double>(k - 1));
    result.models.push_back(std::move(mr));
  }
  return result;
}

CrossValResult cross_validate(const data::Corpus& corpus, const ExperimentConfig& cfg) {
  const auto pairs = corpus.pair_ids();
  return cross_validate(corpus, cfg, plan_folds(pairs, cfg.folds, cfg.seed));
}

TableRow table_row(const std::string& model, const EvalReport& report) {
  return {model, report.per_class, report.accuracy, report.macro_f1};
}

void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  out << "model";
  for (data::Label l : data::kAllLabels) {
    const std::string n(data::label_name(l));
    out << ',' << n << "_P," << n << "_R," << n << "_F";
  }
  out << ",A,MF\n";
  for (const auto& r : rows) {
    out << r.model;
    for (const auto& c : r.per_class) out << ',' << fixed(c.precision, 4) << ',' << fixed(c.recall, 4) << ',' << fixed(c.f1, 4);
    out << ',' << fixed(r.accuracy, 4) << ',' << fixed(r.macro_f1, 4) << '\n';
  }
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  for (data::Label l : data::kAllLabels) out << ',' << data::label_name(l);
  out << '\n';
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out << data::label_name(data::label_from_index(static_cast<int>(i)));
    for (auto c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

std::string results_to_json(const CrossValResult& result, const ExperimentConfig& cfg) {
  ordered_json j;
  j["schema_version"] = 1;
  // The thread count does not change any result, so it stays out of the record.
  j["config"] = ordered_json::parse(config_to_json(cfg));
  j["config"].erase("jobs");
  ordered_json folds = ordered_json::array();
  for (const auto& f : result.plan.folds) folds.push_back({{"train", f.train}, {"test", f.test}});
  j["folds"] = folds;
  ordered_json models = ordered_json::array();
  for (const auto& m : result.models) {
    ordered_json mj;
    mj["model"] = m.label;
    mj["pooled"] = report_json(m.pooled);
    ordered_json per_fold = ordered_json::array();
    for (const auto& r : m.per_fold) per_fold.push_back(report_json(r));
    mj["per_fold"] = per_fold;
    mj["accuracy_mean"] = m.accuracy_mean;
    mj["accuracy_sd"] = m.accuracy_sd;
    models.push_back(mj);
  }
  j["models"] = models;
  return j.dump(2) + "\n";
}

std::vector<TableRow> table_rows_from_results(const std::string& json_text) {
  std::vector<TableRow> rows;
  try {
    const auto j = ordered_json::parse(json_text);
    for (const auto& m : j.at("models")) {
      TableRow r;
      r.model = m.at("model").get<std::string>();
      const auto& pooled = m.at("pooled");
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& cj = pooled.at("per_class").at(std::string(data::label_name(data::label_from_index(static_cast<int>(c)))));
        r.per_class[c].precision = cj.at("precision").get<double>();
        r.per_class[c].recall = cj.at("recall").get<double>();
        r.per_class[c].f1 = cj.at("f1").get<double>();
        r.per_class[c].support = cj.at("support").get<std::int64_t>();
      }
      r.accuracy = pooled.at("accuracy").get<double>();
      r.macro_f1 = pooled.at("macro_f1").get<double>();
      rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("results file: ") + e.what());
  }
  return rows;
}

void write_crossval_reports(const std::filesystem::path& dir, const CrossValResult& result,
                            const ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };
  open("results.json") << results_to_json(result, cfg);
  std::vector<TableRow> rows;
  for (const auto& m : result.models) rows.push_back(table_row(m.label, m.pooled));
  {
    auto out = open("table.csv");
    write_table_csv(out, rows);
  }
  for (std::size_t i = 0; i < result.models.size(); ++i) {
    auto out = open("confusion_" + std::to_string(i) + ".csv");
    write_confusion_csv(out, result.models[i].pooled.confusion);
  }
  for (std::size_t f = 0; f < result.histories.size(); ++f) {
    for (std::size_t i = 0; i < result.histories[f].size(); ++i) {
      auto out = open("history_fold" + std::to_string(f) + "_model" + std::to_string(i) + ".csv");
      train::write_history_csv(out, result.histories[f][i]);
    }
  }
}

}  // namespace ccd::eval
