#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccd/datamodel/types.hpp"
#include "ccd/eval/experiment.hpp"
#include "ccd/eval/folds.hpp"
#include "ccd/eval/metrics.hpp"
#include "ccd/trainer/trainer.hpp"

namespace ccd::eval {

struct ModelResult {
  fusion::FusionSpec spec;
  std::string label;
  /// Test predictions of all folds pooled; the primary figure.
  EvalReport pooled;
  std::vector<EvalReport> per_fold;
  double accuracy_mean = 0.0;
  /// Sample standard deviation over folds.
  double accuracy_sd = 0.0;
  /// Out-of-fold prediction for every corpus record.
  std::vector<int> predictions;
};

struct CrossValResult {
  FoldPlan plan;
  std::vector<ModelResult> models;
  /// histories[fold][model].
  std::vector<std::vector<train::TrainHistory>> histories;
};

/// Per fold: fit a Pipeline on the training pairs, predict the test pairs.
/// Folds run on up to cfg.jobs threads; results do not depend on the
/// thread count. Throws DataError when the plan does not cover the corpus
/// pairs exactly once or a record is unlabeled.
CrossValResult cross_validate(const data::Corpus& corpus, const ExperimentConfig& cfg, const FoldPlan& plan);
/// Plans cfg.folds folds over the corpus pairs with cfg.seed.
CrossValResult cross_validate(const data::Corpus& corpus, const ExperimentConfig& cfg);

/// One line of a per-class results table.
struct TableRow {
  std::string model;
  std::array<ClassMetrics, kNumClasses> per_class{};
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

TableRow table_row(const std::string& model, const EvalReport& report);

/// Header "model,Confusion_P,Confusion_R,Confusion_F,...,A,MF"; 4 decimals.
void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows);
/// Header ",Confusion,Conflict,Other"; rows are actual classes.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);

std::string report_to_json(const EvalReport& report);
/// Structured results: config, fold plan, pooled and per-fold reports per model.
std::string results_to_json(const CrossValResult& result, const ExperimentConfig& cfg);
/// Pooled table rows from a results document. Throws DataError.
std::vector<TableRow> table_rows_from_results(const std::string& json_text);

/// results.json, table.csv, confusion_<i>.csv per model and
/// history_fold<f>_model<i>.csv into `dir` (created if needed).
void write_crossval_reports(const std::filesystem::path& dir, const CrossValResult& result,
                            const ExperimentConfig& cfg);

}  // namespace ccd::eval
