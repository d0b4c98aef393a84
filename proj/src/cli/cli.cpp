#include "ccd/cli/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ccd/common/error.hpp"
#include "ccd/datamodel/io.hpp"
#include "ccd/datamodel/synth.hpp"
#include "ccd/eval/crossval.hpp"
#include "ccd/eval/experiment.hpp"
#include "ccd/eval/metrics.hpp"
#include "ccd/eval/pipeline.hpp"
#include "json.hpp"

namespace ccd::cli {

namespace fs = std::filesystem;

Environment Environment::from_process() {
  Environment env;
  if (const char* dir = std::getenv("CCD_DATA_DIR"); dir != nullptr && *dir != '\0') env.data_dir = dir;
  return env;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class Runner {
 public:
  Runner(std::ostream& out, const Environment& env) : out_(out), env_(env) {}

  fs::path data_path(const std::string& p) const {
    const fs::path path(p);
    return path.is_relative() && env_.data_dir ? *env_.data_dir / path : path;
  }

  // --data wins over the config's data field; either must be present.
  data::Corpus load_data(const eval::ExperimentConfig& cfg) const {
    if (cfg.data.empty()) throw ConfigError("no feature file: pass --data or set \"data\" in the config");
    return data::load_corpus(data_path(cfg.data));
  }

  eval::ExperimentConfig experiment(const std::string& config_path, const std::string& data,
                                    const std::optional<std::uint64_t>& seed,
                                    const std::optional<std::size_t>& jobs) const {
    auto cfg = eval::load_config(config_path);
    if (!data.empty()) cfg.data = data;
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    cfg.validate();
    return cfg;
  }

  void synth(const data::SynthConfig& sc, const std::string& out_path) const {
    const auto corpus = data::synth_corpus(sc);
    data::save_corpus(out_path, corpus, data::synth_manifest(sc));
    out_ << "wrote " << corpus.size() << " records to " << out_path << '\n';
  }

  void train(const eval::ExperimentConfig& cfg, const std::string& out_dir) const {
    const auto corpus = load_data(cfg);
    std::vector<std::size_t> all(corpus.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto pipe = eval::Pipeline::fit(corpus, all, cfg, cfg.seed);
    pipe.save(out_dir);
    for (std::size_t m = 0; m < cfg.models.size(); ++m) {
      const auto& h = pipe.histories()[m];
      out_ << eval::model_label(cfg.models[m]) << ": " << h.epochs.size() << " epochs, best " << h.best_epoch
           << '\n';
    }
  }

  void evaluate(const std::string& model_dir, const std::string& data, const std::string& out_path) const {
    const auto pipe = eval::Pipeline::load(model_dir);
    auto cfg = pipe.config();
    if (!data.empty()) cfg.data = data;
    const auto corpus = load_data(cfg);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (corpus[i].label) idx.push_back(i);
    if (idx.empty()) throw DataError("no labeled records to evaluate");
    const auto pred = pipe.predict(corpus, idx);
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["records"] = idx.size();
    auto models = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < pred.size(); ++m) {
      std::vector<int> actual;
      for (std::size_t i : idx) actual.push_back(data::class_index(*corpus[i].label));
      nlohmann::ordered_json mj;
      mj["model"] = eval::model_label(cfg.models[m]);
      mj["report"] = nlohmann::ordered_json::parse(eval::report_to_json(eval::metrics(actual, pred[m])));
      models.push_back(mj);
    }
    j["models"] = models;
    emit(j.dump(2) + "\n", out_path);
  }

  void crossval(const eval::ExperimentConfig& cfg, const std::string& out_dir) const {
    const auto corpus = load_data(cfg);
    const auto result = eval::cross_validate(corpus, cfg);
    eval::write_crossval_reports(out_dir, result, cfg);
    std::vector<eval::TableRow> rows;
    for (const auto& m : result.models) rows.push_back(eval::table_row(m.label, m.pooled));
    eval::write_table_csv(out_, rows);
  }

  void wer(const std::string& ref, const std::string& hyp) const {
    const auto r = eval::wer_text(read_file(ref), read_file(hyp));
    out_ << "substitutions " << r.counts.substitutions << '\n'
         << "deletions " << r.counts.deletions << '\n'
         << "insertions " << r.counts.insertions << '\n'
         << "reference_words " << r.counts.reference_words << '\n'
         << "wer " << fixed(r.rate, 4) << '\n';
  }

  // One label per non-blank line; labels are arbitrary tokens.
  void kappa(const std::string& a_path, const std::string& b_path) const {
    std::map<std::string, int> ids;
    auto read_labels = [&](const std::string& path) {
      std::istringstream in(read_file(path));
      std::vector<int> labels;
      for (std::string line; std::getline(in, line);) {
        std::istringstream words(line);
        std::string label, extra;
        if (!(words >> label)) continue;
        if (words >> extra) throw DataError(path + ": more than one label on a line: " + line);
        labels.push_back(ids.emplace(label, static_cast<int>(ids.size())).first->second);
      }
      return labels;
    };
    const auto a = read_labels(a_path);
    const auto b = read_labels(b_path);
    if (a.size() != b.size()) {
      throw DataError("label files differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.empty()) throw DataError("label files are empty");
    out_ << "items " << a.size() << '\n' << "kappa " << fixed(eval::cohens_kappa(a, b), 4) << '\n';
  }

  void report(const std::string& results, const std::string& out_path) const {
    std::ostringstream csv;
    eval::write_table_csv(csv, eval::table_rows_from_results(read_file(results)));
    emit(csv.str(), out_path);
  }

 private:
  void emit(const std::string& text, const std::string& out_path) const {
    if (out_path.empty())
      out_ << text;
    else
      write_file(out_path, text);
  }

  std::ostream& out_;
  const Environment& env_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
  CLI::App app{"Multimodal dialogue-act classification: data, training, cross-validation and reports", "ccd"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Runner runner(out, env);
  std::function<void()> action;

  data::SynthConfig sc;
  std::string synth_out, layout = "shared";
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic feature file and its manifest");
  synth->add_option("--out", synth_out, "Feature file to write (JSON lines)")->required();
  synth->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();
  synth->add_option("--pairs", sc.n_pairs, "Number of pairs")->capture_default_str();
  synth->add_option("--utterances", sc.utterances_per_pair, "Utterances per pair")->capture_default_str();
  synth->add_option("--separability", sc.separability, "Class-centroid distance in noise SDs")->capture_default_str();
  synth->add_option("--layout", layout, "shared or complementary per-modality signal")
      ->check(CLI::IsMember({"shared", "complementary"}))
      ->capture_default_str();
  synth->add_option("--sentence-dim", sc.sentence_dim, "Width of the sentence vector")->capture_default_str();
  synth->add_option("--frames-min", sc.frames_min, "Shortest frame sequence")->capture_default_str();
  synth->add_option("--frames-max", sc.frames_max, "Longest frame sequence")->capture_default_str();
  synth->add_flag("--audio-vec", sc.include_audio_vec, "Also emit an utterance-level audio vector");
  synth->callback([&] {
    action = [&] {
      sc.layout = layout == "complementary" ? data::SignalLayout::Complementary : data::SignalLayout::Shared;
      runner.synth(sc, synth_out);
    };
  });

  std::string config, data, out_path, model_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;

  auto* train = app.add_subcommand("train", "Fit every configured model on a whole feature file");
  train->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", data, "Feature file; overrides the config");
  train->add_option("--seed", seed, "Seed; overrides the config");
  train->add_option("--out", out_path, "Directory for the fitted pipeline")->required();
  train->callback([&] { action = [&] { runner.train(runner.experiment(config, data, seed, {}), out_path); }; });

  auto* evaluate = app.add_subcommand("evaluate", "Score a fitted pipeline on a labeled feature file");
  evaluate->add_option("--model", model_dir, "Directory written by train")->required();
  evaluate->add_option("--data", data, "Feature file; defaults to the one it was trained with");
  evaluate->add_option("--out", out_path, "Report file (JSON); stdout when omitted");
  evaluate->callback([&] { action = [&] { runner.evaluate(model_dir, data, out_path); }; });

  auto* crossval = app.add_subcommand("crossval", "Subject-independent k-fold cross-validation");
  crossval->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  crossval->add_option("--data", data, "Feature file; overrides the config");
  crossval->add_option("--seed", seed, "Seed; overrides the config");
  crossval->add_option("--jobs", jobs, "Folds run in parallel; overrides the config")->check(CLI::PositiveNumber);
  crossval->add_option("--out", out_path, "Report directory")->required();
  crossval->callback([&] { action = [&] { runner.crossval(runner.experiment(config, data, seed, jobs), out_path); }; });

  std::string ref, hyp;
  auto* wer = app.add_subcommand("wer", "Word error rate of a transcript against a reference");
  wer->add_option("--ref", ref, "Reference transcript")->required()->check(CLI::ExistingFile);
  wer->add_option("--hyp", hyp, "Hypothesis transcript")->required()->check(CLI::ExistingFile);
  wer->callback([&] { action = [&] { runner.wer(ref, hyp); }; });

  std::string a, b;
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa of two annotators, one label per line");
  kappa->add_option("--a", a, "First annotator's labels")->required()->check(CLI::ExistingFile);
  kappa->add_option("--b", b, "Second annotator's labels")->required()->check(CLI::ExistingFile);
  kappa->callback([&] { action = [&] { runner.kappa(a, b); }; });

  std::string results;
  auto* report = app.add_subcommand("report", "Per-class results table (CSV) from a crossval results.json");
  report->add_option("--results", results, "results.json written by crossval")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_path, "CSV file; stdout when omitted");
  report->callback([&] { action = [&] { runner.report(results, out_path); }; });

  std::vector<const char*> argv{"ccd"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (action) action();
    return kOk;
  } catch (const ConfigError& e) {
    err << "ccd: invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "ccd: numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    err << "ccd: data error: " << e.what() << '\n';
    return kData;
  } catch (const ShapeError& e) {
    err << "ccd: data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "ccd: data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "ccd: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace ccd::cli
