#include "ccd/eval/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ccd/common/error.hpp"
#include "ccd/resample/smote.hpp"
#include "ccd/tensorcore/checkpoint.hpp"
#include "ccd/textfeat/preprocess.hpp"
#include "json.hpp"

namespace ccd::eval {

using data::Modality;
using fusion::FusionSpec;
using fusion::Sample;
using tc::Tensor;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kPipelineVersion = 1;
constexpr const char* kPipelineFile = "pipeline.json";
constexpr const char* kParameterFile = "parameters.ckpt";

// Per-record model inputs. seq holds the normalized frames (a 1 x d row for
// vector modalities); vec holds the normalized vector (embedded for frames).
struct Inputs {
  std::array<Tensor, data::kNumModalities> seq;
  std::array<Tensor, data::kNumModalities> vec;
  int label = 0;
};

std::size_t mi(Modality m) { return data::modality_index(m); }

const std::optional<std::vector<double>>& vector_field(const data::UtteranceRecord& r, const std::string& f) {
  if (f == data::field::kSentenceVec) return r.sentence_vec;
  if (f == data::field::kSentimentVec) return r.sentiment_vec;
  if (f == data::field::kAudioVec) return r.audio_vec;
  throw ConfigError("'" + f + "' is not a vector field");
}

const std::optional<data::Frames>& frame_field(const data::UtteranceRecord& r, const std::string& f) {
  if (f == data::field::kAudioFrames) return r.audio_frames;
  if (f == data::field::kVideoFrames) return r.video_frames;
  throw ConfigError("'" + f + "' is not a frame field");
}

std::string describe(const data::Corpus& corpus, std::size_t i) {
  const auto& r = corpus[i];
  return "record " + std::to_string(i) + " (" + r.pair_id + "/" + r.speaker_id + ")";
}

ordered_json stats_json(const data::ColumnStats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}}; }

data::ColumnStats stats_from(const ordered_json& j) {
  data::ColumnStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw DataError("pipeline: statistics widths differ");
  return s;
}

}  // namespace

struct Pipeline::State {
  ExperimentConfig cfg;
  data::NormStats raw;
  std::optional<text::Vocabulary> vocab;
  data::ColumnStats tfidf_stats;
  std::array<std::size_t, data::kNumModalities> input_dim{};
  std::array<std::unique_ptr<fusion::EncoderModel>, data::kNumModalities> encoders;
  std::array<data::ColumnStats, data::kNumModalities> embed_stats;
  std::array<train::TrainHistory, data::kNumModalities> encoder_histories;
  // Null for a unimodal model over a frame modality; its encoder classifies.
  std::vector<std::unique_ptr<fusion::Classifier>> models;
  std::vector<std::vector<std::size_t>> model_dims;
  std::vector<train::TrainHistory> histories;

  std::array<bool, data::kNumModalities> used{};
  std::array<bool, data::kNumModalities> needs_encoder{};

  void plan() {
    used = {};
    needs_encoder = {};
    for (const auto& spec : cfg.models) {
      for (Modality m : spec.modalities) {
        used[mi(m)] = true;
        if (!fusion::uses_sequences(spec.method) && cfg.features.is_sequence(m)) needs_encoder[mi(m)] = true;
      }
    }
  }

  bool is_tfidf(Modality m) const { return m == Modality::Language && cfg.features.language == "tfidf"; }

  /// Normalized raw inputs; vec is left empty for frame modalities.
  Inputs prepare(const data::Corpus& corpus, std::size_t i) const {
    const auto& r = corpus[i];
    Inputs in;
    in.label = r.label ? data::class_index(*r.label) : 0;
    for (Modality m : data::kAllModalities) {
      const std::size_t k = mi(m);
      if (!used[k]) continue;
      const std::string& f = cfg.features.field(m);
      if (is_tfidf(m)) {
        auto v = text::tfidf(text::preprocess(r.text), *vocab);
        data::apply_norm(v, tfidf_stats, "tfidf");
        in.seq[k] = in.vec[k] = Tensor::row_vector(v);
      } else if (cfg.features.is_sequence(m)) {
        const auto& frames = frame_field(r, f);
        if (!frames) throw DataError(describe(corpus, i) + " has no " + f);
        if (frames->cols != input_dim[k]) {
          throw DataError(describe(corpus, i) + ": " + f + " width " + std::to_string(frames->cols) +
                          ", expected " + std::to_string(input_dim[k]));
        }
        data::Frames copy = *frames;
        data::apply_norm(copy, raw.at(f), f);
        in.seq[k] = seq::frames_tensor(copy);
      } else {
        const auto& vec = vector_field(r, f);
        if (!vec) throw DataError(describe(corpus, i) + " has no " + f);
        if (vec->size() != input_dim[k]) {
          throw DataError(describe(corpus, i) + ": " + f + " width " + std::to_string(vec->size()) +
                          ", expected " + std::to_string(input_dim[k]));
        }
        auto v = *vec;
        data::apply_norm(v, raw.at(f), f);
        in.seq[k] = in.vec[k] = Tensor::row_vector(v);
      }
    }
    return in;
  }

  /// Embeds the frame modalities that have an encoder; `normalize` is off
  /// while the embedding statistics are still being fitted.
  void embed(Inputs& in, bool normalize) const {
    for (std::size_t k = 0; k < data::kNumModalities; ++k) {
      if (!encoders[k]) continue;
      auto v = encoders[k]->encoder().embed(in.seq[k]);
      if (normalize) data::apply_norm(v, embed_stats[k], "embedding");
      in.vec[k] = Tensor::row_vector(v);
    }
  }

  std::vector<Tensor> parts_for(const FusionSpec& spec, const Inputs& in) const {
    std::vector<Tensor> parts;
    for (Modality m : spec.modalities) {
      parts.push_back(fusion::uses_sequences(spec.method) ? in.seq[mi(m)] : in.vec[mi(m)]);
    }
    return parts;
  }
};

Pipeline::Pipeline(std::unique_ptr<State> state) : state_(std::move(state)) {}
Pipeline::Pipeline(Pipeline&&) noexcept = default;
Pipeline& Pipeline::operator=(Pipeline&&) noexcept = default;
Pipeline::~Pipeline() = default;

const ExperimentConfig& Pipeline::config() const noexcept { return state_->cfg; }
const std::vector<train::TrainHistory>& Pipeline::histories() const noexcept { return state_->histories; }

namespace {

/// Upsamples the fit samples. Synthetic samples get source -1.
std::vector<Sample> upsample(const std::vector<Sample>& fit, bool vector_parts, std::size_t k, std::uint64_t seed) {
  resample::SmoteConfig sc{k, seed};
  std::vector<Sample> out = fit;
  if (vector_parts) {
    resample::FeatureRows rows;
    std::vector<int> labels;
    for (const auto& s : fit) {
      std::vector<double> row;
      for (const auto& p : s.parts) row.insert(row.end(), p.values().begin(), p.values().end());
      rows.push_back(std::move(row));
      labels.push_back(s.label);
    }
    const auto res = resample::smote(rows, labels, sc);
    for (std::size_t i = res.n_original; i < res.features.size(); ++i) {
      Sample s;
      s.label = res.labels[i];
      std::size_t offset = 0;
      for (const auto& p : fit[0].parts) {
        const auto& src = res.features[i];
        s.parts.push_back(Tensor::row_vector(std::span<const double>(src.data() + offset, p.cols())));
        offset += p.cols();
      }
      out.push_back(std::move(s));
    }
  } else {
    std::vector<resample::PartSample> ps;
    for (const auto& s : fit) ps.push_back({s.parts, s.label});
    auto res = resample::smote_parts(ps, sc);
    for (std::size_t i = res.n_original; i < res.samples.size(); ++i) {
      out.push_back({std::move(res.samples[i].parts), res.samples[i].label, -1});
    }
  }
  return out;
}

}  // namespace

Pipeline Pipeline::fit(const data::Corpus& corpus, std::span<const std::size_t> train_idx,
                       const ExperimentConfig& cfg_in, std::uint64_t seed) {
  auto st = std::make_unique<State>();
  st->cfg = cfg_in;
  st->cfg.validate();
  const auto& cfg = st->cfg;
  st->plan();
  if (train_idx.empty()) throw DataError("pipeline: empty training partition");
  for (std::size_t i : train_idx) {
    if (i >= corpus.size()) throw DataError("pipeline: record index out of range");
    if (!corpus[i].label) throw DataError(describe(corpus, i) + " has no label");
  }

  // Validation pairs.
  std::set<std::string> pair_set;
  for (std::size_t i : train_idx) pair_set.insert(corpus[i].pair_id);
  std::set<std::string> val_pairs;
  if (cfg.validation_fraction > 0.0) {
    const std::vector<std::string> pairs(pair_set.begin(), pair_set.end());
    const auto split = train::make_validation_split(pairs, cfg.validation_fraction, derive_seed(seed, 10));
    val_pairs.insert(split.validation.begin(), split.validation.end());
  }
  std::vector<std::size_t> fit_idx, val_idx;
  for (std::size_t i : train_idx) (val_pairs.contains(corpus[i].pair_id) ? val_idx : fit_idx).push_back(i);

  // Raw statistics over the whole training partition.
  std::vector<data::UtteranceRecord> train_records;
  for (std::size_t i : train_idx) train_records.push_back(corpus[i]);
  const data::Corpus train_corpus(std::move(train_records));
  std::vector<std::string> fields;
  for (Modality m : data::kAllModalities) {
    if (st->used[mi(m)] && !st->is_tfidf(m)) fields.push_back(cfg.features.field(m));
  }
  st->raw = data::fit_norm_stats(train_corpus, fields);
  for (Modality m : data::kAllModalities) {
    if (st->used[mi(m)] && !st->is_tfidf(m)) st->input_dim[mi(m)] = st->raw.at(cfg.features.field(m)).width();
  }
  if (st->used[mi(Modality::Language)] && st->is_tfidf(Modality::Language)) {
    std::vector<text::Document> docs;
    for (const auto& r : train_corpus.records()) docs.push_back(text::preprocess(r.text));
    st->vocab = text::fit_vocab(docs, cfg.tfidf_min_df);
    data::ColumnAccumulator acc("tfidf");
    for (const auto& d : docs) acc.add(text::tfidf(d, *st->vocab));
    st->tfidf_stats = acc.finish();
    st->input_dim[mi(Modality::Language)] = st->vocab->size();
  }

  std::vector<Inputs> fit_in, val_in;
  for (std::size_t i : fit_idx) fit_in.push_back(st->prepare(corpus, i));
  for (std::size_t i : val_idx) val_in.push_back(st->prepare(corpus, i));

  auto make_samples = [](const std::vector<Inputs>& in, std::span<const std::size_t> idx, auto&& parts) {
    std::vector<Sample> out;
    for (std::size_t j = 0; j < in.size(); ++j) out.push_back({parts(in[j]), in[j].label, static_cast<long>(idx[j])});
    return out;
  };

  // Stage 1: one encoder per frame modality feeding a vector-input model.
  for (Modality m : data::kAllModalities) {
    const std::size_t k = mi(m);
    if (!st->needs_encoder[k]) continue;
    auto one_part = [k](const Inputs& in) { return std::vector<Tensor>{in.seq[k]}; };
    auto fit_s = make_samples(fit_in, fit_idx, one_part);
    const auto val_s = make_samples(val_in, val_idx, one_part);
    if (cfg.smote) fit_s = upsample(fit_s, false, cfg.smote_k, derive_seed(seed, 500 + k));
    const auto tcfg = cfg.encoder_train_config(derive_seed(seed, 600 + k));
    Rng rng(derive_seed(seed, 700 + k));
    st->encoders[k] =
        std::make_unique<fusion::EncoderModel>(cfg.encoder.config(st->input_dim[k]), cfg.encoder.hidden, tcfg.dropout, rng);
    st->encoder_histories[k] = train::train(*st->encoders[k], fit_s, val_s, tcfg);
  }
  if (std::any_of(st->encoders.begin(), st->encoders.end(), [](const auto& e) { return e != nullptr; })) {
    for (auto& in : fit_in) st->embed(in, false);
    for (auto& in : val_in) st->embed(in, false);
    for (std::size_t k = 0; k < data::kNumModalities; ++k) {
      if (!st->encoders[k]) continue;
      data::ColumnAccumulator acc("embedding");
      for (const auto& in : fit_in) acc.add(in.vec[k].values());
      for (const auto& in : val_in) acc.add(in.vec[k].values());
      st->embed_stats[k] = acc.finish();
      for (auto* group : {&fit_in, &val_in})
        for (auto& in : *group) data::apply_norm(in.vec[k].values(), st->embed_stats[k], "embedding");
    }
  }

  // Stage 2: the configured models.
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const FusionSpec& spec = cfg.models[i];
    if (spec.method == fusion::Method::Unimodal && cfg.features.is_sequence(spec.modalities[0])) {
      st->models.push_back(nullptr);
      st->model_dims.push_back({st->input_dim[mi(spec.modalities[0])]});
      st->histories.push_back(st->encoder_histories[mi(spec.modalities[0])]);
      continue;
    }
    auto parts = [&](const Inputs& in) { return st->parts_for(spec, in); };
    auto fit_s = make_samples(fit_in, fit_idx, parts);
    const auto val_s = make_samples(val_in, val_idx, parts);
    std::vector<std::size_t> dims;
    for (const auto& p : fit_s.front().parts) dims.push_back(p.cols());
    if (cfg.smote) fit_s = upsample(fit_s, !fusion::uses_sequences(spec.method), cfg.smote_k, derive_seed(seed, 400 + i));
    const auto tcfg = cfg.train_config(spec.method, derive_seed(seed, 200 + i));
    Rng rng(derive_seed(seed, 300 + i));
    auto model = fusion::make_classifier(spec, dims, tcfg.dropout, rng);
    st->histories.push_back(train::train(*model, fit_s, val_s, tcfg));
    st->models.push_back(std::move(model));
    st->model_dims.push_back(std::move(dims));
  }
  return Pipeline(std::move(st));
}

std::vector<std::vector<int>> Pipeline::predict(const data::Corpus& corpus, std::span<const std::size_t> indices) const {
  const State& st = *state_;
  std::vector<Inputs> inputs;
  inputs.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= corpus.size()) throw DataError("pipeline: record index out of range");
    inputs.push_back(st.prepare(corpus, i));
    st.embed(inputs.back(), true);
  }
  std::vector<std::vector<int>> out;
  for (std::size_t m = 0; m < st.cfg.models.size(); ++m) {
    const FusionSpec& spec = st.cfg.models[m];
    std::vector<Sample> samples;
    const fusion::Classifier* model = st.models[m].get();
    if (!model) {
      const std::size_t k = mi(spec.modalities[0]);
      model = st.encoders[k].get();
      for (std::size_t j = 0; j < inputs.size(); ++j) samples.push_back({{inputs[j].seq[k]}, 0, static_cast<long>(indices[j])});
    } else {
      for (std::size_t j = 0; j < inputs.size(); ++j)
        samples.push_back({st.parts_for(spec, inputs[j]), 0, static_cast<long>(indices[j])});
    }
    std::vector<int> labels;
    labels.reserve(samples.size());
    if (!samples.empty()) {
      const Tensor p = train::predict(*model, samples);
      for (std::size_t r = 0; r < p.rows(); ++r) labels.push_back(fusion::argmax(p.row(r)));
    }
    out.push_back(std::move(labels));
  }
  return out;
}

void Pipeline::save(const std::filesystem::path& dir) const {
  const State& st = *state_;
  std::filesystem::create_directories(dir);
  ordered_json j;
  j["schema_version"] = kPipelineVersion;
  j["config"] = ordered_json::parse(config_to_json(st.cfg));
  ordered_json raw = ordered_json::object();
  for (const auto& [field, s] : st.raw.fields()) raw[field] = stats_json(s);
  j["raw_stats"] = raw;
  j["input_dims"] = st.input_dim;
  if (st.vocab) {
    j["vocabulary"] = ordered_json::parse(st.vocab->to_json());
    j["tfidf_stats"] = stats_json(st.tfidf_stats);
  }
  ordered_json emb = ordered_json::object();
  for (Modality m : data::kAllModalities)
    if (st.encoders[mi(m)]) emb[std::string(data::modality_name(m))] = stats_json(st.embed_stats[mi(m)]);
  j["embedding_stats"] = emb;
  j["model_dims"] = st.model_dims;

  tc::TensorTable table;
  for (Modality m : data::kAllModalities) {
    if (!st.encoders[mi(m)]) continue;
    auto t = tc::snapshot(st.encoders[mi(m)]->parameters(), "encoder." + std::string(data::modality_name(m)) + "/");
    table.merge(t);
  }
  for (std::size_t i = 0; i < st.models.size(); ++i) {
    if (!st.models[i]) continue;
    auto t = tc::snapshot(st.models[i]->parameters(), "model" + std::to_string(i) + "/");
    table.merge(t);
  }
  std::ofstream out(dir / kPipelineFile);
  if (!out) throw DataError("cannot write " + (dir / kPipelineFile).string());
  out << j.dump(2) << '\n';
  tc::save_checkpoint(dir / kParameterFile, table);
}

Pipeline Pipeline::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / kPipelineFile);
  if (!in) throw DataError("cannot open " + (dir / kPipelineFile).string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("pipeline.json: ") + e.what());
  }
  auto st = std::make_unique<State>();
  try {
    if (j.at("schema_version").get<int>() != kPipelineVersion) throw DataError("unsupported pipeline schema_version");
    st->cfg = config_from_json(j.at("config").dump());
    st->plan();
    for (const auto& [field, s] : j.at("raw_stats").items()) st->raw.set(field, stats_from(s));
    st->input_dim = j.at("input_dims").get<std::array<std::size_t, data::kNumModalities>>();
    if (j.contains("vocabulary")) {
      st->vocab = text::Vocabulary::from_json(j.at("vocabulary").dump());
      st->tfidf_stats = stats_from(j.at("tfidf_stats"));
    }
    st->model_dims = j.at("model_dims").get<std::vector<std::vector<std::size_t>>>();
    if (st->model_dims.size() != st->cfg.models.size()) throw DataError("pipeline: model count mismatch");

    const tc::TensorTable table = tc::load_checkpoint(dir / kParameterFile);
    const auto& emb = j.at("embedding_stats");
    Rng rng(0);
    for (Modality m : data::kAllModalities) {
      const std::size_t k = mi(m);
      if (!st->needs_encoder[k]) continue;
      st->embed_stats[k] = stats_from(emb.at(std::string(data::modality_name(m))));
      st->encoders[k] = std::make_unique<fusion::EncoderModel>(st->cfg.encoder.config(st->input_dim[k]),
                                                               st->cfg.encoder.hidden, 0.0, rng);
      tc::restore(st->encoders[k]->parameters(), table, "encoder." + std::string(data::modality_name(m)) + "/");
    }
    for (std::size_t i = 0; i < st->cfg.models.size(); ++i) {
      const auto& spec = st->cfg.models[i];
      if (spec.method == fusion::Method::Unimodal && st->cfg.features.is_sequence(spec.modalities[0])) {
        st->models.push_back(nullptr);
        continue;
      }
      auto model = fusion::make_classifier(spec, st->model_dims[i], 0.0, rng);
      tc::restore(model->parameters(), table, "model" + std::to_string(i) + "/");
      st->models.push_back(std::move(model));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("pipeline.json: ") + e.what());
  }
  return Pipeline(std::move(st));
}

}  // namespace ccd::eval
