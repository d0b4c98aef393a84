#include "ccd/eval/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ccd/common/error.hpp"
#include "json.hpp"

namespace ccd::eval {

using data::Modality;
using fusion::FusionSpec;
using fusion::Method;
using ordered_json = nlohmann::ordered_json;

namespace {

// Strict object reader: every key must be consumed exactly once.
class Reader {
 public:
  Reader(const ordered_json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.contains(key)) throw ConfigError("unknown key " + path_ + "." + key);
    }
  }

  const ordered_json* find(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const char* key, T& out) {
    if (const auto* v = find(key)) out = convert<T>(*v, path_ + "." + key);
  }

  template <class T>
  void read(const char* key, std::optional<T>& out) {
    if (const auto* v = find(key)) out = convert<T>(*v, path_ + "." + key);
  }

  std::string where() const { return path_; }

  template <class T>
  static T convert(const ordered_json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + " must be a number");
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(path + " must be a non-negative integer");
      return v.get<T>();
    } else {
      if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
      return v.get<T>();
    }
  }

 private:
  const ordered_json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

TrainOverrides read_overrides(const ordered_json& j, const std::string& path) {
  TrainOverrides o;
  Reader r(j, path);
  r.read("lr", o.lr);
  r.read("max_epochs", o.max_epochs);
  r.read("batch_size", o.batch_size);
  r.read("dropout", o.dropout);
  r.read("l2", o.l2);
  r.read("patience", o.patience);
  return o;
}

ordered_json write_overrides(const TrainOverrides& o) {
  ordered_json j = ordered_json::object();
  if (o.lr) j["lr"] = *o.lr;
  if (o.max_epochs) j["max_epochs"] = *o.max_epochs;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.dropout) j["dropout"] = *o.dropout;
  if (o.l2) j["l2"] = *o.l2;
  if (o.patience) j["patience"] = *o.patience;
  return j;
}

std::string positional_name(seq::Positional p) { return p == seq::Positional::None ? "none" : "sinusoidal"; }

seq::Positional parse_positional(const std::string& s, const std::string& path) {
  if (s == "sinusoidal") return seq::Positional::Sinusoidal;
  if (s == "none") return seq::Positional::None;
  throw ConfigError(path + ": unknown positional encoding '" + s + "'");
}

FusionSpec read_model(const ordered_json& j, const std::string& path) {
  FusionSpec spec;
  Reader r(j, path);
  std::string method;
  r.read("method", method);
  if (method.empty()) throw ConfigError(path + ".method is required");
  const auto m = fusion::parse_method(method);
  if (!m) throw ConfigError(path + ": unknown method '" + method + "'");
  spec.method = *m;
  if (const auto* mods = r.find("modalities")) {
    if (!mods->is_array()) throw ConfigError(path + ".modalities must be an array");
    spec.modalities.clear();
    for (const auto& v : *mods) {
      const auto name = Reader::convert<std::string>(v, path + ".modalities");
      const auto mod = data::parse_modality(name);
      if (!mod) throw ConfigError(path + ": unknown modality '" + name + "'");
      spec.modalities.push_back(*mod);
    }
  }
  r.read("hidden", spec.hidden);
  r.read("tensor_proj_dim", spec.tensor_proj_dim);
  if (const auto* x = r.find("xattn")) {
    Reader xr(*x, path + ".xattn");
    xr.read("embed_dim", spec.xattn.embed_dim);
    xr.read("n_heads", spec.xattn.n_heads);
    xr.read("n_blocks", spec.xattn.n_blocks);
    xr.read("ffn_dim", spec.xattn.ffn_dim);
    xr.read("max_sequence", spec.xattn.max_sequence);
    std::string pos = positional_name(spec.xattn.positional);
    xr.read("positional", pos);
    spec.xattn.positional = parse_positional(pos, path + ".xattn.positional");
  }
  return spec;
}

ordered_json write_model(const FusionSpec& spec) {
  ordered_json j;
  j["method"] = std::string(fusion::method_name(spec.method));
  ordered_json mods = ordered_json::array();
  for (Modality m : spec.modalities) mods.push_back(std::string(data::modality_name(m)));
  j["modalities"] = mods;
  j["hidden"] = spec.hidden;
  j["tensor_proj_dim"] = spec.tensor_proj_dim;
  j["xattn"] = {{"embed_dim", spec.xattn.embed_dim},
                {"n_heads", spec.xattn.n_heads},
                {"n_blocks", spec.xattn.n_blocks},
                {"ffn_dim", spec.xattn.ffn_dim},
                {"max_sequence", spec.xattn.max_sequence},
                {"positional", positional_name(spec.xattn.positional)}};
  return j;
}

}  // namespace

bool FeatureChoice::is_sequence(Modality m) const {
  return m == Modality::Video || (m == Modality::Audio && audio == "audio_frames");
}

const std::string& FeatureChoice::field(Modality m) const {
  switch (m) {
    case Modality::Language: return language;
    case Modality::Audio: return audio;
    case Modality::Video: return video;
  }
  return language;
}

train::TrainConfig TrainOverrides::apply(train::TrainConfig base) const {
  if (lr) base.lr = *lr;
  if (max_epochs) base.max_epochs = *max_epochs;
  if (batch_size) base.batch_size = *batch_size;
  if (dropout) base.dropout = *dropout;
  if (l2) base.l2 = *l2;
  if (patience) base.patience = *patience;
  return base;
}

seq::SeqEncoderConfig EncoderOptions::config(std::size_t input_dim) const {
  seq::SeqEncoderConfig c;
  c.input_dim = input_dim;
  c.value_embed_dim = value_embed_dim;
  c.output_dim = output_dim;
  c.n_layers = n_layers;
  c.n_heads = n_heads;
  c.window = window;
  c.max_sequence = max_sequence;
  c.ffn_dim = ffn_dim;
  return c;
}

train::TrainConfig ExperimentConfig::train_config(Method method, std::uint64_t run_seed) const {
  train::TrainConfig c = method == Method::Unimodal ? unimodal_train.apply(train::TrainConfig::unimodal())
                                                    : fusion_train.apply(train::TrainConfig::fusion());
  c.seed = run_seed;
  return c;
}

train::TrainConfig ExperimentConfig::encoder_train_config(std::uint64_t run_seed) const {
  train::TrainConfig c = encoder.train.apply(unimodal_train.apply(train::TrainConfig::unimodal()));
  c.seed = run_seed;
  return c;
}

void ExperimentConfig::validate() {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(schema_version));
  }
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
  if (smote_k < 1) throw ConfigError("smote_k must be >= 1");
  if (features.language != "sentence_vec" && features.language != "sentiment_vec" && features.language != "tfidf") {
    throw ConfigError("features.language must be sentence_vec, sentiment_vec or tfidf");
  }
  if (features.audio != "audio_frames" && features.audio != "audio_vec") {
    throw ConfigError("features.audio must be audio_frames or audio_vec");
  }
  if (features.video != "video_frames") throw ConfigError("features.video must be video_frames");
  if (encoder.hidden == 0) throw ConfigError("encoder.hidden must be >= 1");
  encoder.config(1).validate();
  if (models.empty()) throw ConfigError("at least one model is required");
  for (auto& m : models) m.normalize();
  train_config(Method::Unimodal, 0).validate();
  train_config(Method::Early, 0).validate();
  encoder_train_config(0).validate();
}

std::vector<FusionSpec> default_fusion_models() {
  std::vector<FusionSpec> out;
  for (Method m : {Method::Early, Method::Late, Method::Tensor, Method::XattnEarly, Method::XattnLate}) {
    FusionSpec s;
    s.method = m;
    out.push_back(s);
  }
  return out;
}

std::string model_label(const FusionSpec& spec) {
  std::string s(fusion::method_name(spec.method));
  s += '[';
  for (std::size_t i = 0; i < spec.modalities.size(); ++i) {
    if (i) s += '+';
    s += data::modality_name(spec.modalities[i]);
  }
  return s + ']';
}

ExperimentConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Reader r(j, "config");
    if (!r.find("schema_version")) throw ConfigError("config.schema_version is required");
    r.read("schema_version", cfg.schema_version);
    if (cfg.schema_version != ExperimentConfig::kSchemaVersion) {
      throw ConfigError("unsupported config schema_version " + std::to_string(cfg.schema_version));
    }
    r.read("data", cfg.data);
    r.read("seed", cfg.seed);
    r.read("folds", cfg.folds);
    r.read("jobs", cfg.jobs);
    r.read("validation_fraction", cfg.validation_fraction);
    r.read("smote", cfg.smote);
    r.read("smote_k", cfg.smote_k);
    r.read("tfidf_min_df", cfg.tfidf_min_df);
    if (const auto* f = r.find("features")) {
      Reader fr(*f, "config.features");
      fr.read("language", cfg.features.language);
      fr.read("audio", cfg.features.audio);
      fr.read("video", cfg.features.video);
    }
    if (const auto* e = r.find("encoder")) {
      Reader er(*e, "config.encoder");
      er.read("value_embed_dim", cfg.encoder.value_embed_dim);
      er.read("output_dim", cfg.encoder.output_dim);
      er.read("n_layers", cfg.encoder.n_layers);
      er.read("n_heads", cfg.encoder.n_heads);
      er.read("window", cfg.encoder.window);
      er.read("max_sequence", cfg.encoder.max_sequence);
      er.read("ffn_dim", cfg.encoder.ffn_dim);
      er.read("hidden", cfg.encoder.hidden);
      if (const auto* t = er.find("train")) cfg.encoder.train = read_overrides(*t, "config.encoder.train");
    }
    if (const auto* models = r.find("models")) {
      if (!models->is_array()) throw ConfigError("config.models must be an array");
      for (std::size_t i = 0; i < models->size(); ++i) {
        cfg.models.push_back(read_model((*models)[i], "config.models[" + std::to_string(i) + "]"));
      }
    } else {
      cfg.models = default_fusion_models();
    }
    if (const auto* t = r.find("unimodal_train")) cfg.unimodal_train = read_overrides(*t, "config.unimodal_train");
    if (const auto* t = r.find("fusion_train")) cfg.fusion_train = read_overrides(*t, "config.fusion_train");
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["schema_version"] = cfg.schema_version;
  j["data"] = cfg.data;
  j["seed"] = cfg.seed;
  j["folds"] = cfg.folds;
  j["jobs"] = cfg.jobs;
  j["validation_fraction"] = cfg.validation_fraction;
  j["smote"] = cfg.smote;
  j["smote_k"] = cfg.smote_k;
  j["tfidf_min_df"] = cfg.tfidf_min_df;
  j["features"] = {{"language", cfg.features.language}, {"audio", cfg.features.audio}, {"video", cfg.features.video}};
  const auto& e = cfg.encoder;
  j["encoder"] = {{"value_embed_dim", e.value_embed_dim},
                  {"output_dim", e.output_dim},
                  {"n_layers", e.n_layers},
                  {"n_heads", e.n_heads},
                  {"window", e.window},
                  {"max_sequence", e.max_sequence},
                  {"ffn_dim", e.ffn_dim},
                  {"hidden", e.hidden},
                  {"train", write_overrides(e.train)}};
  ordered_json models = ordered_json::array();
  for (const auto& m : cfg.models) models.push_back(write_model(m));
  j["models"] = models;
  j["unimodal_train"] = write_overrides(cfg.unimodal_train);
  j["fusion_train"] = write_overrides(cfg.fusion_train);
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

}  // namespace ccd::eval
