#include "ccd/datamodel/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ccd/common/error.hpp"
#include "json.hpp"

namespace ccd::data {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  return *it;
}

std::vector<double> parse_vector(const json& j, std::string_view name, std::size_t line) {
  if (!j.is_array()) throw ParseError(line, std::string(name) + " must be an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ParseError(line, std::string(name) + " contains a non-numeric entry");
    v.push_back(x.get<double>());
  }
  return v;
}

Frames parse_frames(const json& j, std::string_view name, std::size_t declared_cols, std::size_t line) {
  if (!j.is_array()) throw ParseError(line, std::string(name) + " must be an array of frame rows");
  Frames f;
  f.rows = j.size();
  f.cols = declared_cols;
  f.values.reserve(f.rows * f.cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    std::vector<double> row = parse_vector(j[r], name, line);
    if (r == 0) f.cols = row.size();
    if (row.size() != f.cols) {
      throw ParseError(line, std::string(name) + " is ragged: row " + std::to_string(r) + " has width " +
                                 std::to_string(row.size()) + ", row 0 has " + std::to_string(f.cols));
    }
    f.values.insert(f.values.end(), row.begin(), row.end());
  }
  return f;
}

std::string describe(const FieldSpec& spec) {
  std::string s = std::to_string(spec.dim);
  if (!spec.feature_set.empty()) s += " (" + spec.feature_set + ")";
  return s;
}

void check_width(std::string_view field, std::size_t width, const std::map<std::string, FieldSpec>& fields,
                 std::size_t line) {
  auto it = fields.find(std::string(field));
  if (it == fields.end()) {
    throw SchemaError("line " + std::to_string(line) + ": field " + std::string(field) +
                      " is not declared in the manifest");
  }
  if (width != it->second.dim) {
    throw SchemaError("line " + std::to_string(line) + ": field " + std::string(field) + " has width " +
                      std::to_string(width) + ", expected dim " + describe(it->second));
  }
}

UtteranceRecord parse_record(const json& j, std::map<std::string, FieldSpec>& fields, bool infer,
                             std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "record must be a JSON object");
  UtteranceRecord r;
  try {
    r.session_id = require(j, "session_id", line).get<std::string>();
    r.pair_id = require(j, "pair_id", line).get<std::string>();
    r.speaker_id = require(j, "speaker_id", line).get<std::string>();
    r.t_start_ms = require(j, "t_start_ms", line).get<std::int64_t>();
    r.text = j.value("text", std::string());
  } catch (const json::type_error& e) {
    throw ParseError(line, e.what());
  }
  if (r.t_start_ms < 0) throw ParseError(line, "t_start_ms must be >= 0");

  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    std::optional<Label> l;
    if (it->is_string()) l = parse_label(it->get<std::string>());
    else if (it->is_number_integer()) l = parse_label(std::to_string(it->get<int>()));
    if (!l) throw ParseError(line, "unknown label " + it->dump());
    r.label = *l;
  }

  auto fetch_vec = [&](std::string_view name, std::optional<std::vector<double>>& dst) {
    auto it = j.find(std::string(name));
    if (it == j.end() || it->is_null()) return;
    dst = parse_vector(*it, name, line);
    if (infer && !fields.contains(std::string(name))) fields[std::string(name)] = FieldSpec{"", dst->size()};
    check_width(name, dst->size(), fields, line);
  };
  auto fetch_frames = [&](std::string_view name, std::optional<Frames>& dst) {
    auto it = j.find(std::string(name));
    if (it == j.end() || it->is_null()) return;
    auto spec = fields.find(std::string(name));
    const std::size_t declared = spec == fields.end() ? 0 : spec->second.dim;
    dst = parse_frames(*it, name, declared, line);
    if (infer && !fields.contains(std::string(name))) {
      if (dst->rows == 0) throw ParseError(line, std::string(name) + ": cannot infer width from an empty matrix");
      fields[std::string(name)] = FieldSpec{"", dst->cols};
    }
    check_width(name, dst->cols, fields, line);
  };
  fetch_vec(field::kSentenceVec, r.sentence_vec);
  fetch_vec(field::kSentimentVec, r.sentiment_vec);
  fetch_vec(field::kAudioVec, r.audio_vec);
  fetch_frames(field::kAudioFrames, r.audio_frames);
  fetch_frames(field::kVideoFrames, r.video_frames);

  const ModalityMask derived = r.derived_mask();
  if (auto it = j.find("modality_mask"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError(line, "modality_mask must be an object");
    r.modality_mask.language = it->value("language", false);
    r.modality_mask.audio = it->value("audio", false);
    r.modality_mask.video = it->value("video", false);
    if (!(r.modality_mask == derived)) {
      throw SchemaError("line " + std::to_string(line) +
                        ": modality_mask disagrees with the fields present in the record");
    }
  } else {
    r.modality_mask = derived;
  }
  return r;
}

ordered_json frames_json(const Frames& f) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < f.rows; ++r) {
    auto row = f.row(r);
    rows.push_back(ordered_json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

ordered_json record_json(const UtteranceRecord& r) {
  ordered_json j;
  j["session_id"] = r.session_id;
  j["pair_id"] = r.pair_id;
  j["speaker_id"] = r.speaker_id;
  j["t_start_ms"] = r.t_start_ms;
  j["label"] = r.label ? ordered_json(std::string(label_name(*r.label))) : ordered_json(nullptr);
  j["text"] = r.text;
  if (r.sentence_vec) j["sentence_vec"] = *r.sentence_vec;
  if (r.sentiment_vec) j["sentiment_vec"] = *r.sentiment_vec;
  if (r.audio_vec) j["audio_vec"] = *r.audio_vec;
  if (r.audio_frames) j["audio_frames"] = frames_json(*r.audio_frames);
  if (r.video_frames) j["video_frames"] = frames_json(*r.video_frames);
  j["modality_mask"] = {{"language", r.modality_mask.language},
                        {"audio", r.modality_mask.audio},
                        {"video", r.modality_mask.video}};
  return j;
}

Corpus read_corpus_impl(std::istream& in, FeatureManifest manifest, bool infer) {
  if (!infer) manifest.validate();
  std::vector<UtteranceRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    records.push_back(parse_record(j, manifest.fields, infer, line));
  }
  return Corpus(std::move(records));
}

}  // namespace

void FeatureManifest::validate() const {
  if (schema_version != kSchemaVersion) {
    throw SchemaError("unsupported manifest schema_version " + std::to_string(schema_version));
  }
  for (const auto& [name, spec] : fields) {
    bool known_field = false;
    for (auto f : field::kAll) known_field = known_field || f == name;
    if (!known_field) throw SchemaError("manifest declares unknown field '" + name + "'");
    if (spec.dim == 0) throw SchemaError("manifest field " + name + " has dim 0");
    if (!spec.feature_set.empty()) {
      if (auto dim = known_feature_dim(spec.feature_set); dim && *dim != spec.dim) {
        throw SchemaError("manifest field " + name + " declares " + spec.feature_set + " with dim " +
                          std::to_string(spec.dim) + ", expected dim " + std::to_string(*dim));
      }
    }
  }
}

std::string manifest_to_json(const FeatureManifest& manifest) {
  ordered_json j;
  j["schema_version"] = manifest.schema_version;
  ordered_json fields = ordered_json::object();
  for (const auto& [name, spec] : manifest.fields) {
    ordered_json f;
    if (!spec.feature_set.empty()) f["feature_set"] = spec.feature_set;
    f["dim"] = spec.dim;
    fields[name] = f;
  }
  j["fields"] = fields;
  return j.dump(2) + "\n";
}

FeatureManifest manifest_from_json(const std::string& text) {
  FeatureManifest m;
  try {
    const json j = json::parse(text);
    m.schema_version = j.at("schema_version").get<int>();
    for (const auto& [name, f] : j.at("fields").items()) {
      m.fields[name] = FieldSpec{f.value("feature_set", std::string()), f.at("dim").get<std::size_t>()};
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& feature_file) {
  auto p = feature_file;
  p.replace_extension(".manifest.json");
  return p;
}

Corpus read_corpus(std::istream& in, const FeatureManifest& manifest) {
  return read_corpus_impl(in, manifest, false);
}

Corpus load_corpus(const std::filesystem::path& path, const FeatureManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  return read_corpus_impl(in, manifest, false);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  const auto mpath = manifest_path_for(path);
  if (std::filesystem::exists(mpath)) {
    std::ifstream min(mpath);
    std::stringstream buf;
    buf << min.rdbuf();
    return read_corpus_impl(in, manifest_from_json(buf.str()), false);
  }
  return read_corpus_impl(in, FeatureManifest{}, true);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus.records()) out << record_json(r).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus, const FeatureManifest& manifest) {
  manifest.validate();
  {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_corpus(out, corpus);
    if (!out) throw DataError("failed writing " + path.string());
  }
  std::ofstream mout(manifest_path_for(path));
  if (!mout) throw DataError("cannot write manifest for " + path.string());
  mout << manifest_to_json(manifest);
}

FeatureManifest infer_manifest(const Corpus& corpus) {
  FeatureManifest m;
  for (const auto& r : corpus.records()) {
    if (r.sentence_vec) m.fields.try_emplace(std::string(field::kSentenceVec), FieldSpec{"", r.sentence_vec->size()});
    if (r.sentiment_vec)
      m.fields.try_emplace(std::string(field::kSentimentVec), FieldSpec{"", r.sentiment_vec->size()});
    if (r.audio_vec) m.fields.try_emplace(std::string(field::kAudioVec), FieldSpec{"", r.audio_vec->size()});
    if (r.audio_frames) m.fields.try_emplace(std::string(field::kAudioFrames), FieldSpec{"", r.audio_frames->cols});
    if (r.video_frames) m.fields.try_emplace(std::string(field::kVideoFrames), FieldSpec{"", r.video_frames->cols});
  }
  return m;
}

}  // namespace ccd::data
