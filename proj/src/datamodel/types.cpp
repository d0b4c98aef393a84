#include "ccd/datamodel/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "ccd/common/error.hpp"

namespace ccd::data {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Label label_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumClasses)) {
    throw DataError("class index " + std::to_string(index) + " out of range");
  }
  return static_cast<Label>(index);
}

std::string_view label_name(Label l) noexcept {
  switch (l) {
    case Label::Confusion: return "Confusion";
    case Label::Conflict: return "Conflict";
    case Label::Other: return "Other";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view text) {
  const std::string t = lower(text);
  if (t == "confusion") return Label::Confusion;
  if (t == "conflict") return Label::Conflict;
  if (t == "other") return Label::Other;
  int idx = -1;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
  if (ec == std::errc() && ptr == t.data() + t.size() && idx >= 0 && idx < static_cast<int>(kNumClasses)) {
    return static_cast<Label>(idx);
  }
  return std::nullopt;
}

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::Language: return "language";
    case Modality::Audio: return "audio";
    case Modality::Video: return "video";
  }
  return "?";
}

std::optional<Modality> parse_modality(std::string_view text) {
  const std::string t = lower(text);
  for (Modality m : kAllModalities)
    if (t == modality_name(m)) return m;
  return std::nullopt;
}

Frames::Frames(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw DataError("frame matrix size does not match its shape");
}

bool ModalityMask::has(Modality m) const noexcept {
  switch (m) {
    case Modality::Language: return language;
    case Modality::Audio: return audio;
    case Modality::Video: return video;
  }
  return false;
}

ModalityMask UtteranceRecord::derived_mask() const {
  ModalityMask m;
  m.language = sentence_vec.has_value() || sentiment_vec.has_value() || !text.empty();
  m.audio = audio_frames.has_value() || audio_vec.has_value();
  m.video = video_frames.has_value();
  return m;
}

std::optional<std::size_t> known_feature_dim(std::string_view feature_set) {
  static const std::map<std::string, std::size_t, std::less<>> dims = {
      {"roberta", 768}, {"sentence", 768}, {"sentiment", 3},   {"loudness", 11},
      {"pitch", 10},    {"shimmer", 2},    {"jitter", 2},      {"mfcc", 16},
      {"wav2vec", 768}, {"eye_gaze", 112}, {"head_pose", 6},   {"facial_aus", 35},
  };
  auto it = dims.find(lower(feature_set));
  if (it == dims.end()) return std::nullopt;
  return it->second;
}

Corpus::Corpus(std::vector<UtteranceRecord> records) : records_(std::move(records)) {
  for (const auto& r : records_) groups_[r.pair_id].insert(r.speaker_id);
  validate();
}

Corpus::Corpus(std::vector<UtteranceRecord> records, Groups groups)
    : records_(std::move(records)), groups_(std::move(groups)) {
  validate();
}

void Corpus::validate() const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    auto it = groups_.find(r.pair_id);
    if (it == groups_.end()) {
      throw DataError("record " + std::to_string(i) + ": pair '" + r.pair_id + "' is not in the group table");
    }
    if (!it->second.contains(r.speaker_id)) {
      throw DataError("record " + std::to_string(i) + ": speaker '" + r.speaker_id + "' does not belong to pair '" +
                      r.pair_id + "'");
    }
    if (r.t_start_ms < 0) throw DataError("record " + std::to_string(i) + ": negative t_start_ms");
  }
}

std::vector<std::string> Corpus::pair_ids() const {
  std::vector<std::string> ids;
  ids.reserve(groups_.size());
  for (const auto& [pair, speakers] : groups_) ids.push_back(pair);
  return ids;
}

std::vector<std::size_t> Corpus::indices_for_pairs(const std::set<std::string>& pairs) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (pairs.contains(records_[i].pair_id)) out.push_back(i);
  return out;
}

}  // namespace ccd::data
