#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccd::data {

/// Grouped dialogue-act category. The numeric values are the class indices
/// used by every model and metric.
enum class Label : std::uint8_t { Confusion = 0, Conflict = 1, Other = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {Label::Confusion, Label::Conflict, Label::Other};

constexpr int class_index(Label l) noexcept { return static_cast<int>(l); }
Label label_from_index(int index);
std::string_view label_name(Label l) noexcept;
/// Accepts the label name (case-insensitive) or its class index as text.
std::optional<Label> parse_label(std::string_view text);

/// Fixed modality order used for every concatenation in the engine.
enum class Modality : std::uint8_t { Language = 0, Audio = 1, Video = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {Modality::Language, Modality::Audio,
                                                                        Modality::Video};

constexpr std::size_t modality_index(Modality m) noexcept { return static_cast<std::size_t>(m); }
std::string_view modality_name(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view text);

/// Frame-level feature matrix, one row per frame.
struct Frames {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Frames() = default;
  Frames(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  Frames(std::size_t r, std::size_t c, std::vector<double> v);

  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  bool operator==(const Frames&) const = default;
};

struct ModalityMask {
  bool language = false;
  bool audio = false;
  bool video = false;

  bool has(Modality m) const noexcept;
  bool operator==(const ModalityMask&) const = default;
};

/// One spoken utterance with its label and every per-modality feature.
struct UtteranceRecord {
  std::string session_id;
  std::string pair_id;
  std::string speaker_id;
  std::int64_t t_start_ms = 0;
  std::optional<Label> label;
  std::string text;
  std::optional<std::vector<double>> sentence_vec;   // pretrained sentence embedding
  std::optional<std::vector<double>> sentiment_vec;  // 3-way sentiment scores
  std::optional<std::vector<double>> audio_vec;      // pretrained utterance-level audio embedding
  std::optional<Frames> audio_frames;
  std::optional<Frames> video_frames;
  ModalityMask modality_mask;

  /// Presence flags implied by which optional fields are set.
  ModalityMask derived_mask() const;

  bool operator==(const UtteranceRecord&) const = default;
};

/// Names of the numeric fields of a record, used as keys by manifests and
/// normalization statistics.
namespace field {
inline constexpr std::string_view kSentenceVec = "sentence_vec";
inline constexpr std::string_view kSentimentVec = "sentiment_vec";
inline constexpr std::string_view kAudioVec = "audio_vec";
inline constexpr std::string_view kAudioFrames = "audio_frames";
inline constexpr std::string_view kVideoFrames = "video_frames";
inline constexpr std::array<std::string_view, 5> kAll = {kSentenceVec, kSentimentVec, kAudioVec, kAudioFrames,
                                                         kVideoFrames};
}  // namespace field

/// Declared dimension of a named feature set, when the set has a fixed
/// width (tfidf is corpus-dependent and has none).
std::optional<std::size_t> known_feature_dim(std::string_view feature_set);

/// Ordered utterance records plus the pair -> speakers grouping.
class Corpus {
 public:
  using Groups = std::map<std::string, std::set<std::string>>;

  Corpus() = default;
  /// Derives groups from the records.
  explicit Corpus(std::vector<UtteranceRecord> records);
  /// Uses explicit groups; throws DataError if a record falls outside them.
  Corpus(std::vector<UtteranceRecord> records, Groups groups);

  const std::vector<UtteranceRecord>& records() const noexcept { return records_; }
  const UtteranceRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Groups& groups() const noexcept { return groups_; }
  std::vector<std::string> pair_ids() const;

  /// Indices of records whose pair_id is in `pairs`, in corpus order.
  std::vector<std::size_t> indices_for_pairs(const std::set<std::string>& pairs) const;

  bool operator==(const Corpus&) const = default;

 private:
  void validate() const;

  std::vector<UtteranceRecord> records_;
  Groups groups_;
};

}  // namespace ccd::data
