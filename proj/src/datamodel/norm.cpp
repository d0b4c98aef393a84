#include "ccd/datamodel/norm.hpp"

#include <cmath>

#include "ccd/common/error.hpp"

namespace ccd::data {

void ColumnAccumulator::add(std::span<const double> row) {
  if (count_ == 0) {
    mean_.assign(row.size(), 0.0);
    m2_.assign(row.size(), 0.0);
  } else if (row.size() != mean_.size()) {
    throw DataError((name_.empty() ? std::string("column statistics") : name_) + ": row width " +
                    std::to_string(row.size()) + " differs from " + std::to_string(mean_.size()));
  }
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double delta = row[j] - mean_[j];
    mean_[j] += delta / n;
    m2_[j] += delta * (row[j] - mean_[j]);
  }
}

ColumnStats ColumnAccumulator::finish() const {
  if (count_ == 0) {
    throw DataError("no values for column " + (name_.empty() ? std::string("<unnamed>") : name_) + "[0]");
  }
  ColumnStats s;
  s.mean = mean_;
  s.stddev.resize(mean_.size());
  for (std::size_t j = 0; j < mean_.size(); ++j) s.stddev[j] = std::sqrt(m2_[j] / static_cast<double>(count_));
  return s;
}

const ColumnStats& NormStats::at(const std::string& field) const {
  auto it = fields_.find(field);
  if (it == fields_.end()) throw DataError("no normalization statistics for field " + field);
  return it->second;
}

namespace {

void accumulate_field(ColumnAccumulator& acc, const UtteranceRecord& r, std::string_view field) {
  auto add_vec = [&](const std::optional<std::vector<double>>& v) {
    if (v) acc.add(*v);
  };
  auto add_frames = [&](const std::optional<Frames>& f) {
    if (!f) return;
    for (std::size_t i = 0; i < f->rows; ++i) acc.add(f->row(i));
  };
  if (field == field::kSentenceVec) add_vec(r.sentence_vec);
  else if (field == field::kSentimentVec) add_vec(r.sentiment_vec);
  else if (field == field::kAudioVec) add_vec(r.audio_vec);
  else if (field == field::kAudioFrames) add_frames(r.audio_frames);
  else if (field == field::kVideoFrames) add_frames(r.video_frames);
  else throw DataError("cannot fit statistics for unknown field " + std::string(field));
}

}  // namespace

NormStats fit_norm_stats(const Corpus& train, std::span<const std::string> fields) {
  NormStats stats;
  for (const std::string& f : fields) {
    ColumnAccumulator acc(f);
    for (const auto& r : train.records()) accumulate_field(acc, r, f);
    stats.set(f, acc.finish());
  }
  return stats;
}

void apply_norm(std::span<double> row, const ColumnStats& stats, const std::string& field) {
  if (row.size() != stats.width()) {
    throw DataError("missing statistics for column " + (field.empty() ? std::string("<unnamed>") : field) + "[" +
                    std::to_string(std::min(row.size(), stats.width())) + "]: row width " +
                    std::to_string(row.size()) + ", statistics cover " + std::to_string(stats.width()));
  }
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = stats.stddev[j] > 0.0 ? (row[j] - stats.mean[j]) / stats.stddev[j] : 0.0;
  }
}

void apply_norm(Frames& frames, const ColumnStats& stats, const std::string& field) {
  if (frames.rows == 0 && frames.cols != stats.width()) apply_norm(std::span<double>(), stats, field);
  for (std::size_t i = 0; i < frames.rows; ++i) apply_norm(frames.row(i), stats, field);
}

Corpus apply_norm(const Corpus& corpus, const NormStats& stats) {
  std::vector<UtteranceRecord> out = corpus.records();
  for (auto& r : out) {
    for (const auto& [f, s] : stats.fields()) {
      if (f == field::kSentenceVec && r.sentence_vec) apply_norm(*r.sentence_vec, s, f);
      else if (f == field::kSentimentVec && r.sentiment_vec) apply_norm(*r.sentiment_vec, s, f);
      else if (f == field::kAudioVec && r.audio_vec) apply_norm(*r.audio_vec, s, f);
      else if (f == field::kAudioFrames && r.audio_frames) apply_norm(*r.audio_frames, s, f);
      else if (f == field::kVideoFrames && r.video_frames) apply_norm(*r.video_frames, s, f);
    }
  }
  return Corpus(std::move(out), corpus.groups());
}

}  // namespace ccd::data
