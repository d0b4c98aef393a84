#include "ccd/datamodel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ccd/common/error.hpp"
#include "ccd/common/rng.hpp"

namespace ccd::data {

namespace {

constexpr std::array<const char*, 40> kFiller = {
    "we",     "need",  "to",    "add",   "the",    "loop",   "here",  "so",     "it",     "moves",
    "agent",  "code",  "block", "then",  "turn",   "left",   "right", "run",    "this",   "one",
    "okay",   "maybe", "try",   "again", "number", "step",   "goes",  "after",  "before", "next",
    "screen", "click", "drag",  "put",   "under",  "repeat", "five",  "times",  "let",    "see",
};

constexpr std::array<std::array<const char*, 4>, kNumClasses> kPhrases = {{
    {"i don't understand", "wait what", "how does that work", "i'm confused"},
    {"no that's wrong", "i disagree", "stop doing that", "you're not listening"},
    {"", "", "", ""},
}};

struct Centroids {
  // [class] -> centroid of width dim
  std::array<std::vector<double>, kNumClasses> at;
};

std::vector<double> unit_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

/// Per-class strength of one modality under the layout.
std::array<double, kNumClasses> strengths(SignalLayout layout, Modality m) {
  if (layout == SignalLayout::Shared) return {1.0, 1.0, 1.0};
  switch (m) {
    case Modality::Language: return {1.0, 0.0, 0.0};
    case Modality::Audio: return {0.0, 1.0, 0.0};
    case Modality::Video: return {0.5, 0.5, 0.0};
  }
  return {0.0, 0.0, 0.0};
}

Centroids make_centroids(std::size_t dim, double sep, std::array<double, kNumClasses> strength, Rng& rng) {
  Centroids c;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    c.at[k] = unit_direction(dim, rng);
    for (auto& x : c.at[k]) x *= sep * strength[k];
  }
  return c;
}

std::vector<double> sample_vec(const std::vector<double>& centroid, const std::vector<double>& offset, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(centroid.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = centroid[j] + offset[j] + n(rng);
  return v;
}

Frames sample_frames(std::size_t rows, const std::vector<double>& centroid, const std::vector<double>& offset,
                     Rng& rng) {
  Frames f(rows, centroid.size());
  for (std::size_t r = 0; r < rows; ++r) {
    auto v = sample_vec(centroid, offset, rng);
    std::copy(v.begin(), v.end(), f.row(r).begin());
  }
  return f;
}

std::vector<double> pair_offset(std::size_t dim, double sd, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = sd * n(rng);
  return v;
}

std::string make_text(Label label, double separability, Rng& rng) {
  std::uniform_int_distribution<std::size_t> len(3, 8);
  std::uniform_int_distribution<std::size_t> word(0, kFiller.size() - 1);
  std::uniform_int_distribution<std::size_t> phrase(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<std::string> words;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) words.emplace_back(kFiller[word(rng)]);
  const double p = separability / (1.0 + separability);
  const auto& options = kPhrases[static_cast<std::size_t>(class_index(label))];
  if (u(rng) < p && options[0][0] != '\0') {
    std::uniform_int_distribution<std::size_t> at(0, words.size());
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at(rng)), options[phrase(rng)]);
  }
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  return text;
}

std::string pair_name(std::size_t i, std::size_t n) {
  const int width = std::max<int>(2, static_cast<int>(std::to_string(n - 1).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%0*zu", width, i);
  return buf;
}

void validate(const SynthConfig& cfg) {
  double total = 0.0;
  for (double p : cfg.class_mix) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("class_mix entries must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class_mix must sum to 1, got " + std::to_string(total));
  if (cfg.n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
  if (cfg.utterances_per_pair < 1) throw ConfigError("utterances_per_pair must be >= 1");
  if (!(cfg.separability >= 0.0) || !std::isfinite(cfg.separability)) {
    throw ConfigError("separability must be finite and >= 0");
  }
  if (cfg.frames_min < 1 || cfg.frames_max < cfg.frames_min) throw ConfigError("need 1 <= frames_min <= frames_max");
  if (cfg.sentence_dim == 0 || cfg.audio_dim == 0 || cfg.video_dim == 0 || cfg.audio_vec_dim == 0) {
    throw ConfigError("feature dims must be >= 1");
  }
}

}  // namespace

std::array<std::size_t, kNumClasses> allocate_counts(std::size_t n, const std::array<double, kNumClasses>& mix) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> rem{};
  std::size_t used = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double exact = static_cast<double>(n) * mix[k];
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(counts[k]);
    used += counts[k];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++counts[order[i % kNumClasses]];
  return counts;
}

Corpus synth_corpus(const SynthConfig& cfg) {
  validate(cfg);
  Rng structure(derive_seed(cfg.seed, 0));

  const double sep = cfg.separability;
  const Centroids sentence =
      make_centroids(cfg.sentence_dim, sep, strengths(cfg.layout, Modality::Language), structure);
  const Centroids sentiment = make_centroids(3, sep, strengths(cfg.layout, Modality::Language), structure);
  const Centroids audio = make_centroids(cfg.audio_dim, sep, strengths(cfg.layout, Modality::Audio), structure);
  const Centroids audio_vec =
      make_centroids(cfg.audio_vec_dim, sep, strengths(cfg.layout, Modality::Audio), structure);
  const Centroids video = make_centroids(cfg.video_dim, sep, strengths(cfg.layout, Modality::Video), structure);

  const std::size_t n = cfg.n_pairs * cfg.utterances_per_pair;
  const auto counts = allocate_counts(n, cfg.class_mix);
  std::vector<Label> labels;
  labels.reserve(n);
  for (std::size_t k = 0; k < kNumClasses; ++k) labels.insert(labels.end(), counts[k], label_from_index(int(k)));
  Rng label_rng(derive_seed(cfg.seed, 1));
  std::shuffle(labels.begin(), labels.end(), label_rng);

  std::vector<UtteranceRecord> records;
  records.reserve(n);
  Corpus::Groups groups;
  Rng rng(derive_seed(cfg.seed, 2));
  std::uniform_int_distribution<std::size_t> frames(cfg.frames_min, cfg.frames_max);
  std::uniform_int_distribution<std::int64_t> gap(800, 6000);

  for (std::size_t p = 0; p < cfg.n_pairs; ++p) {
    const std::string pair = pair_name(p, cfg.n_pairs);
    const std::array<std::string, 2> speakers = {pair + "-a", pair + "-b"};
    groups[pair] = {speakers[0], speakers[1]};
    const auto off_sentence = pair_offset(cfg.sentence_dim, cfg.subject_noise, rng);
    const auto off_sentiment = pair_offset(3, cfg.subject_noise, rng);
    const auto off_audio = pair_offset(cfg.audio_dim, cfg.subject_noise, rng);
    const auto off_audio_vec = pair_offset(cfg.audio_vec_dim, cfg.subject_noise, rng);
    const auto off_video = pair_offset(cfg.video_dim, cfg.subject_noise, rng);

    std::int64_t t = 0;
    for (std::size_t u = 0; u < cfg.utterances_per_pair; ++u) {
      const Label label = labels[p * cfg.utterances_per_pair + u];
      const auto k = static_cast<std::size_t>(class_index(label));
      UtteranceRecord r;
      r.session_id = "s-" + pair;
      r.pair_id = pair;
      r.speaker_id = speakers[u % 2];
      r.t_start_ms = t;
      t += gap(rng);
      r.label = label;
      r.text = make_text(label, sep, rng);
      r.sentence_vec = sample_vec(sentence.at[k], off_sentence, rng);
      r.sentiment_vec = sample_vec(sentiment.at[k], off_sentiment, rng);
      if (cfg.include_audio_vec) r.audio_vec = sample_vec(audio_vec.at[k], off_audio_vec, rng);
      r.audio_frames = sample_frames(frames(rng), audio.at[k], off_audio, rng);
      r.video_frames = sample_frames(frames(rng), video.at[k], off_video, rng);
      r.modality_mask = r.derived_mask();
      records.push_back(std::move(r));
    }
  }
  return Corpus(std::move(records), std::move(groups));
}

FeatureManifest synth_manifest(const SynthConfig& cfg) {
  auto named = [](std::string set, std::size_t dim) {
    auto known = known_feature_dim(set);
    return FieldSpec{known && *known == dim ? std::move(set) : std::string(), dim};
  };
  FeatureManifest m;
  m.fields[std::string(field::kSentenceVec)] = named("roberta", cfg.sentence_dim);
  m.fields[std::string(field::kSentimentVec)] = named("sentiment", 3);
  if (cfg.include_audio_vec) m.fields[std::string(field::kAudioVec)] = named("wav2vec", cfg.audio_vec_dim);
  m.fields[std::string(field::kAudioFrames)] = named("pitch", cfg.audio_dim);
  m.fields[std::string(field::kVideoFrames)] = named("facial_aus", cfg.video_dim);
  return m;
}

}  // namespace ccd::data
