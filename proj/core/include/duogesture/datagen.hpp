#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "duogesture/config.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

/// Parameters of the synthetic gesture corpus.
struct SynthSpec {
  int n_clips = 200;
  int n_speakers = 8;
  double semantic_fraction = 0.12;  // 0 yields beat-only clips
  double beat_freq_hz = 1.12;
  double semantic_freq_hz = 1.69;
  double noise_level = 0.02;  // rad, scaled per joint role
  std::uint64_t rng_seed = 0;

  int clip_length = 64;
  double fps = 30.0;
  int joints = 12;
  int audio_dim = 64;
  int word_dim = 32;
  int style_dim = 32;
  int vocab_size = 64;
  int n_triggers = 8;  // word ids [0, n_triggers) carry pose templates
  int n_emotions = 8;

  /// Copies skeleton, clip and feature dimensions from a model config.
  static SynthSpec matching(const ModelConfig& cfg);

  std::vector<std::string> violations() const;
  void validate() const;

  std::string to_json() const;
  static SynthSpec from_json(std::string_view text);
  static SynthSpec load(const std::string& path);
};

/// Source of conditioning features for a motion sequence.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual FeatureBundle provide(const MotionSequence& seq) const = 0;
};

/// Default provider for the synthetic corpus.
///
/// e_a is a fixed random projection of prosody-like base signals (arm-chain speed
/// envelope and its onset derivative, word-onset pulses, emphasis on trigger words,
/// smooth noise) plus white noise; e_s looks up a fixed per-word embedding (zero rows
/// outside word spans); e_m and e_eps are fixed per-speaker and per-emotion vectors.
class SyntheticFeatureProvider : public FeatureProvider {
 public:
  explicit SyntheticFeatureProvider(const SynthSpec& spec);
  FeatureBundle provide(const MotionSequence& seq) const override;

  const std::vector<float>& word_embedding(int word_id) const;

 private:
  SynthSpec spec_;
  std::vector<std::vector<float>> words_;
  std::vector<std::vector<float>> speakers_;
  std::vector<std::vector<float>> emotions_;
  std::vector<double> projection_;  // base_signals x audio_dim
};

/// Deterministic in (spec.rng_seed, clip_index).
Clip synth_clip(const SynthSpec& spec, int clip_index);
/// Same as synth_clip but with features drawn from `provider`.
Clip synth_clip(const SynthSpec& spec, int clip_index, const FeatureProvider& provider);

std::vector<Clip> synth_dataset(const SynthSpec& spec);

/// Writes dataset.json (spec and clip list) and one clip_XXXXX archive per clip.
void write_dataset(const SynthSpec& spec, const std::filesystem::path& dir);

/// Fraction of flagged frames over a set of clips.
double semantic_frame_fraction(const std::vector<Clip>& clips);

}  // namespace duogesture
