#include <gtest/gtest.h>

#include "duogesture/archive.hpp"
#include "duogesture/datagen.hpp"
#include "duogesture/errors.hpp"
#include "duogesture/kinalysis.hpp"
#include "duogesture/regions.hpp"
#include "duogesture/validate.hpp"
#include "tmpdir.hpp"

namespace duogesture {
namespace {

const ClassSummary& summary(const DatasetReport& r, const std::string& name) {
  for (const auto& s : r.summaries) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("missing summary " + name);
}

TEST(SynthClip, SameSeedAndIndexGiveIdenticalBytes) {
  SynthSpec spec;
  const Clip a = synth_clip(spec, 0);
  const Clip b = synth_clip(spec, 0);
  EXPECT_EQ(encode_array(NdArray::from_f32({static_cast<std::uint32_t>(a.motion.frames.size())}, a.motion.frames)),
            encode_array(NdArray::from_f32({static_cast<std::uint32_t>(b.motion.frames.size())}, b.motion.frames)));
  EXPECT_EQ(a, b);
  EXPECT_NE(synth_clip(spec, 1).motion.frames, a.motion.frames);
  SynthSpec other = spec;
  other.rng_seed = 1;
  EXPECT_NE(synth_clip(other, 0).motion.frames, a.motion.frames);
}

TEST(SynthClip, GroundTruthSatisfiesSequenceInvariants) {
  SynthSpec spec;
  ValidationOptions strict;
  strict.require_orthonormal = true;
  for (int i = 0; i < 10; ++i) {
    const Clip c = synth_clip(spec, i);
    EXPECT_TRUE(validate_sequence(c.motion, strict).empty()) << "clip " << i;
    EXPECT_EQ(c.features.speaker_id, c.motion.speaker_id);
    EXPECT_LT(c.motion.speaker_id, spec.n_speakers);
  }
}

TEST(SynthClip, WordFeaturesFollowSpans) {
  SynthSpec spec;
  const SyntheticFeatureProvider provider(spec);
  const Clip c = synth_clip(spec, 3, provider);
  std::vector<int> word_at(c.motion.length, -1);
  for (const auto& s : c.motion.word_spans) {
    for (int t = s.start; t < s.end; ++t) word_at[t] = s.word_id;
  }
  for (int t = 0; t < c.motion.length; ++t) {
    const float* row = c.features.e_s.data() + static_cast<std::size_t>(t) * spec.word_dim;
    if (word_at[t] < 0) {
      for (int d = 0; d < spec.word_dim; ++d) EXPECT_EQ(row[d], 0.0f);
    } else {
      const auto& emb = provider.word_embedding(word_at[t]);
      for (int d = 0; d < spec.word_dim; ++d) EXPECT_EQ(row[d], emb[d]);
    }
  }
  for (float v : c.features.e_a) EXPECT_TRUE(std::isfinite(v));
}

TEST(SynthClip, SemanticFramesCarryTriggerWords) {
  SynthSpec spec;
  for (int i = 0; i < 20; ++i) {
    const Clip c = synth_clip(spec, i);
    for (int t = 0; t < c.motion.length; ++t) {
      if (c.motion.semantic_flags[t] != 1) continue;
      bool covered = false;
      for (const auto& s : c.motion.word_spans) {
        if (t >= s.start && t < s.end && s.word_id < spec.n_triggers) covered = true;
      }
      EXPECT_TRUE(covered) << "clip " << i << " frame " << t;
    }
  }
}

TEST(SynthDataset, SemanticFractionNearTarget) {
  SynthSpec spec;
  spec.n_clips = 200;
  const double frac = semantic_frame_fraction(synth_dataset(spec));
  EXPECT_GE(frac, 0.09);
  EXPECT_LE(frac, 0.15);
  EXPECT_NEAR(frac, spec.semantic_fraction, 0.03);
}

TEST(SynthDataset, BeatOnlyClipsSwingAtBeatFrequency) {
  SynthSpec spec;
  spec.n_clips = 24;
  spec.semantic_fraction = 0.0;
  const auto clips = synth_dataset(spec);
  EXPECT_EQ(semantic_frame_fraction(clips), 0.0);
  AnalysisOptions opts;
  opts.bootstrap_replicates = 200;
  const DatasetReport report = analyze_dataset(clips, opts, Rng(0));
  EXPECT_FALSE(report.matched);
  const double bin = spec.fps / opts.welch.min_nfft;
  EXPECT_NEAR(summary(report, "peak_hz").beat.point, spec.beat_freq_hz, bin);
}

TEST(SynthDataset, SemanticFramesPhaseLockMoreThanBeatFrames) {
  SynthSpec spec;
  spec.n_clips = 120;
  spec.semantic_fraction = 0.35;
  AnalysisOptions opts;
  opts.bootstrap_replicates = 200;
  const DatasetReport report = analyze_dataset(synth_dataset(spec), opts, Rng(0));
  const auto& p = summary(report, "plv_shoulder_elbow");
  EXPECT_GT(p.semantic.point, p.beat.point);
}

TEST(SynthSpecTest, ValidationAndJson) {
  SynthSpec spec;
  EXPECT_TRUE(spec.violations().empty());
  spec.semantic_fraction = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.beat_freq_hz = 20.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.rng_seed = 99;
  spec.noise_level = 0.125;
  const SynthSpec back = SynthSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  EXPECT_THROW(SynthSpec::from_json(R"({"n_clip": 2})"), ConfigError);
}

TEST(SynthDataset, WriteThenReadMatchesInMemoryClips) {
  testing::TempDir tmp("dataset_rt");
  SynthSpec spec;
  spec.n_clips = 3;
  write_dataset(spec, tmp / "ds");
  const auto clips = read_dataset(tmp / "ds");
  ASSERT_EQ(clips.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(clips[i], synth_clip(spec, i));
}

}  // namespace
}  // namespace duogesture
