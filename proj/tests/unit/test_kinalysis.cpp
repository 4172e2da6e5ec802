#include <gtest/gtest.h>

#include <cmath>

#include "duogesture/errors.hpp"
#include "duogesture/kinalysis.hpp"
#include "duogesture/kinematics.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {
namespace {

MotionSequence still(int length, int joints = 12) {
  MotionSequence m;
  m.length = length;
  m.joints = joints;
  m.regions = default_region_partition(joints);
  m.semantic_flags.assign(length, 0);
  m.frames.assign(static_cast<std::size_t>(length) * joints * kRot6d, 0.0f);
  const auto identity = rot6d_from_matrix(Mat3::Identity());
  for (int t = 0; t < length; ++t) {
    for (int j = 0; j < joints; ++j) {
      for (int c = 0; c < kRot6d; ++c) m.at(t, j, c) = static_cast<float>(identity[c]);
    }
  }
  return m;
}

void set_rotation(MotionSequence& m, int t, int j, const Vec3& axis, double angle) {
  const auto r6 = rot6d_from_matrix(axis_angle(axis, angle));
  for (int c = 0; c < kRot6d; ++c) m.at(t, j, c) = static_cast<float>(r6[c]);
}

AnalysisWindow window_of(MotionSequence m, int speaker = 0, int clip = 0) {
  AnalysisWindow w;
  w.duration_frames = m.length;
  w.speaker_id = speaker;
  w.clip_id = clip;
  w.motion = std::move(m);
  return w;
}

std::vector<double> sinusoid(double freq, int n, double fs, double phase = 0.0, double amp = 1.0) {
  std::vector<double> x(n);
  for (int t = 0; t < n; ++t) x[t] = amp * std::sin(2.0 * M_PI * freq * t / fs + phase);
  return x;
}

TEST(SegmentWindows, SplitsOnFlagChanges) {
  MotionSequence m = still(32);
  m.speaker_id = 4;
  for (int t = 16; t < 32; ++t) m.semantic_flags[t] = 1;
  const auto w = segment_windows(m, 7, 15);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].cls, WindowClass::beat);
  EXPECT_EQ(w[1].cls, WindowClass::semantic);
  EXPECT_EQ(w[1].start_frame, 16);
  EXPECT_EQ(w[1].duration_frames, 16);
  EXPECT_EQ(w[1].motion.length, 16);
  EXPECT_EQ(w[1].speaker_id, 4);
  EXPECT_EQ(w[1].clip_id, 7);
  EXPECT_EQ(w[1].motion.at(0, 3, 0), m.at(16, 3, 0));
}

TEST(SegmentWindows, ShortRunsAreDropped) {
  EXPECT_TRUE(segment_windows(still(10), 0, 15).empty());
  MotionSequence alternating = still(60);
  for (int t = 0; t < 60; ++t) alternating.semantic_flags[t] = t % 2;
  EXPECT_TRUE(segment_windows(alternating, 0, 15).empty());
}

std::vector<AnalysisWindow> lineage(int speaker, int beat, int semantic) {
  std::vector<AnalysisWindow> out;
  for (int i = 0; i < beat + semantic; ++i) {
    AnalysisWindow w;
    w.speaker_id = speaker;
    w.clip_id = speaker * 100 + i;
    w.cls = i < beat ? WindowClass::beat : WindowClass::semantic;
    w.duration_frames = 20;
    out.push_back(w);
  }
  return out;
}

TEST(MatchedSample, BalancesClassesPerSpeaker) {
  auto windows = lineage(0, 5, 3);
  const auto only_beat = lineage(1, 4, 0);
  windows.insert(windows.end(), only_beat.begin(), only_beat.end());
  const Rng rng(9);
  const MatchedSample a = matched_sample(windows, rng);
  int beat = 0, semantic = 0;
  for (const auto& w : a.windows) {
    EXPECT_EQ(w.speaker_id, 0);
    (w.cls == WindowClass::beat ? beat : semantic) += 1;
  }
  EXPECT_EQ(beat, 3);
  EXPECT_EQ(semantic, 3);
  EXPECT_EQ(a.skipped_speakers, std::vector<int>{1});
  const MatchedSample b = matched_sample(windows, rng);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) EXPECT_EQ(a.windows[i].clip_id, b.windows[i].clip_id);
}

TEST(PsdStats, SinusoidPeakWithinOneBin) {
  const AnalysisOptions opts;
  const double fs = 30.0;
  const double bin = fs / opts.welch.min_nfft;
  const SpectralStats s = psd_stats(sinusoid(1.12, 450, fs), fs, opts);
  EXPECT_FALSE(s.degenerate);
  EXPECT_LE(std::abs(s.peak_hz - 1.12), bin);
  EXPECT_GT(s.prominence, 3.0);
  EXPECT_GT(s.half_bandwidth_hz, 0.0);
}

TEST(PsdStats, AmplitudeScalingLeavesShapeStatistics) {
  const auto x = sinusoid(2.3, 300, 30.0, 0.4);
  std::vector<double> y = x;
  for (double& v : y) v *= 7.5;
  const SpectralStats a = psd_stats(x, 30.0);
  const SpectralStats b = psd_stats(y, 30.0);
  EXPECT_EQ(a.peak_hz, b.peak_hz);
  EXPECT_NEAR(a.prominence, b.prominence, 1e-9 * a.prominence);
  EXPECT_NEAR(a.half_bandwidth_hz, b.half_bandwidth_hz, 1e-9);
}

TEST(PsdStats, WhiteNoiseHasLowProminence) {
  Rng rng(11);
  int low = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> x(450);
    for (double& v : x) v = rng.normal();
    if (psd_stats(x, 30.0).prominence < 3.0) ++low;
  }
  EXPECT_GE(low, static_cast<int>(0.95 * trials));
}

TEST(PsdStats, ConstantSignalIsDegenerate) {
  EXPECT_TRUE(psd_stats(std::vector<double>(120, 0.3), 30.0).degenerate);
  EXPECT_THROW(psd_stats(std::vector<double>(10, 0.0), 30.0), DataError);
}

TEST(PsdStats, JointChannelOfRotatingJoint) {
  MotionSequence m = still(300);
  for (int t = 0; t < 300; ++t) set_rotation(m, t, 2, Vec3(0.0, 0.0, 1.0), 0.5 * std::sin(2.0 * M_PI * 1.5 * t / 30.0));
  const SpectralStats s = psd_stats(window_of(m), 2);
  EXPECT_LE(std::abs(s.peak_hz - 1.5), 30.0 / 256);
  EXPECT_TRUE(psd_stats(window_of(m), 5).degenerate);
}

TEST(Plv, IdenticalSignalsLockPerfectly) {
  const auto x = sinusoid(1.3, 300, 30.0);
  EXPECT_NEAR(plv(x, x, 30.0), 1.0, 1e-6);
}

TEST(Plv, ConstantPhaseOffsetLocks) {
  const auto a = sinusoid(1.5, 300, 30.0);
  const auto b = sinusoid(1.5, 300, 30.0, M_PI / 2.0);
  EXPECT_GT(plv(a, b, 30.0), 0.99);
}

TEST(Plv, CommonPhaseShiftIsInvariant) {
  const auto a = sinusoid(1.2, 300, 30.0, 0.0);
  const auto b = sinusoid(1.2, 300, 30.0, 0.7);
  const auto a2 = sinusoid(1.2, 300, 30.0, 1.9);
  const auto b2 = sinusoid(1.2, 300, 30.0, 2.6);
  EXPECT_NEAR(plv(a, b, 30.0), plv(a2, b2, 30.0), 1e-3);
}

TEST(Plv, IndependentPhasesDoNotLock) {
  Rng rng(13);
  double total = 0.0;
  const int trials = 50;
  const int n = 3000;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> a(n), b(n);
    double pa = 0.0, pb = 0.0;
    for (int t = 0; t < n; ++t) {
      pa += 2.0 * M_PI * 1.5 / 30.0 + 0.3 * rng.normal();
      pb += 2.0 * M_PI * 1.5 / 30.0 + 0.3 * rng.normal();
      a[t] = std::sin(pa);
      b[t] = std::sin(pb);
    }
    total += plv(a, b, 30.0);
  }
  EXPECT_LT(total / trials, 0.1);
}

TEST(Plv, RejectsMismatchedOrShortChannels) {
  EXPECT_THROW(plv(std::vector<double>(40, 0.0), std::vector<double>(41, 0.0), 30.0), ShapeError);
  EXPECT_THROW(plv(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0), 30.0), DataError);
}

TEST(OscillatorR2, RampIsPerfectlyPredicted) {
  std::vector<double> ramp(40);
  for (int t = 0; t < 40; ++t) ramp[t] = 0.2 * t - 1.0;
  const R2Result r = oscillator_r2({ramp});
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(OscillatorR2, NoiseIsWorseThanMean) {
  Rng rng(17);
  std::vector<double> x(400);
  for (double& v : x) v = rng.normal();
  EXPECT_LT(oscillator_r2({x}).value, 0.0);
}

TEST(OscillatorR2, SlowSinusoidIsWellPredicted) {
  EXPECT_GT(oscillator_r2({sinusoid(0.8, 120, 30.0)}).value, 0.9);
}

TEST(OscillatorR2, ConstantChannelIsDegenerate) {
  const R2Result r = oscillator_r2({std::vector<double>(20, 1.0)});
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isnan(r.value));
  EXPECT_THROW(oscillator_r2({std::vector<double>(2, 1.0)}), DataError);
}

class DeltaR2 : public ::testing::Test {
 protected:
  static constexpr int kLength = 90;
  MotionSequence m = still(kLength);
  Rng rng{19};

  void SetUp() override {
    for (int t = 0; t < kLength; ++t) {
      const double swing = 0.5 * std::sin(2.0 * M_PI * 1.0 * t / 30.0);
      set_rotation(m, t, 0, Vec3(1.0, 0.0, 0.0), swing + 0.03 * rng.normal());
      for (int j = 1; j < 4; ++j) set_rotation(m, t, j, Vec3(1.0, 0.0, 0.0), swing);
      for (int j = 4; j < 8; ++j) set_rotation(m, t, j, Vec3(0.0, 1.0, 0.0), 0.5 * rng.normal());
    }
  }
};

TEST_F(DeltaR2, IdenticalGroupsGiveZero) {
  const AnalysisWindow w = window_of(m);
  EXPECT_EQ(delta_r2(w, {0, 1}, {0, 1}).value, 0.0);
}

TEST_F(DeltaR2, CoherentJointsRaiseAndNoiseJointsLower) {
  const AnalysisWindow w = window_of(m);
  EXPECT_GT(delta_r2(w, {0}, {0, 1, 2, 3}).value, 0.0);
  EXPECT_LT(delta_r2(w, {0, 1}, {0, 1, 4, 5, 6, 7}).value, 0.0);
}

TEST_F(DeltaR2, StillJointsAreDegenerate) {
  const AnalysisWindow w = window_of(m);
  const R2Result r = delta_r2(w, {9}, {0, 1});
  EXPECT_TRUE(r.degenerate);
  EXPECT_THROW(oscillator_r2(w, {12}), ShapeError);
}

std::vector<AnalysisWindow> tree(int speakers, int clips, int per_clip) {
  std::vector<AnalysisWindow> out;
  for (int s = 0; s < speakers; ++s) {
    for (int c = 0; c < clips; ++c) {
      for (int k = 0; k < per_clip; ++k) {
        AnalysisWindow w;
        w.speaker_id = s;
        w.clip_id = s * clips + c;
        w.start_frame = 20 * k;
        w.duration_frames = 20;
        out.push_back(w);
      }
    }
  }
  return out;
}

TEST(HierBootstrap, ConstantStatisticHasDegenerateInterval) {
  const auto windows = tree(4, 2, 3);
  const BootstrapResult r =
      hier_bootstrap([](const AnalysisWindow&) { return 2.5; }, windows, 200, Rng(21));
  EXPECT_DOUBLE_EQ(r.point, 2.5);
  EXPECT_DOUBLE_EQ(r.ci_low, 2.5);
  EXPECT_DOUBLE_EQ(r.ci_high, 2.5);
  EXPECT_TRUE(r.reliable);
  EXPECT_EQ(r.replicates.size(), 200u);
}

TEST(HierBootstrap, SingleSpeakerIsUnreliable) {
  const auto windows = tree(1, 3, 2);
  const BootstrapResult r = hier_bootstrap(std::vector<double>(windows.size(), 1.0), windows, 50, Rng(22));
  EXPECT_FALSE(r.reliable);
}

TEST(HierBootstrap, DeterministicForFixedSeed) {
  const auto windows = tree(5, 2, 2);
  Rng draw(23);
  std::vector<double> values(windows.size());
  for (double& v : values) v = draw.normal();
  const BootstrapResult a = hier_bootstrap(values, windows, 300, Rng(24));
  const BootstrapResult b = hier_bootstrap(values, windows, 300, Rng(24));
  EXPECT_EQ(a.replicates, b.replicates);
  EXPECT_EQ(a.ci_low, b.ci_low);
  const BootstrapResult c = hier_bootstrap(values, windows, 300, Rng(25));
  EXPECT_NE(a.replicates, c.replicates);
}

TEST(HierBootstrap, IntervalCoversTrueMean) {
  const auto windows = tree(20, 3, 2);
  Rng draw(26);
  int covered = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::vector<double> values(windows.size());
    for (double& v : values) v = draw.normal();
    const BootstrapResult r = hier_bootstrap(values, windows, 400, draw.fork(static_cast<std::uint64_t>(i)));
    if (r.ci_low <= 0.0 && 0.0 <= r.ci_high) ++covered;
  }
  EXPECT_GE(covered, static_cast<int>(0.9 * trials));
}

TEST(HierBootstrap, NonFiniteValuesAreExcluded) {
  const auto windows = tree(3, 2, 2);
  std::vector<double> values(windows.size(), 1.0);
  values[0] = std::nan("");
  EXPECT_DOUBLE_EQ(hier_bootstrap(values, windows, 100, Rng(27)).point, 1.0);
  EXPECT_THROW(hier_bootstrap(std::vector<double>(3, 0.0), windows, 10, Rng(28)), ShapeError);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 50.0), 3.0);
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0}, 100.0), 4.0);
  EXPECT_DOUBLE_EQ(percentile({0.0, 10.0}, 25.0), 2.5);
}

}  // namespace
}  // namespace duogesture
