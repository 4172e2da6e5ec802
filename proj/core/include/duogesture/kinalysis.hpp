#pragma once

#include <functional>
#include <string>
#include <vector>

#include "duogesture/rng.hpp"
#include "duogesture/spectral.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

enum class WindowClass : int { beat = 0, semantic = 1 };

std::string_view window_class_name(WindowClass c);

/// Contiguous single-class frame window with speaker/clip lineage. `motion` holds
/// only the window's frames, so duration_frames == motion.length.
struct AnalysisWindow {
  MotionSequence motion;
  WindowClass cls = WindowClass::beat;
  int speaker_id = 0;
  int clip_id = 0;
  int start_frame = 0;
  int duration_frames = 0;
};

struct AnalysisOptions {
  int min_window = 15;
  double band_lo_hz = 0.2;
  double band_hi_hz = 6.0;
  double plv_lo_hz = 0.5;
  double plv_hi_hz = 3.0;
  WelchOptions welch;
  int bootstrap_replicates = 2000;
};

/// Maximal runs of constant flag with at least `min_window` frames.
std::vector<AnalysisWindow> segment_windows(const MotionSequence& seq, int clip_id, int min_window = 15);

struct MatchedSample {
  std::vector<AnalysisWindow> windows;
  std::vector<int> skipped_speakers;  // speakers lacking one of the classes
};

/// Per speaker, min(#beat, #semantic) windows of each class drawn without replacement.
MatchedSample matched_sample(const std::vector<AnalysisWindow>& windows, const Rng& rng);

struct SpectralStats {
  double peak_hz = 0.0;
  double half_bandwidth_hz = 0.0;  // half width of the band around the peak above half power
  double prominence = 0.0;         // max / mean PSD in band
  bool degenerate = false;         // no in-band power
};

SpectralStats spectral_stats(const Spectrum& s, double band_lo_hz, double band_hi_hz);
/// Stats of a raw scalar signal.
SpectralStats psd_stats(const std::vector<double>& signal, double fs, const AnalysisOptions& opts = {});
/// Stats of one joint's principal rot6d channel. Throws DataError below min_window frames.
SpectralStats psd_stats(const AnalysisWindow& window, int joint, const AnalysisOptions& opts = {});
/// Stats of the mean PSD over several joints' channels.
SpectralStats psd_stats_group(const AnalysisWindow& window, const std::vector<int>& joints,
                              const AnalysisOptions& opts = {});

/// Phase-locking value of two equal-length signals after band-passing.
double plv(const std::vector<double>& a, const std::vector<double>& b, double fs, const AnalysisOptions& opts = {});
/// PLV between two joints' principal channels.
double plv(const AnalysisWindow& window, int joint_a, int joint_b, const AnalysisOptions& opts = {});

struct R2Result {
  double value = 0.0;
  bool degenerate = false;  // zero variance about the mean
};

/// Explained variance of the constant-velocity predictor 2x[t-1] - x[t-2], pooled over
/// every rot6d channel of the group for t >= 2.
R2Result oscillator_r2(const AnalysisWindow& window, const std::vector<int>& joints);
R2Result oscillator_r2(const std::vector<std::vector<double>>& channels);

/// oscillator_r2(large) - oscillator_r2(small); degenerate if either side is.
R2Result delta_r2(const AnalysisWindow& window, const std::vector<int>& small, const std::vector<int>& large);

using WindowStat = std::function<double(const AnalysisWindow&)>;

struct BootstrapResult {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool reliable = true;  // false with fewer than two speakers
  std::vector<double> replicates;
};

/// Speaker -> clip -> window resampling of a duration-weighted mean. Non-finite window
/// values are excluded. Percentile 95% interval.
BootstrapResult hier_bootstrap(const WindowStat& stat, const std::vector<AnalysisWindow>& windows, int replicates,
                               const Rng& rng);
/// Same resampling over precomputed per-window values.
BootstrapResult hier_bootstrap(const std::vector<double>& values, const std::vector<AnalysisWindow>& windows,
                               int replicates, const Rng& rng);

/// Paired class comparison: each replicate resamples the shared speaker/clip tree once
/// and reports mean(semantic) - mean(beat).
BootstrapResult hier_bootstrap_class_diff(const std::vector<double>& values,
                                          const std::vector<AnalysisWindow>& windows, int replicates,
                                          const Rng& rng);

double percentile(std::vector<double> v, double q);

/// Per-class summary of one statistic.
struct ClassSummary {
  std::string name;
  BootstrapResult beat;
  BootstrapResult semantic;
  BootstrapResult difference;  // semantic - beat
};

/// Joint groups used by the dataset report.
struct AnalysisGroups {
  std::vector<int> arm_swing;   // shoulders, elbows, wrists
  std::vector<int> shoulders;
  std::vector<int> elbows;
  std::vector<int> arm_core;    // arm chain plus spine
  std::vector<int> all_joints;
  static AnalysisGroups for_joints(int joints);
};

struct DatasetReport {
  /// False when no speaker has both classes; statistics then use every window.
  bool matched = true;
  int windows_total = 0;
  int windows_beat = 0;
  int windows_semantic = 0;
  std::vector<int> skipped_speakers;
  std::vector<ClassSummary> summaries;  // peak_hz, half_bw_hz, prominence, plv_shoulder_elbow, oscillator_r2_shoulder
  BootstrapResult delta_r2_arm_core;    // beat windows
  BootstrapResult delta_r2_all;         // beat windows
  // Fraction of replicates agreeing with the expected direction.
  double frac_half_bw_beat_narrower = 0.0;
  double frac_plv_beat_lower = 0.0;
  double frac_delta_r2_arm_core_positive = 0.0;
  double frac_delta_r2_all_negative = 0.0;
  Spectrum mean_psd_beat;
  Spectrum mean_psd_semantic;

  std::string to_json() const;
};

DatasetReport analyze_dataset(const std::vector<Clip>& clips, const AnalysisOptions& opts, const Rng& rng);

}  // namespace duogesture
