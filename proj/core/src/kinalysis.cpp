#include "duogesture/kinalysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#include "duogesture/errors.hpp"
#include "duogesture/kinematics.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// In-band power below this is numerical residue of a constant signal.
constexpr double kPowerFloor = 1e-20;

MotionSequence slice(const MotionSequence& seq, int start, int count) {
  MotionSequence out;
  out.length = count;
  out.joints = seq.joints;
  out.fps = seq.fps;
  out.regions = seq.regions;
  out.speaker_id = seq.speaker_id;
  out.emotion_id = seq.emotion_id;
  const std::size_t stride = static_cast<std::size_t>(seq.joints) * kRot6d;
  out.frames.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(start * stride),
                    seq.frames.begin() + static_cast<std::ptrdiff_t>((start + count) * stride));
  out.semantic_flags.assign(seq.semantic_flags.begin() + start, seq.semantic_flags.begin() + start + count);
  for (const auto& w : seq.word_spans) {
    const int s = std::max(w.start, start);
    const int e = std::min(w.end, start + count);
    if (s < e) out.word_spans.push_back({s - start, e - start, w.word_id});
  }
  return out;
}

std::vector<double> channel(const AnalysisWindow& w, int joint) {
  return joint_principal_signal(w.motion, joint, 0, w.motion.length);
}

void check_window(const AnalysisWindow& w, int min_frames) {
  if (w.motion.length < min_frames) {
    throw DataError("analysis window has " + std::to_string(w.motion.length) + " frames, need " +
                    std::to_string(min_frames));
  }
}

/// Lineage tree: speaker -> clip -> window indices, restricted to finite values.
struct Tree {
  std::vector<std::vector<std::vector<std::size_t>>> speakers;
};

Tree build_tree(const std::vector<double>& values, const std::vector<AnalysisWindow>& windows) {
  std::map<int, std::map<int, std::vector<std::size_t>>> grouped;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    grouped[windows[i].speaker_id][windows[i].clip_id].push_back(i);
  }
  Tree t;
  for (auto& [spk, clips] : grouped) {
    std::vector<std::vector<std::size_t>> c;
    for (auto& [clip, idx] : clips) c.push_back(idx);
    t.speakers.push_back(std::move(c));
  }
  return t;
}

/// Weighted sums per class for one resample.
struct Accum {
  double sum[2] = {0, 0};
  double weight[2] = {0, 0};
  double mean(int c) const { return weight[c] > 0 ? sum[c] / weight[c] : kNaN; }
  double pooled() const {
    const double w = weight[0] + weight[1];
    return w > 0 ? (sum[0] + sum[1]) / w : kNaN;
  }
};

Accum resample(const Tree& tree, const std::vector<double>& values, const std::vector<AnalysisWindow>& windows,
               Rng& rng) {
  Accum a;
  const std::size_t ns = tree.speakers.size();
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& clips = tree.speakers[rng.index(ns)];
    for (std::size_t c = 0; c < clips.size(); ++c) {
      const auto& wins = clips[rng.index(clips.size())];
      for (std::size_t k = 0; k < wins.size(); ++k) {
        const std::size_t i = wins[rng.index(wins.size())];
        const int cls = static_cast<int>(windows[i].cls);
        const double w = windows[i].duration_frames;
        a.sum[cls] += w * values[i];
        a.weight[cls] += w;
      }
    }
  }
  return a;
}

Accum full_sample(const std::vector<double>& values, const std::vector<AnalysisWindow>& windows) {
  Accum a;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    const int cls = static_cast<int>(windows[i].cls);
    a.sum[cls] += windows[i].duration_frames * values[i];
    a.weight[cls] += windows[i].duration_frames;
  }
  return a;
}

template <typename F>
BootstrapResult run_bootstrap(const std::vector<double>& values, const std::vector<AnalysisWindow>& windows,
                              int replicates, const Rng& rng, F reduce) {
  if (values.size() != windows.size()) throw ShapeError("one value per window required");
  BootstrapResult r;
  const Tree tree = build_tree(values, windows);
  r.reliable = tree.speakers.size() >= 2;
  r.point = reduce(full_sample(values, windows));
  if (tree.speakers.empty()) {
    r.ci_low = r.ci_high = kNaN;
    r.reliable = false;
    return r;
  }
  Rng local = rng;
  std::vector<double> finite;
  for (int b = 0; b < replicates; ++b) {
    const double v = reduce(resample(tree, values, windows, local));
    r.replicates.push_back(v);
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) {
    r.ci_low = r.ci_high = kNaN;
  } else {
    r.ci_low = percentile(finite, 2.5);
    r.ci_high = percentile(finite, 97.5);
  }
  return r;
}

double fraction(const std::vector<double>& reps, bool (*pred)(double)) {
  std::size_t n = 0;
  std::size_t hit = 0;
  for (double v : reps) {
    if (!std::isfinite(v)) continue;
    ++n;
    hit += pred(v) ? 1 : 0;
  }
  return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
}

nlohmann::json boot_json(const BootstrapResult& b) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"point", num(b.point)}, {"ci_low", num(b.ci_low)}, {"ci_high", num(b.ci_high)}, {"reliable", b.reliable}};
}

}  // namespace

std::string_view window_class_name(WindowClass c) { return c == WindowClass::beat ? "beat" : "semantic"; }

std::vector<AnalysisWindow> segment_windows(const MotionSequence& seq, int clip_id, int min_window) {
  std::vector<AnalysisWindow> out;
  const int L = std::min<int>(seq.length, static_cast<int>(seq.semantic_flags.size()));
  int start = 0;
  while (start < L) {
    int end = start + 1;
    while (end < L && seq.semantic_flags[end] == seq.semantic_flags[start]) ++end;
    const int flag = seq.semantic_flags[start];
    if (end - start >= min_window && (flag == 0 || flag == 1)) {
      AnalysisWindow w;
      w.motion = slice(seq, start, end - start);
      w.cls = flag == 1 ? WindowClass::semantic : WindowClass::beat;
      w.speaker_id = seq.speaker_id;
      w.clip_id = clip_id;
      w.start_frame = start;
      w.duration_frames = end - start;
      out.push_back(std::move(w));
    }
    start = end;
  }
  return out;
}

MatchedSample matched_sample(const std::vector<AnalysisWindow>& windows, const Rng& rng) {
  std::map<int, std::array<std::vector<std::size_t>, 2>> by_speaker;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    by_speaker[windows[i].speaker_id][static_cast<int>(windows[i].cls)].push_back(i);
  }
  MatchedSample out;
  for (auto& [speaker, lists] : by_speaker) {
    const std::size_t n = std::min(lists[0].size(), lists[1].size());
    if (n == 0) {
      out.skipped_speakers.push_back(speaker);
      continue;
    }
    Rng local = rng.fork(static_cast<std::uint64_t>(speaker) + 1);
    for (auto& list : lists) {
      local.shuffle(list);
      std::vector<std::size_t> take(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n));
      std::sort(take.begin(), take.end());
      for (std::size_t i : take) out.windows.push_back(windows[i]);
    }
  }
  return out;
}

SpectralStats spectral_stats(const Spectrum& s, double band_lo_hz, double band_hi_hz) {
  SpectralStats st;
  std::vector<std::size_t> band;
  for (std::size_t k = 0; k < s.freq.size(); ++k) {
    if (s.freq[k] >= band_lo_hz && s.freq[k] <= band_hi_hz) band.push_back(k);
  }
  if (band.empty()) {
    st.degenerate = true;
    return st;
  }
  std::size_t peak = band.front();
  double total = 0.0;
  for (std::size_t k : band) {
    total += s.power[k];
    if (s.power[k] > s.power[peak]) peak = k;
  }
  const double mean = total / static_cast<double>(band.size());
  const double pmax = s.power[peak];
  if (!(pmax > kPowerFloor) || !(mean > 0.0)) {
    st.degenerate = true;
    return st;
  }
  st.peak_hz = s.freq[peak];
  st.prominence = pmax / mean;
  const double half = 0.5 * pmax;
  const std::size_t lo_k = band.front();
  const std::size_t hi_k = band.back();
  double left = s.freq[lo_k];
  for (std::size_t k = peak; k > lo_k; --k) {
    if (s.power[k - 1] < half) {
      const double t = (s.power[k] - half) / (s.power[k] - s.power[k - 1]);
      left = s.freq[k] - t * (s.freq[k] - s.freq[k - 1]);
      break;
    }
  }
  double right = s.freq[hi_k];
  for (std::size_t k = peak; k < hi_k; ++k) {
    if (s.power[k + 1] < half) {
      const double t = (s.power[k] - half) / (s.power[k] - s.power[k + 1]);
      right = s.freq[k] + t * (s.freq[k + 1] - s.freq[k]);
      break;
    }
  }
  st.half_bandwidth_hz = 0.5 * (right - left);
  return st;
}

SpectralStats psd_stats(const std::vector<double>& signal, double fs, const AnalysisOptions& opts) {
  if (static_cast<int>(signal.size()) < opts.min_window) {
    throw DataError("signal has " + std::to_string(signal.size()) + " samples, need " +
                    std::to_string(opts.min_window));
  }
  return spectral_stats(welch_psd(signal, fs, opts.welch), opts.band_lo_hz, opts.band_hi_hz);
}

SpectralStats psd_stats(const AnalysisWindow& window, int joint, const AnalysisOptions& opts) {
  check_window(window, opts.min_window);
  return psd_stats(channel(window, joint), window.motion.fps, opts);
}

SpectralStats psd_stats_group(const AnalysisWindow& window, const std::vector<int>& joints,
                              const AnalysisOptions& opts) {
  check_window(window, opts.min_window);
  if (joints.empty()) throw ConfigError("empty joint group");
  Spectrum mean;
  for (int j : joints) {
    const Spectrum s = welch_psd(channel(window, j), window.motion.fps, opts.welch);
    if (mean.freq.empty()) {
      mean = s;
    } else {
      for (std::size_t k = 0; k < s.power.size(); ++k) mean.power[k] += s.power[k];
    }
  }
  for (auto& p : mean.power) p /= static_cast<double>(joints.size());
  return spectral_stats(mean, opts.band_lo_hz, opts.band_hi_hz);
}

double plv(const std::vector<double>& a, const std::vector<double>& b, double fs, const AnalysisOptions& opts) {
  if (a.size() != b.size()) throw ShapeError("plv requires equal-length channels");
  if (static_cast<int>(a.size()) < opts.min_window) throw DataError("plv window too short");
  const auto za = bandpassed_analytic_signal(a, fs, opts.plv_lo_hz, opts.plv_hi_hz);
  const auto zb = bandpassed_analytic_signal(b, fs, opts.plv_lo_hz, opts.plv_hi_hz);
  std::complex<double> acc = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < za.size(); ++t) {
    const double ma = std::abs(za[t]);
    const double mb = std::abs(zb[t]);
    if (ma < 1e-300 || mb < 1e-300) continue;
    acc += (za[t] / ma) * std::conj(zb[t] / mb);
    ++n;
  }
  if (n == 0) return 0.0;
  return std::min(1.0, std::abs(acc) / static_cast<double>(n));
}

double plv(const AnalysisWindow& window, int joint_a, int joint_b, const AnalysisOptions& opts) {
  check_window(window, opts.min_window);
  return plv(channel(window, joint_a), channel(window, joint_b), window.motion.fps, opts);
}

R2Result oscillator_r2(const std::vector<std::vector<double>>& channels) {
  double sse = 0.0;
  double sst = 0.0;
  for (const auto& x : channels) {
    if (x.size() < 3) throw DataError("oscillator_r2 needs at least three frames");
    double mean = 0.0;
    for (std::size_t t = 2; t < x.size(); ++t) mean += x[t];
    mean /= static_cast<double>(x.size() - 2);
    for (std::size_t t = 2; t < x.size(); ++t) {
      const double e = x[t] - (2.0 * x[t - 1] - x[t - 2]);
      sse += e * e;
      sst += (x[t] - mean) * (x[t] - mean);
    }
  }
  R2Result r;
  if (!(sst > 0.0)) {
    r.degenerate = true;
    r.value = kNaN;
    return r;
  }
  r.value = 1.0 - sse / sst;
  return r;
}

R2Result oscillator_r2(const AnalysisWindow& window, const std::vector<int>& joints) {
  check_window(window, 3);
  std::vector<std::vector<double>> channels;
  for (int j : joints) {
    if (j < 0 || j >= window.motion.joints) throw ShapeError("joint index out of range");
    for (int c = 0; c < kRot6d; ++c) {
      std::vector<double> x(static_cast<std::size_t>(window.motion.length));
      for (int t = 0; t < window.motion.length; ++t) x[t] = window.motion.at(t, j, c);
      channels.push_back(std::move(x));
    }
  }
  return oscillator_r2(channels);
}

R2Result delta_r2(const AnalysisWindow& window, const std::vector<int>& small, const std::vector<int>& large) {
  const R2Result a = oscillator_r2(window, small);
  const R2Result b = oscillator_r2(window, large);
  R2Result r;
  r.degenerate = a.degenerate || b.degenerate;
  r.value = r.degenerate ? kNaN : b.value - a.value;
  return r;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

BootstrapResult hier_bootstrap(const std::vector<double>& values, const std::vector<AnalysisWindow>& windows,
                               int replicates, const Rng& rng) {
  return run_bootstrap(values, windows, replicates, rng, [](const Accum& a) { return a.pooled(); });
}

BootstrapResult hier_bootstrap(const WindowStat& stat, const std::vector<AnalysisWindow>& windows, int replicates,
                               const Rng& rng) {
  std::vector<double> values;
  values.reserve(windows.size());
  for (const auto& w : windows) values.push_back(stat(w));
  return hier_bootstrap(values, windows, replicates, rng);
}

BootstrapResult hier_bootstrap_class_diff(const std::vector<double>& values,
                                          const std::vector<AnalysisWindow>& windows, int replicates,
                                          const Rng& rng) {
  return run_bootstrap(values, windows, replicates, rng, [](const Accum& a) { return a.mean(1) - a.mean(0); });
}

AnalysisGroups AnalysisGroups::for_joints(int joints) {
  AnalysisGroups g;
  const auto roles = joint_roles(joints);
  for (int j = 0; j < joints; ++j) {
    switch (roles[j]) {
      case JointRole::shoulder:
        g.shoulders.push_back(j);
        g.arm_swing.push_back(j);
        break;
      case JointRole::elbow:
        g.elbows.push_back(j);
        g.arm_swing.push_back(j);
        break;
      case JointRole::wrist: g.arm_swing.push_back(j); break;
      default: break;
    }
    g.all_joints.push_back(j);
  }
  g.arm_core = arm_chain_joints(joints);
  return g;
}

std::string DatasetReport::to_json() const {
  nlohmann::json j;
  j["matched"] = matched;
  j["windows"] = {{"total", windows_total}, {"beat", windows_beat}, {"semantic", windows_semantic}};
  j["skipped_speakers"] = skipped_speakers;
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& s : summaries) {
    stats[s.name] = {{"beat", boot_json(s.beat)},
                     {"semantic", boot_json(s.semantic)},
                     {"semantic_minus_beat", boot_json(s.difference)}};
  }
  j["statistics"] = stats;
  j["delta_r2"] = {{"arm_core_vs_shoulder", boot_json(delta_r2_arm_core)},
                   {"all_joints_vs_shoulder", boot_json(delta_r2_all)}};
  j["direction_fractions"] = {{"half_bw_beat_narrower", frac_half_bw_beat_narrower},
                              {"plv_beat_lower", frac_plv_beat_lower},
                              {"delta_r2_arm_core_positive", frac_delta_r2_arm_core_positive},
                              {"delta_r2_all_negative", frac_delta_r2_all_negative}};
  nlohmann::json psd = nlohmann::json::array();
  for (std::size_t k = 0; k < mean_psd_beat.freq.size(); ++k) {
    psd.push_back({mean_psd_beat.freq[k], mean_psd_beat.power[k],
                   k < mean_psd_semantic.power.size() ? mean_psd_semantic.power[k] : 0.0});
  }
  j["normalised_psd_table"] = {{"columns", {"freq_hz", "beat", "semantic"}}, {"rows", psd}};
  return j.dump(2);
}

DatasetReport analyze_dataset(const std::vector<Clip>& clips, const AnalysisOptions& opts, const Rng& rng) {
  if (clips.empty()) throw DataError("no clips to analyze");
  std::vector<AnalysisWindow> all;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto w = segment_windows(clips[i].motion, static_cast<int>(i), opts.min_window);
    for (auto& x : w) all.push_back(std::move(x));
  }
  MatchedSample sample = matched_sample(all, rng.fork(1));
  DatasetReport rep;
  rep.skipped_speakers = sample.skipped_speakers;
  rep.matched = !sample.windows.empty();
  const auto& wins = rep.matched ? sample.windows : all;
  if (wins.empty()) throw DataError("no analysis windows of at least " + std::to_string(opts.min_window) + " frames");
  rep.windows_total = static_cast<int>(wins.size());
  for (const auto& w : wins) (w.cls == WindowClass::beat ? rep.windows_beat : rep.windows_semantic)++;

  const AnalysisGroups g = AnalysisGroups::for_joints(clips.front().motion.joints);
  const std::size_t n = wins.size();
  std::vector<double> peak(n), hbw(n), prom(n), plv_v(n), r2(n), d_core(n), d_all(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = wins[i];
    const SpectralStats st = psd_stats_group(w, g.arm_swing, opts);
    peak[i] = st.degenerate ? kNaN : st.peak_hz;
    hbw[i] = st.degenerate ? kNaN : st.half_bandwidth_hz;
    prom[i] = st.degenerate ? kNaN : st.prominence;
    double p = 0.0;
    const std::size_t pairs = std::min(g.shoulders.size(), g.elbows.size());
    for (std::size_t k = 0; k < pairs; ++k) p += plv(w, g.shoulders[k], g.elbows[k], opts);
    plv_v[i] = pairs == 0 ? kNaN : p / static_cast<double>(pairs);
    const R2Result r = oscillator_r2(w, g.shoulders);
    r2[i] = r.degenerate ? kNaN : r.value;
    const bool beat = w.cls == WindowClass::beat;
    const R2Result dc = delta_r2(w, g.shoulders, g.arm_core);
    const R2Result da = delta_r2(w, g.shoulders, g.all_joints);
    d_core[i] = beat && !dc.degenerate ? dc.value : kNaN;
    d_all[i] = beat && !da.degenerate ? da.value : kNaN;

    // Normalised group PSD for the decay table.
    Spectrum mean;
    for (int j : g.arm_swing) {
      const Spectrum s = welch_psd(channel(w, j), w.motion.fps, opts.welch);
      if (mean.freq.empty()) {
        mean = s;
      } else {
        for (std::size_t k = 0; k < s.power.size(); ++k) mean.power[k] += s.power[k];
      }
    }
    const double pmax = *std::max_element(mean.power.begin(), mean.power.end());
    Spectrum& dst = beat ? rep.mean_psd_beat : rep.mean_psd_semantic;
    if (dst.freq.empty()) {
      dst.freq = mean.freq;
      dst.power.assign(mean.power.size(), 0.0);
    }
    if (pmax > 0 && mean.power.size() == dst.power.size()) {
      for (std::size_t k = 0; k < mean.power.size(); ++k) dst.power[k] += mean.power[k] / pmax;
    }
  }
  for (auto& p : rep.mean_psd_beat.power) p /= std::max(1, rep.windows_beat);
  for (auto& p : rep.mean_psd_semantic.power) p /= std::max(1, rep.windows_semantic);

  const int B = opts.bootstrap_replicates;
  auto only = [&](const std::vector<double>& v, WindowClass c) {
    std::vector<double> out(v);
    for (std::size_t i = 0; i < n; ++i) {
      if (wins[i].cls != c) out[i] = kNaN;
    }
    return out;
  };
  std::uint64_t stream = 10;
  auto summarize = [&](const std::string& name, const std::vector<double>& v) {
    ClassSummary s;
    s.name = name;
    s.beat = hier_bootstrap(only(v, WindowClass::beat), wins, B, rng.fork(stream++));
    s.semantic = hier_bootstrap(only(v, WindowClass::semantic), wins, B, rng.fork(stream++));
    s.difference = hier_bootstrap_class_diff(v, wins, B, rng.fork(stream++));
    rep.summaries.push_back(std::move(s));
  };
  summarize("peak_hz", peak);
  summarize("half_bw_hz", hbw);
  summarize("prominence", prom);
  summarize("plv_shoulder_elbow", plv_v);
  summarize("oscillator_r2_shoulder", r2);
  rep.delta_r2_arm_core = hier_bootstrap(d_core, wins, B, rng.fork(stream++));
  rep.delta_r2_all = hier_bootstrap(d_all, wins, B, rng.fork(stream++));

  rep.frac_half_bw_beat_narrower = fraction(rep.summaries[1].difference.replicates, [](double d) { return d > 0; });
  rep.frac_plv_beat_lower = fraction(rep.summaries[3].difference.replicates, [](double d) { return d > 0; });
  rep.frac_delta_r2_arm_core_positive = fraction(rep.delta_r2_arm_core.replicates, [](double d) { return d > 0; });
  rep.frac_delta_r2_all_negative = fraction(rep.delta_r2_all.replicates, [](double d) { return d < 0; });
  return rep;
}

}  // namespace duogesture
