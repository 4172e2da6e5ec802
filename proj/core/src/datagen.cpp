#include "duogesture/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "duogesture/archive.hpp"
#include "duogesture/errors.hpp"
#include "duogesture/kinematics.hpp"
#include "duogesture/regions.hpp"
#include "duogesture/rng.hpp"

namespace duogesture {
namespace fs = std::filesystem;
using nlohmann::json;

#define DUOGESTURE_SYNTH_FIELDS(X)                                                                \
  X(n_clips) X(n_speakers) X(semantic_fraction) X(beat_freq_hz) X(semantic_freq_hz)              \
  X(noise_level) X(rng_seed) X(clip_length) X(fps) X(joints) X(audio_dim) X(word_dim)            \
  X(style_dim) X(vocab_size) X(n_triggers) X(n_emotions)

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMinSegment = 15;
constexpr int kMaxSegment = 24;
constexpr int kSegmentGap = 2;
constexpr int kCrossfade = 3;
constexpr int kBaseSignals = 6;

std::uint64_t stream_id(std::string_view tag, std::uint64_t index) {
  return splitmix64_finalize(fnv1a64(tag.data(), tag.size()) ^ splitmix64_finalize(index + 1));
}

Rng tagged_rng(const SynthSpec& spec, std::string_view tag, std::uint64_t index) {
  return Rng(spec.rng_seed, stream_id(tag, index));
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  const double n = v.norm();
  return n > 1e-9 ? Vec3(v / n) : Vec3::UnitZ();
}

std::vector<float> gaussian_vector(Rng& rng, int dim, double scale) {
  std::vector<float> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

double noise_factor(JointRole role) {
  switch (role) {
    case JointRole::shoulder: return 2.0;
    case JointRole::elbow: return 0.6;
    case JointRole::wrist: return 0.6;
    case JointRole::spine: return 0.4;
    case JointRole::head: return 1.0;
    case JointRole::pelvis:
    case JointRole::leg: return 2.0;
    case JointRole::finger: return 5.0;
    case JointRole::face: return 2.0;
  }
  return 1.0;
}

/// Per-speaker skeleton and rhythm parameters.
struct SpeakerStyle {
  double amplitude = 1.0;
  double beat_freq = 1.12;
  std::vector<Mat3> rest;
  std::vector<Vec3> axis;
  std::vector<double> phase;  // lag relative to the shoulder
};

SpeakerStyle speaker_style(const SynthSpec& spec, int speaker, const std::vector<JointRole>& roles) {
  Rng rng = tagged_rng(spec, "speaker", static_cast<std::uint64_t>(speaker));
  SpeakerStyle s;
  s.amplitude = rng.uniform(0.85, 1.15);
  s.beat_freq = spec.beat_freq_hz * (1.0 + rng.uniform(-0.03, 0.03));
  const int J = static_cast<int>(roles.size());
  s.rest.resize(J);
  s.axis.resize(J);
  s.phase.resize(J);
  for (int j = 0; j < J; ++j) {
    s.rest[j] = axis_angle(random_unit(rng), rng.uniform(0.0, 0.3));
    s.axis[j] = random_unit(rng);
    double lag = 0.0;
    switch (roles[j]) {
      case JointRole::elbow: lag = -0.6; break;
      case JointRole::wrist: lag = -1.1; break;
      case JointRole::spine: lag = 0.3; break;
      case JointRole::head: lag = 0.4; break;
      default: break;
    }
    s.phase[j] = lag + rng.uniform(-0.2, 0.2);
  }
  return s;
}

/// Word-keyed semantic pose template, shared by all speakers.
struct PoseTemplate {
  double f1 = 1.69, p1 = 0.0, f2 = 2.7, p2 = 0.0;
  double bump_center = 0.5, bump_sign = 1.0;
  std::vector<double> gain;
  std::vector<double> offset;

  double shape(double tau, int length, double fps) const {
    const double c = bump_center * length;
    const double bump = std::exp(-(tau - c) * (tau - c) / (2.0 * 2.5 * 2.5));
    return std::sin(kTwoPi * f1 * tau / fps + p1) + 0.5 * std::sin(kTwoPi * f2 * tau / fps + p2) +
           0.8 * bump_sign * bump;
  }
};

PoseTemplate pose_template(const SynthSpec& spec, int word, const std::vector<JointRole>& roles) {
  Rng rng = tagged_rng(spec, "template", static_cast<std::uint64_t>(word));
  PoseTemplate t;
  t.f1 = spec.semantic_freq_hz * (1.0 + rng.uniform(-0.05, 0.05));
  t.p1 = rng.uniform(0.0, kTwoPi);
  t.f2 = std::min(rng.uniform(2.2, 3.2), 0.45 * spec.fps);
  t.p2 = rng.uniform(0.0, kTwoPi);
  t.bump_center = rng.uniform(0.3, 0.7);
  t.bump_sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  const int J = static_cast<int>(roles.size());
  t.gain.assign(J, 0.0);
  t.offset.assign(J, 0.0);
  for (int j = 0; j < J; ++j) {
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    switch (roles[j]) {
      case JointRole::shoulder:
      case JointRole::elbow:
      case JointRole::wrist:
        t.gain[j] = sign * rng.uniform(0.25, 0.5);
        t.offset[j] = rng.uniform(-0.3, 0.3);
        break;
      case JointRole::finger: t.gain[j] = sign * rng.uniform(0.2, 0.4); break;
      case JointRole::spine: t.gain[j] = sign * 0.08; break;
      case JointRole::head: t.gain[j] = sign * 0.05; break;
      default: break;
    }
  }
  return t;
}

struct Segment {
  int start = 0;
  int end = 0;
  int word = 0;
};

std::vector<Segment> place_segments(const SynthSpec& spec, int clip_index, Rng& rng) {
  std::vector<Segment> segs;
  if (spec.semantic_fraction <= 0.0) return segs;
  const double mean_len = 0.5 * (kMinSegment + kMaxSegment);
  const double expected = spec.semantic_fraction * spec.clip_length / mean_len;
  // Low-discrepancy rounding keeps the dataset-level count close to its expectation.
  const double offset = tagged_rng(spec, "count-offset", 0).uniform();
  const double golden = 0.6180339887498949;
  double frac_pos = (clip_index + 1) * golden + offset;
  frac_pos -= std::floor(frac_pos);
  int n = static_cast<int>(std::floor(expected)) + (frac_pos < expected - std::floor(expected) ? 1 : 0);

  std::vector<int> lengths;
  for (int i = 0; i < n; ++i) {
    lengths.push_back(kMinSegment + static_cast<int>(rng.index(kMaxSegment - kMinSegment + 1)));
  }
  const int first = kSeedFrames;
  auto slack_for = [&]() {
    int used = 0;
    for (int l : lengths) used += l;
    return spec.clip_length - first - used - kSegmentGap * (static_cast<int>(lengths.size()) - 1);
  };
  while (!lengths.empty() && slack_for() < 0) lengths.pop_back();
  if (lengths.empty()) return segs;

  const int slack = slack_for();
  const std::size_t k = lengths.size();
  std::vector<double> cuts(k);
  for (auto& c : cuts) c = rng.uniform();
  std::sort(cuts.begin(), cuts.end());
  int cursor = first;
  int consumed = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const int target = static_cast<int>(std::floor(cuts[i] * (slack + 1)));
    const int gap = std::clamp(target - consumed, 0, slack - consumed);
    consumed += gap;
    cursor += gap;
    Segment s;
    s.start = cursor;
    s.end = cursor + lengths[i];
    s.word = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_triggers)));
    segs.push_back(s);
    cursor = s.end + kSegmentGap;
  }
  return segs;
}

std::vector<WordSpan> place_words(const SynthSpec& spec, const std::vector<Segment>& segs, Rng& rng) {
  std::vector<WordSpan> spans;
  const int n_plain = spec.vocab_size - spec.n_triggers;
  auto fill = [&](int begin, int end) {
    int t = begin + static_cast<int>(rng.index(2));
    while (t + 2 <= end) {
      const int len = std::min(5 + static_cast<int>(rng.index(6)), end - t);
      const int word = spec.n_triggers + static_cast<int>(rng.index(static_cast<std::size_t>(n_plain)));
      spans.push_back({t, t + len, word});
      t += len + static_cast<int>(rng.index(3));
    }
  };
  int cursor = 0;
  for (const auto& s : segs) {
    fill(cursor, s.start);
    spans.push_back({s.start, s.end, s.word});
    cursor = s.end;
  }
  fill(cursor, spec.clip_length);
  return spans;
}

std::vector<std::vector<double>> base_signals(const SynthSpec& spec, const MotionSequence& seq) {
  const int L = seq.length;
  std::vector<std::vector<double>> b(kBaseSignals, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  const auto speed = mean_angular_speed(seq, arm_chain_joints(seq.joints));
  for (int t = 0; t < L; ++t) {
    const double prev = speed[std::max(0, t - 1)];
    const double next = speed[std::min(L - 1, t + 1)];
    b[0][t] = (0.25 * prev + 0.5 * speed[t] + 0.25 * next) / 2.0;
  }
  for (int t = 1; t < L; ++t) b[1][t] = 3.0 * (b[0][t] - b[0][t - 1]);
  for (const auto& w : seq.word_spans) {
    for (int t = 0; t < L; ++t) {
      const double d = t - w.start;
      b[2][t] += std::exp(-d * d / (2.0 * 1.5 * 1.5));
    }
    if (w.word_id < spec.n_triggers) {
      for (int t = w.start; t < w.end; ++t) b[3][t] = 1.0;
    }
  }
  std::uint64_t h = fnv1a64(seq.frames.data(), seq.frames.size() * sizeof(float));
  Rng rng(spec.rng_seed, stream_id("audio-noise", h ^ static_cast<std::uint64_t>(seq.speaker_id)));
  for (int c = 4; c < kBaseSignals; ++c) {
    double state = 0.0;
    for (int t = 0; t < L; ++t) {
      state = 0.9 * state + 0.3 * rng.normal();
      b[c][t] = state;
    }
  }
  return b;
}

}  // namespace

SynthSpec SynthSpec::matching(const ModelConfig& cfg) {
  SynthSpec s;
  s.joints = cfg.joints;
  s.clip_length = cfg.clip_length;
  s.fps = cfg.fps;
  s.audio_dim = cfg.audio_dim;
  s.word_dim = cfg.word_dim;
  s.style_dim = cfg.style_dim;
  s.n_speakers = std::min(s.n_speakers, cfg.num_speakers);
  return s;
}

std::vector<std::string> SynthSpec::violations() const {
  std::vector<std::string> out;
  if (n_clips <= 0) out.push_back("n_clips must be positive");
  if (n_speakers <= 0) out.push_back("n_speakers must be positive");
  if (!(semantic_fraction >= 0.0 && semantic_fraction < 1.0)) out.push_back("semantic_fraction must lie in [0,1)");
  if (!(fps > 0)) out.push_back("fps must be positive");
  if (!(beat_freq_hz > 0 && beat_freq_hz < fps / 2)) out.push_back("beat_freq_hz must lie in (0, fps/2)");
  if (!(semantic_freq_hz > 0 && semantic_freq_hz < fps / 2))
    out.push_back("semantic_freq_hz must lie in (0, fps/2)");
  if (!(noise_level >= 0)) out.push_back("noise_level must be non-negative");
  if (clip_length < 2 * kMaxSegment) out.push_back("clip_length must be at least 48");
  if (joints < kMinJoints) out.push_back("joints must be >= 12");
  if (audio_dim <= 0 || word_dim <= 0 || style_dim <= 0) out.push_back("feature dims must be positive");
  if (n_triggers <= 0 || vocab_size <= n_triggers) out.push_back("need 0 < n_triggers < vocab_size");
  if (n_emotions <= 0) out.push_back("n_emotions must be positive");
  return out;
}

void SynthSpec::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid synth spec:";
  for (const auto& s : v) msg += "\n  " + s;
  throw ConfigError(msg);
}

std::string SynthSpec::to_json() const {
  json j;
#define X(name) j[#name] = name;
  DUOGESTURE_SYNTH_FIELDS(X)
#undef X
  return j.dump(2);
}

SynthSpec SynthSpec::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  SynthSpec s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    try {
#define X(name)                \
  if (it.key() == #name) {     \
    it.value().get_to(s.name); \
    known = true;              \
  }
      DUOGESTURE_SYNTH_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
      throw ConfigError("synth spec field '" + it.key() + "' has the wrong type: " + e.what());
    }
    if (!known) throw ConfigError("unknown synth spec field '" + it.key() + "'");
  }
  s.validate();
  return s;
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

SyntheticFeatureProvider::SyntheticFeatureProvider(const SynthSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng wr = tagged_rng(spec_, "words", 0);
  for (int w = 0; w < spec_.vocab_size; ++w) words_.push_back(gaussian_vector(wr, spec_.word_dim, 1.0));
  Rng sr = tagged_rng(spec_, "speaker-style", 0);
  for (int s = 0; s < spec_.n_speakers; ++s) speakers_.push_back(gaussian_vector(sr, spec_.style_dim, 1.0));
  Rng er = tagged_rng(spec_, "emotion-style", 0);
  for (int e = 0; e < spec_.n_emotions; ++e) emotions_.push_back(gaussian_vector(er, spec_.style_dim, 1.0));
  Rng pr = tagged_rng(spec_, "audio-projection", 0);
  projection_.resize(static_cast<std::size_t>(kBaseSignals) * spec_.audio_dim);
  for (auto& p : projection_) p = pr.normal() / std::sqrt(static_cast<double>(kBaseSignals));
}

const std::vector<float>& SyntheticFeatureProvider::word_embedding(int word_id) const {
  if (word_id < 0 || word_id >= static_cast<int>(words_.size())) throw DataError("word id out of range");
  return words_[static_cast<std::size_t>(word_id)];
}

FeatureBundle SyntheticFeatureProvider::provide(const MotionSequence& seq) const {
  if (seq.speaker_id < 0 || seq.speaker_id >= spec_.n_speakers) {
    throw DataError("speaker id " + std::to_string(seq.speaker_id) + " outside the synthetic speaker table");
  }
  if (seq.emotion_id < 0 || seq.emotion_id >= spec_.n_emotions) {
    throw DataError("emotion id " + std::to_string(seq.emotion_id) + " outside the synthetic emotion table");
  }
  if (seq.length < kSeedFrames) throw DataError("sequence shorter than the seed window");
  FeatureBundle f;
  const int L = seq.length;
  f.length = L;
  f.joints = seq.joints;
  f.audio_dim = spec_.audio_dim;
  f.word_dim = spec_.word_dim;
  f.style_dim = spec_.style_dim;
  f.speaker_id = seq.speaker_id;

  const auto base = base_signals(spec_, seq);
  Rng nr(spec_.rng_seed, stream_id("audio-white", fnv1a64(seq.frames.data(), seq.frames.size() * sizeof(float))));
  f.e_a.resize(static_cast<std::size_t>(L) * spec_.audio_dim);
  for (int t = 0; t < L; ++t) {
    for (int d = 0; d < spec_.audio_dim; ++d) {
      double v = 0.05 * nr.normal();
      for (int c = 0; c < kBaseSignals; ++c) v += base[c][t] * projection_[static_cast<std::size_t>(c) * spec_.audio_dim + d];
      f.e_a[static_cast<std::size_t>(t) * spec_.audio_dim + d] = static_cast<float>(v);
    }
  }

  f.e_s.assign(static_cast<std::size_t>(L) * spec_.word_dim, 0.0f);
  for (const auto& w : seq.word_spans) {
    const auto& emb = word_embedding(w.word_id);
    for (int t = std::max(0, w.start); t < std::min(L, w.end); ++t) {
      std::copy(emb.begin(), emb.end(), f.e_s.begin() + static_cast<std::ptrdiff_t>(t) * spec_.word_dim);
    }
  }
  f.e_m = speakers_[static_cast<std::size_t>(seq.speaker_id)];
  f.e_eps = emotions_[static_cast<std::size_t>(seq.emotion_id)];
  f.seed_pose.assign(seq.frames.begin(),
                     seq.frames.begin() + static_cast<std::ptrdiff_t>(kSeedFrames) * seq.joints * kRot6d);
  return f;
}

Clip synth_clip(const SynthSpec& spec, int clip_index) {
  return synth_clip(spec, clip_index, SyntheticFeatureProvider(spec));
}

Clip synth_clip(const SynthSpec& spec, int clip_index, const FeatureProvider& provider) {
  spec.validate();
  if (clip_index < 0) throw ConfigError("clip index must be non-negative");
  const int L = spec.clip_length;
  const int J = spec.joints;
  const double fps = spec.fps;
  const auto roles = joint_roles(J);

  Rng rng = tagged_rng(spec, "clip", static_cast<std::uint64_t>(clip_index));
  const int speaker = clip_index % spec.n_speakers;
  const SpeakerStyle style = speaker_style(spec, speaker, roles);

  MotionSequence seq;
  seq.length = L;
  seq.joints = J;
  seq.fps = fps;
  seq.regions = default_region_partition(J);
  seq.speaker_id = speaker;
  seq.emotion_id = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_emotions)));

  Rng seg_rng = rng.fork(1);
  const auto segments = place_segments(spec, clip_index, seg_rng);
  Rng word_rng = rng.fork(2);
  seq.word_spans = place_words(spec, segments, word_rng);
  seq.semantic_flags.assign(static_cast<std::size_t>(L), 0);
  for (const auto& s : segments) {
    for (int t = s.start; t < s.end; ++t) seq.semantic_flags[t] = 1;
  }

  // Beat motion: damped re-excited swing with per-joint phase drift.
  Rng beat_rng = rng.fork(3);
  const double phase0 = beat_rng.uniform(0.0, kTwoPi);
  const double omega = kTwoPi * style.beat_freq / fps;  // rad per frame
  const double period = fps / style.beat_freq;
  std::vector<double> core_walk(L, 0.0);
  for (int t = 1; t < L; ++t) core_walk[t] = core_walk[t - 1] + beat_rng.normal(0.0, 0.05);
  std::vector<std::vector<double>> walk(J, std::vector<double>(L, 0.0));
  for (int j = 0; j < J; ++j) {
    const bool arm = roles[j] == JointRole::shoulder || roles[j] == JointRole::elbow || roles[j] == JointRole::wrist;
    double w = 0.0;
    for (int t = 0; t < L; ++t) {
      if (t > 0 && arm) w += beat_rng.normal(0.0, 0.15);
      walk[j][t] = core_walk[t] + w;
    }
  }
  const auto wrists = joints_with_role(J, JointRole::wrist);
  const auto fingers = joints_with_role(J, JointRole::finger);
  std::vector<double> lower_phase(J);
  for (auto& p : lower_phase) p = beat_rng.uniform(0.0, kTwoPi);

  std::vector<std::vector<double>> theta(J, std::vector<double>(L, 0.0));
  for (int t = 0; t < L; ++t) {
    const double phi = omega * t + phase0;
    double since = std::fmod(phi, kTwoPi) / kTwoPi * period;
    const double env = 0.7 + 0.3 * std::exp(-since / (0.35 * period));
    for (int j = 0; j < J; ++j) {
      double a = 0.0;
      switch (roles[j]) {
        case JointRole::shoulder: a = 0.35; break;
        case JointRole::elbow: a = 0.45; break;
        case JointRole::wrist: a = 0.30; break;
        case JointRole::spine: a = 0.12; break;
        case JointRole::head: a = 0.06; break;
        default: break;
      }
      double v = 0.0;
      if (roles[j] == JointRole::pelvis || roles[j] == JointRole::leg) {
        v = 0.03 * std::sin(kTwoPi * 0.25 * t / fps + lower_phase[j]);
      } else if (roles[j] == JointRole::face) {
        v = 0.08 * env * std::sin(2.0 * phi + lower_phase[j]);
      } else if (roles[j] != JointRole::finger) {
        v = style.amplitude * a * env * std::sin(phi + style.phase[j] + walk[j][t]);
      }
      theta[j][t] = v;
    }
    for (std::size_t k = 0; k < fingers.size() && !wrists.empty(); ++k) {
      const std::size_t side = std::min(wrists.size() - 1, k * 2 / std::max<std::size_t>(1, fingers.size()));
      theta[fingers[k]][t] = 0.5 * theta[wrists[side]][t];
    }
  }

  // Semantic strokes: word-keyed templates shared across joints, crossfaded in.
  for (const auto& s : segments) {
    const PoseTemplate tpl = pose_template(spec, s.word, roles);
    const int len = s.end - s.start;
    for (int t = s.start; t < s.end; ++t) {
      const double h = std::min({1.0, (t - s.start + 1) / static_cast<double>(kCrossfade),
                                 (s.end - t) / static_cast<double>(kCrossfade)});
      const double g = tpl.shape(t - s.start, len, fps);
      for (int j = 0; j < J; ++j) {
        const double sem = style.amplitude * (tpl.gain[j] * g + tpl.offset[j]);
        theta[j][t] = (1.0 - h) * theta[j][t] + h * sem;
      }
    }
  }

  Rng noise_rng = rng.fork(4);
  seq.frames.resize(static_cast<std::size_t>(L) * J * kRot6d);
  for (int t = 0; t < L; ++t) {
    for (int j = 0; j < J; ++j) {
      const double angle = theta[j][t] + noise_rng.normal(0.0, spec.noise_level * noise_factor(roles[j]));
      const Mat3 r = style.rest[j] * axis_angle(style.axis[j], angle);
      const auto r6 = rot6d_from_matrix(r);
      for (int c = 0; c < kRot6d; ++c) seq.at(t, j, c) = static_cast<float>(r6[c]);
    }
  }

  Clip clip;
  clip.motion = std::move(seq);
  clip.features = provider.provide(clip.motion);

  // Onsets at the shoulder swing extremes of the nominal beat.
  const auto shoulders = joints_with_role(J, JointRole::shoulder);
  const double lag = shoulders.empty() ? 0.0 : style.phase[shoulders.front()];
  const double duration = L / fps;
  const double first = (std::numbers::pi / 2.0 - phase0 - lag) / (kTwoPi * style.beat_freq);
  const double beat_s = 1.0 / style.beat_freq;
  double t0 = first - std::floor(first / beat_s) * beat_s;
  for (double t = t0; t < duration; t += beat_s) clip.audio_onsets.push_back(t);
  return clip;
}

std::vector<Clip> synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const SyntheticFeatureProvider provider(spec);
  std::vector<Clip> clips;
  clips.reserve(static_cast<std::size_t>(spec.n_clips));
  for (int i = 0; i < spec.n_clips; ++i) clips.push_back(synth_clip(spec, i, provider));
  return clips;
}

void write_dataset(const SynthSpec& spec, const fs::path& dir) {
  spec.validate();
  fs::create_directories(dir);
  const SyntheticFeatureProvider provider(spec);
  json names = json::array();
  for (int i = 0; i < spec.n_clips; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%05d", i);
    write_archive(synth_clip(spec, i, provider), dir / name);
    names.push_back(name);
  }
  json j;
  j["format"] = "duogesture-dataset";
  j["version"] = 1;
  j["spec"] = json::parse(spec.to_json());
  j["clips"] = names;
  std::ofstream out(dir / "dataset.json");
  if (!out) throw DataError("cannot write " + (dir / "dataset.json").string());
  out << j.dump(2) << "\n";
}

double semantic_frame_fraction(const std::vector<Clip>& clips) {
  std::size_t flagged = 0;
  std::size_t total = 0;
  for (const auto& c : clips) {
    for (int f : c.motion.semantic_flags) flagged += f == 1 ? 1 : 0;
    total += c.motion.semantic_flags.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
}

}  // namespace duogesture
