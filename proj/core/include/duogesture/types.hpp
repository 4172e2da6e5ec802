#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace duogesture {

inline constexpr int kRot6d = 6;
inline constexpr int kSeedFrames = 4;

enum class Region : int { hand = 0, upper = 1, lower = 2, face = 3 };

inline constexpr std::array<Region, 4> kAllRegions = {Region::hand, Region::upper, Region::lower,
                                                      Region::face};
/// Body regions driven by the dual-stream blender (face has its own decoder).
inline constexpr std::array<Region, 3> kBodyRegions = {Region::hand, Region::upper, Region::lower};

std::string_view region_name(Region r);
Region region_from_name(std::string_view name);

/// Joint indices per region, indexed by static_cast<int>(Region).
using RegionMap = std::array<std::vector<int>, 4>;

/// Word alignment: frames [start, end) carry word_id.
struct WordSpan {
  int start = 0;
  int end = 0;
  int word_id = 0;

  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

/// Per-frame rot6d joint rotations plus annotations.
struct MotionSequence {
  int length = 0;
  int joints = 0;
  double fps = 30.0;
  std::vector<float> frames;  // length x joints x 6, row-major
  RegionMap regions;
  std::vector<int> semantic_flags;  // one per frame; valid values are 0 and 1
  int speaker_id = 0;
  int emotion_id = 0;
  std::vector<WordSpan> word_spans;

  float at(int t, int j, int c) const {
    return frames[(static_cast<std::size_t>(t) * joints + j) * kRot6d + c];
  }
  float& at(int t, int j, int c) {
    return frames[(static_cast<std::size_t>(t) * joints + j) * kRot6d + c];
  }

  friend bool operator==(const MotionSequence&, const MotionSequence&) = default;
};

/// Conditioning features for one clip.
struct FeatureBundle {
  int length = 0;
  int joints = 0;
  int audio_dim = 0;
  int word_dim = 0;
  int style_dim = 0;
  std::vector<float> e_a;        // length x audio_dim
  std::vector<float> e_s;        // length x word_dim
  std::vector<float> e_m;        // style_dim
  std::vector<float> e_eps;      // style_dim
  int speaker_id = 0;
  std::vector<float> seed_pose;  // kSeedFrames x joints x 6

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

/// A clip together with its conditioning features and audio onset times.
struct Clip {
  MotionSequence motion;
  FeatureBundle features;
  std::vector<double> audio_onsets;  // seconds

  friend bool operator==(const Clip&, const Clip&) = default;
};

}  // namespace duogesture
