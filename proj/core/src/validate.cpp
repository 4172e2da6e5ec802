#include "duogesture/validate.hpp"

#include <algorithm>
#include <cmath>

namespace duogesture {

std::vector<std::string> validate_regions(const RegionMap& regions, int joints) {
  std::vector<std::string> out;
  std::vector<int> owner(std::max(joints, 0), -1);
  for (Region r : kAllRegions) {
    for (int j : regions[static_cast<int>(r)]) {
      if (j < 0 || j >= joints) {
        out.push_back("region " + std::string(region_name(r)) + ": joint " + std::to_string(j) +
                      " out of range");
        continue;
      }
      if (owner[j] >= 0) {
        out.push_back("region overlap: joint " + std::to_string(j));
      } else {
        owner[j] = static_cast<int>(r);
      }
    }
  }
  for (int j = 0; j < joints; ++j) {
    if (owner[j] < 0) out.push_back("region gap: joint " + std::to_string(j));
  }
  return out;
}

std::vector<std::string> validate_sequence(const MotionSequence& seq,
                                           const ValidationOptions& options) {
  std::vector<std::string> out;
  if (seq.length <= 0) out.push_back("length: must be positive");
  if (seq.joints <= 0) out.push_back("joints: must be positive");
  if (!(seq.fps > 0)) out.push_back("fps: must be positive");

  auto region_issues = validate_regions(seq.regions, seq.joints);
  out.insert(out.end(), region_issues.begin(), region_issues.end());

  const std::size_t expected =
      static_cast<std::size_t>(std::max(seq.length, 0)) * std::max(seq.joints, 0) * kRot6d;
  if (seq.frames.size() != expected) {
    out.push_back("frames: size " + std::to_string(seq.frames.size()) + " != L*J*6 = " +
                  std::to_string(expected));
  } else {
    for (int t = 0; t < seq.length; ++t) {
      for (int j = 0; j < seq.joints; ++j) {
        bool finite = true;
        for (int c = 0; c < kRot6d; ++c) finite = finite && std::isfinite(seq.at(t, j, c));
        if (!finite) {
          out.push_back("frames: non-finite rot6d at frame " + std::to_string(t) + " joint " +
                        std::to_string(j));
          continue;
        }
        if (!options.require_orthonormal) continue;
        double n0 = 0, n1 = 0, dot = 0;
        for (int c = 0; c < 3; ++c) {
          const double a = seq.at(t, j, c);
          const double b = seq.at(t, j, c + 3);
          n0 += a * a;
          n1 += b * b;
          dot += a * b;
        }
        const double tol = options.orthonormal_tolerance;
        if (std::abs(n0 - 1) > tol || std::abs(n1 - 1) > tol || std::abs(dot) > tol) {
          out.push_back("frames: non-orthonormal rot6d at frame " + std::to_string(t) +
                        " joint " + std::to_string(j));
        }
      }
    }
  }

  if (static_cast<int>(seq.semantic_flags.size()) != seq.length) {
    out.push_back("semantic_flags: size " + std::to_string(seq.semantic_flags.size()) +
                  " != length " + std::to_string(seq.length));
  }
  for (std::size_t t = 0; t < seq.semantic_flags.size(); ++t) {
    const int f = seq.semantic_flags[t];
    if (f != 0 && f != 1) {
      out.push_back("semantic_flags: value " + std::to_string(f) + " at frame " +
                    std::to_string(t) + " not in {0,1}");
    }
  }

  auto spans = seq.word_spans;
  std::sort(spans.begin(), spans.end(),
            [](const WordSpan& a, const WordSpan& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start < 0 || s.end > seq.length || s.start >= s.end) {
      out.push_back("word_spans: span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                    ") outside [0," + std::to_string(seq.length) + ")");
    }
    if (i > 0 && spans[i - 1].end > s.start) {
      out.push_back("word_spans: overlap at frame " + std::to_string(s.start));
    }
  }
  return out;
}

}  // namespace duogesture
