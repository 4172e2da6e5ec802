#pragma once

#include <string>
#include <vector>

#include "duogesture/types.hpp"

namespace duogesture {

struct ValidationOptions {
  /// Ground-truth data must carry orthonormal rot6d columns; generated output need not.
  bool require_orthonormal = false;
  double orthonormal_tolerance = 1e-3;
};

/// Every violated MotionSequence invariant, each naming the field and the offending
/// frame or joint. Empty iff the sequence is well formed.
std::vector<std::string> validate_sequence(const MotionSequence& seq,
                                           const ValidationOptions& options = {});

/// Violations of the region-partition invariant alone (exact cover of 0..J-1).
std::vector<std::string> validate_regions(const RegionMap& regions, int joints);

}  // namespace duogesture
