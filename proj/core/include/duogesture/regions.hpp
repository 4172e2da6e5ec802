#pragma once

#include <vector>

#include "duogesture/types.hpp"

namespace duogesture {

inline constexpr int kMinJoints = 12;
inline constexpr int kSmplxJoints = 55;

/// Kinematic role of a joint; drives synthetic motion, inertia weights and analysis groups.
enum class JointRole {
  pelvis,
  leg,
  spine,
  head,  // neck, collars, head: upper-body joints outside the arm chain
  shoulder,
  elbow,
  wrist,
  finger,
  face,
};

/// Deterministic four-region partition.
///
/// J == 55 follows the SMPL-X layout (face = jaw and eyes, hand = finger joints,
/// lower = pelvis and legs, upper = spine, neck, head, collars and arms). Any other
/// J >= 12 uses the desk layout: the first round(J/6) joints form the lower body,
/// the last round(J/3) joints are wrists followed by fingers, everything between is
/// upper body (two spine joints, then left/right shoulder, left/right elbow, then
/// extra spine joints), and the face region is empty. Throws ConfigError for J < 12.
RegionMap default_region_partition(int joints);

/// Role of every joint under default_region_partition(joints).
std::vector<JointRole> joint_roles(int joints);

/// Joints in the shoulder/elbow/wrist/spine chain.
std::vector<int> arm_chain_joints(int joints);

/// Joints with the given role, ascending.
std::vector<int> joints_with_role(int joints, JointRole role);

}  // namespace duogesture
