#include "duogesture/regions.hpp"

#include <cmath>
#include <string>

#include "duogesture/errors.hpp"

namespace duogesture {
namespace {

void check_joint_count(int joints) {
  if (joints < kMinJoints) {
    throw ConfigError("joint count " + std::to_string(joints) + " is below the minimum of " +
                      std::to_string(kMinJoints));
  }
}

int desk_lower_count(int joints) { return static_cast<int>(std::lround(joints / 6.0)); }
int desk_hand_count(int joints) { return static_cast<int>(std::lround(joints / 3.0)); }

std::vector<JointRole> smplx_roles() {
  std::vector<JointRole> roles(kSmplxJoints, JointRole::finger);
  for (int j : {0}) roles[j] = JointRole::pelvis;
  for (int j : {1, 2, 4, 5, 7, 8, 10, 11}) roles[j] = JointRole::leg;
  for (int j : {3, 6, 9}) roles[j] = JointRole::spine;
  for (int j : {12, 13, 14, 15}) roles[j] = JointRole::head;
  for (int j : {16, 17}) roles[j] = JointRole::shoulder;
  for (int j : {18, 19}) roles[j] = JointRole::elbow;
  for (int j : {20, 21}) roles[j] = JointRole::wrist;
  for (int j : {22, 23, 24}) roles[j] = JointRole::face;
  return roles;
}

std::vector<JointRole> desk_roles(int joints) {
  const int n_lower = desk_lower_count(joints);
  const int n_hand = desk_hand_count(joints);
  std::vector<JointRole> roles(joints, JointRole::spine);
  for (int j = 0; j < n_lower; ++j) roles[j] = j == 0 ? JointRole::pelvis : JointRole::leg;

  const int upper_begin = n_lower;
  const int upper_end = joints - n_hand;
  const JointRole upper_pattern[] = {JointRole::spine, JointRole::spine, JointRole::shoulder,
                                     JointRole::shoulder, JointRole::elbow, JointRole::elbow};
  for (int j = upper_begin; j < upper_end; ++j) {
    const int k = j - upper_begin;
    roles[j] = k < 6 ? upper_pattern[k] : JointRole::spine;
  }
  for (int j = upper_end; j < joints; ++j) {
    roles[j] = j - upper_end < 2 ? JointRole::wrist : JointRole::finger;
  }
  return roles;
}

}  // namespace

RegionMap default_region_partition(int joints) {
  check_joint_count(joints);
  RegionMap map;
  auto& hand = map[static_cast<int>(Region::hand)];
  auto& upper = map[static_cast<int>(Region::upper)];
  auto& lower = map[static_cast<int>(Region::lower)];
  auto& face = map[static_cast<int>(Region::face)];

  if (joints == kSmplxJoints) {
    const auto roles = smplx_roles();
    for (int j = 0; j < kSmplxJoints; ++j) {
      switch (roles[j]) {
        case JointRole::pelvis:
        case JointRole::leg:
          lower.push_back(j);
          break;
        case JointRole::face:
          face.push_back(j);
          break;
        case JointRole::finger:
          hand.push_back(j);
          break;
        default:
          upper.push_back(j);
      }
    }
    return map;
  }

  const int n_lower = desk_lower_count(joints);
  const int n_hand = desk_hand_count(joints);
  for (int j = 0; j < joints; ++j) {
    if (j < n_lower) {
      lower.push_back(j);
    } else if (j >= joints - n_hand) {
      hand.push_back(j);
    } else {
      upper.push_back(j);
    }
  }
  return map;
}

std::vector<JointRole> joint_roles(int joints) {
  check_joint_count(joints);
  return joints == kSmplxJoints ? smplx_roles() : desk_roles(joints);
}

std::vector<int> arm_chain_joints(int joints) {
  std::vector<int> out;
  const auto roles = joint_roles(joints);
  for (int j = 0; j < joints; ++j) {
    switch (roles[j]) {
      case JointRole::spine:
      case JointRole::shoulder:
      case JointRole::elbow:
      case JointRole::wrist:
        out.push_back(j);
        break;
      default:
        break;
    }
  }
  return out;
}

std::vector<int> joints_with_role(int joints, JointRole role) {
  std::vector<int> out;
  const auto roles = joint_roles(joints);
  for (int j = 0; j < joints; ++j) {
    if (roles[j] == role) out.push_back(j);
  }
  return out;
}

}  // namespace duogesture
