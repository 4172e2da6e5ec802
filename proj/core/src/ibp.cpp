#include "duogesture/ibp.hpp"

#include <cmath>
#include <string>

#include "duogesture/errors.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {

namespace {

// Segment mass fractions of total body mass, keyed by the segment a joint rotates.
constexpr double kAbdomen = InertiaTable::kMaxMassFraction;
constexpr double kThoraxHalf = 0.0798;
constexpr double kUpperArm = 0.0271;
constexpr double kForearm = 0.0162;
constexpr double kHand = 0.0061;

double smplx_fraction(int joint, JointRole role) {
  switch (role) {
    case JointRole::spine:
      return joint == 3 ? kAbdomen : kThoraxHalf;
    case JointRole::shoulder:
      return kUpperArm;
    case JointRole::elbow:
      return kForearm;
    case JointRole::wrist:
      return kHand;
    default:
      return 0.0;
  }
}

}  // namespace

std::vector<int> InertiaTable::masked_joints() const {
  std::vector<int> out;
  for (int j = 0; j < joints(); ++j) {
    if (mask[j]) out.push_back(j);
  }
  return out;
}

InertiaTable InertiaTable::for_joints(int joints) {
  const auto roles = joint_roles(joints);
  InertiaTable t;
  t.mass_fraction.assign(joints, 0.0);
  t.mask.assign(joints, false);
  bool first_spine = true;
  for (int j = 0; j < joints; ++j) {
    double m = 0.0;
    if (joints == kSmplxJoints) {
      m = smplx_fraction(j, roles[j]);
    } else {
      switch (roles[j]) {
        case JointRole::spine:
          m = first_spine ? kAbdomen : kThoraxHalf;
          first_spine = false;
          break;
        case JointRole::shoulder:
          m = kUpperArm;
          break;
        case JointRole::elbow:
          m = kForearm;
          break;
        case JointRole::wrist:
          m = kHand;
          break;
        default:
          break;
      }
    }
    t.mass_fraction[j] = m;
    t.mask[j] = m > 0.0;
  }
  return t;
}

ag::Matrix tau_weights(const InertiaTable& table, const std::vector<double>& psi, const std::vector<double>& sigma2,
                       double tau_base, double alpha) {
  if (psi.size() != sigma2.size()) throw DataError("tau_weights: psi and sigma2 lengths differ");
  const int len = static_cast<int>(psi.size());
  const int joints = table.joints();
  ag::Matrix tau = ag::Matrix::Zero(len, joints);
  for (int t = 0; t < len; ++t) {
    if (!(sigma2[t] >= 0.0)) throw DataError("tau_weights: negative sigma2 at frame " + std::to_string(t));
    if (!(psi[t] >= 0.0 && psi[t] <= 1.0)) throw DataError("tau_weights: psi outside [0, 1] at frame " + std::to_string(t));
    const double frame = (1.0 - psi[t]) * (1.0 + alpha * sigma2[t]);
    for (int j = 0; j < joints; ++j) {
      if (!table.mask[j]) continue;
      tau(t, j) = tau_base * std::sqrt(table.mass_fraction[j] / table.m_max) * frame;
    }
  }
  return tau;
}

ag::Var const_velocity_pred(const ag::Var& x) {
  const auto len = x.rows();
  if (len < 3) throw ShapeError("const_velocity_pred needs at least 3 frames");
  const ag::Var head = ag::slice_rows(x, 0, 2);
  const ag::Var prev = ag::slice_rows(x, 1, len - 2);
  const ag::Var prev2 = ag::slice_rows(x, 0, len - 2);
  return ag::concat_rows({head, ag::sub(ag::scale(prev, 2.0), prev2)});
}

ag::Var acc_loss(const ag::Var& x, const ag::Var& pred, const ag::Matrix& tau, const std::vector<int>& masked_joints,
                 int channels) {
  const auto len = x.rows();
  if (pred.rows() != len || pred.cols() != x.cols()) throw ShapeError("acc_loss: x and prediction shapes differ");
  if (tau.rows() != len || tau.cols() * channels != x.cols()) throw ShapeError("acc_loss: tau shape mismatch");
  if (len < 3) throw ShapeError("acc_loss needs at least 3 frames");
  if (masked_joints.empty()) return ag::constant(0.0);
  // Per-element weights: tau(t, j) repeated over the joint's channels, zero for t < 2.
  ag::Matrix w = ag::Matrix::Zero(len, x.cols());
  for (Eigen::Index t = 2; t < len; ++t) {
    for (int j : masked_joints) {
      if (j < 0 || j >= tau.cols()) throw ShapeError("acc_loss: masked joint out of range");
      w.block(t, static_cast<Eigen::Index>(j) * channels, 1, channels).setConstant(tau(t, j));
    }
  }
  const double terms = static_cast<double>(len - 2) * static_cast<double>(masked_joints.size());
  return ag::scale(ag::sum(ag::mul(ag::constant(w), ag::square(ag::sub(x, pred)))), 1.0 / terms);
}

}  // namespace duogesture
