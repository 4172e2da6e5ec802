#pragma once

#include <vector>

#include "duogesture/autograd.hpp"

namespace duogesture {

/// Per-joint segment mass fractions (share of body mass moved by the joint) and the
/// arm-chain mask on which the inertial prior acts.
struct InertiaTable {
  static constexpr double kMaxMassFraction = 0.163;

  std::vector<double> mass_fraction;  // one per joint
  std::vector<bool> mask;             // shoulder, elbow, wrist and spine joints
  double m_max = kMaxMassFraction;

  int joints() const { return static_cast<int>(mass_fraction.size()); }
  std::vector<int> masked_joints() const;

  /// Table for the default joint layout of `joints` (SMPL-X for 55, desk otherwise).
  static InertiaTable for_joints(int joints);
};

/// tau(t, j) = tau_base * sqrt(m_j / m_max) * (1 - psi_t) * (1 + alpha * sigma2_t) on masked
/// joints, 0 elsewhere. Result is L x J. Throws DataError for negative sigma2, psi outside
/// [0, 1] or length mismatch.
ag::Matrix tau_weights(const InertiaTable& table, const std::vector<double>& psi,
                       const std::vector<double>& sigma2, double tau_base, double alpha);

/// Row t >= 2 holds 2 x[t-1] - x[t-2]; rows 0 and 1 copy x. Throws ShapeError for L < 3.
ag::Var const_velocity_pred(const ag::Var& x);

/// Mean over frames t >= 2 and masked joints of tau(t, j) * ||x[t, j] - pred[t, j]||^2,
/// where x and pred are L x (J * channels) and tau is L x J.
ag::Var acc_loss(const ag::Var& x, const ag::Var& pred, const ag::Matrix& tau, const std::vector<int>& masked_joints,
                 int channels = 6);

}  // namespace duogesture
