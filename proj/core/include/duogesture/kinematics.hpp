#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "duogesture/types.hpp"

namespace duogesture {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Rodrigues rotation about a (normalised) axis.
Mat3 axis_angle(const Vec3& axis, double angle);

/// rot6d layout: first column of R, then second column.
std::array<double, 6> rot6d_from_matrix(const Mat3& r);
/// Gram-Schmidt reconstruction of a rotation from six values.
Mat3 matrix_from_rot6d(const float* r6);

/// Per-frame geodesic angular speed (rad/s) of one joint; entry 0 repeats entry 1.
std::vector<double> joint_angular_speed(const MotionSequence& seq, int joint);

/// Mean angular speed over a set of joints, per frame.
std::vector<double> mean_angular_speed(const MotionSequence& seq, const std::vector<int>& joints);

/// Scalar channel for one joint over frames [start, start + count): the mean-removed
/// rot6d trajectory projected on its first principal axis. For single-axis motion
/// this tracks the rotation angle, so frequency and phase are preserved.
std::vector<double> joint_principal_signal(const MotionSequence& seq, int joint, int start, int count);

}  // namespace duogesture
