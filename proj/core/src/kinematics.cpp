#include "duogesture/kinematics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "duogesture/errors.hpp"

namespace duogesture {

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

std::array<double, 6> rot6d_from_matrix(const Mat3& r) {
  return {r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1)};
}

Mat3 matrix_from_rot6d(const float* r6) {
  Vec3 a(r6[0], r6[1], r6[2]);
  Vec3 b(r6[3], r6[4], r6[5]);
  const double na = a.norm();
  Vec3 x = na > 1e-12 ? Vec3(a / na) : Vec3::UnitX();
  Vec3 y = b - x.dot(b) * x;
  const double ny = y.norm();
  if (ny > 1e-12) {
    y /= ny;
  } else {
    y = x.unitOrthogonal();
  }
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = x.cross(y);
  return r;
}

std::vector<double> joint_angular_speed(const MotionSequence& seq, int joint) {
  if (joint < 0 || joint >= seq.joints) throw ShapeError("joint index out of range");
  std::vector<double> speed(static_cast<std::size_t>(seq.length), 0.0);
  if (seq.length < 2) return speed;
  Mat3 prev = matrix_from_rot6d(&seq.frames[static_cast<std::size_t>(joint) * kRot6d]);
  for (int t = 1; t < seq.length; ++t) {
    const Mat3 cur =
        matrix_from_rot6d(&seq.frames[(static_cast<std::size_t>(t) * seq.joints + joint) * kRot6d]);
    const double c = std::clamp(((prev.transpose() * cur).trace() - 1.0) / 2.0, -1.0, 1.0);
    speed[t] = std::acos(c) * seq.fps;
    prev = cur;
  }
  speed[0] = speed[1];
  return speed;
}

std::vector<double> mean_angular_speed(const MotionSequence& seq, const std::vector<int>& joints) {
  std::vector<double> out(static_cast<std::size_t>(seq.length), 0.0);
  if (joints.empty()) return out;
  for (int j : joints) {
    const auto s = joint_angular_speed(seq, j);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += s[t];
  }
  for (auto& v : out) v /= static_cast<double>(joints.size());
  return out;
}

std::vector<double> joint_principal_signal(const MotionSequence& seq, int joint, int start, int count) {
  if (joint < 0 || joint >= seq.joints) throw ShapeError("joint index out of range");
  if (start < 0 || count <= 0 || start + count > seq.length) throw ShapeError("window out of range");
  Eigen::MatrixXd x(count, kRot6d);
  for (int t = 0; t < count; ++t) {
    for (int c = 0; c < kRot6d; ++c) x(t, c) = seq.at(start + t, joint, c);
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd axis = eig.eigenvectors().col(kRot6d - 1);
  // Fix the sign so the largest-magnitude component is positive.
  Eigen::Index imax = 0;
  axis.cwiseAbs().maxCoeff(&imax);
  if (axis(imax) < 0) axis = -axis;
  const Eigen::VectorXd proj = x * axis;
  return std::vector<double>(proj.data(), proj.data() + proj.size());
}

}  // namespace duogesture
