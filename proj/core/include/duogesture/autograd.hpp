#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

namespace duogesture::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient arrives
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  void accumulate(const Matrix& g);
};

/// Handle to a node in a dynamically built expression graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  /// Direct access for optimisers and codebook updates; never call on graph interior nodes.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var constant(double value);
Var zeros(Eigen::Index rows, Eigen::Index cols);

/// Reverse sweep from a scalar (1x1) root; gradients accumulate into leaves.
void backward(const Var& root);

/// While alive, new operations record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Arithmetic. Binary ops broadcast a dimension of size 1 (row vectors, column
// vectors and 1x1 scalars) against the other operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var matmul(const Var& a, const Var& b);
/// a * b^T without materialising the transpose in the graph.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

// Elementwise functions.
Var relu(const Var& a);
Var gelu(const Var& a);  // tanh approximation
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
/// Clamp to [lo, hi]; gradient is zero where the clamp is active.
Var clamp(const Var& a, double lo, double hi);
/// max(a, floor) elementwise; gradient flows only where a > floor.
Var floor_at(const Var& a, double floor);

// Row-wise normalisations.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// (x - mean) / sqrt(var + eps) per row, no affine parameters.
Var layer_norm_rows(const Var& a, double eps = 1e-5);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_rows(const Var& a);   // 1 x cols
Var mean_rows(const Var& a);  // 1 x cols
Var sum_cols(const Var& a);   // rows x 1
Var mean_cols(const Var& a);  // rows x 1

// Structural.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// Row-major reshape (same element order).
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
/// out[t] = a[t - k], zero where t - k leaves the block of `block` rows containing t
/// (block <= 0 means one block spanning all rows).
Var shift_rows(const Var& a, Eigen::Index k, Eigen::Index block = 0);
Var repeat_rows(const Var& row, Eigen::Index n);
Var gather_rows(const Var& table, const std::vector<int>& index);
/// out[i] = a(i, index[i]) as a column.
Var pick(const Var& a, const std::vector<int>& index);
/// Blocks the gradient (value copy, treated as constant).
Var detach(const Var& a);

}  // namespace duogesture::ag
