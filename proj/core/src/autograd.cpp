#include "duogesture/autograd.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "duogesture/errors.hpp"

namespace duogesture::ag {
namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;
using Backward = std::function<void(Node&)>;

Var make(Matrix value, std::vector<Var> inputs, Backward backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(node);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return Var(node);
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.node());
  node->backward = std::move(backward);
  return Var(node);
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, const char* op, const Matrix& x,
                           const Matrix& y) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(x) + " with " + shape_str(y));
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = Matrix(out.colwise().sum());
  if (cols == 1 && out.cols() != 1) out = Matrix(out.rowwise().sum());
  return out;
}

template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Matrix v = a.value().unaryExpr(f);
  return make(std::move(v), {a}, [dfdx](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix d = x.value.binaryExpr(n.value, dfdx);
    x.accumulate(n.grad.cwiseProduct(d));
  });
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() on a " + shape_str(value()) + " tensor");
  return value()(0, 0);
}

Var constant(Matrix value) { return Var(std::move(value), false); }
Var constant(double value) { return Var(Matrix::Constant(1, 1, value), false); }
Var zeros(Eigen::Index rows, Eigen::Index cols) { return Var(Matrix::Zero(rows, cols), false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward() needs a scalar root");
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  const auto& x = a.value();
  const auto& y = b.value();
  const auto r = broadcast_dim(x.rows(), y.rows(), "add", x, y);
  const auto c = broadcast_dim(x.cols(), y.cols(), "add", x, y);
  Matrix v = expand(x, r, c) + expand(y, r, c);
  return make(std::move(v), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& t = in(n, i);
      if (t.requires_grad) t.accumulate(reduce_to(n.grad, t.value.rows(), t.value.cols()));
    }
  });
}

Var sub(const Var& a, const Var& b) {
  const auto& x = a.value();
  const auto& y = b.value();
  const auto r = broadcast_dim(x.rows(), y.rows(), "sub", x, y);
  const auto c = broadcast_dim(x.cols(), y.cols(), "sub", x, y);
  Matrix v = expand(x, r, c) - expand(y, r, c);
  return make(std::move(v), {a, b}, [](Node& n) {
    Node& t0 = in(n, 0);
    Node& t1 = in(n, 1);
    if (t0.requires_grad) t0.accumulate(reduce_to(n.grad, t0.value.rows(), t0.value.cols()));
    if (t1.requires_grad) t1.accumulate(reduce_to(-n.grad, t1.value.rows(), t1.value.cols()));
  });
}

Var mul(const Var& a, const Var& b) {
  const auto& x = a.value();
  const auto& y = b.value();
  const auto r = broadcast_dim(x.rows(), y.rows(), "mul", x, y);
  const auto c = broadcast_dim(x.cols(), y.cols(), "mul", x, y);
  Matrix v = expand(x, r, c).cwiseProduct(expand(y, r, c));
  return make(std::move(v), {a, b}, [](Node& n) {
    Node& t0 = in(n, 0);
    Node& t1 = in(n, 1);
    const auto r = n.value.rows();
    const auto c = n.value.cols();
    if (t0.requires_grad) {
      t0.accumulate(reduce_to(n.grad.cwiseProduct(expand(t1.value, r, c)), t0.value.rows(), t0.value.cols()));
    }
    if (t1.requires_grad) {
      t1.accumulate(reduce_to(n.grad.cwiseProduct(expand(t0.value, r, c)), t1.value.rows(), t1.value.cols()));
    }
  });
}

Var div(const Var& a, const Var& b) {
  const auto& x = a.value();
  const auto& y = b.value();
  const auto r = broadcast_dim(x.rows(), y.rows(), "div", x, y);
  const auto c = broadcast_dim(x.cols(), y.cols(), "div", x, y);
  Matrix v = expand(x, r, c).cwiseQuotient(expand(y, r, c));
  return make(std::move(v), {a, b}, [](Node& n) {
    Node& t0 = in(n, 0);
    Node& t1 = in(n, 1);
    const auto r = n.value.rows();
    const auto c = n.value.cols();
    const Matrix yb = expand(t1.value, r, c);
    if (t0.requires_grad) {
      t0.accumulate(reduce_to(n.grad.cwiseQuotient(yb), t0.value.rows(), t0.value.cols()));
    }
    if (t1.requires_grad) {
      Matrix g = -n.grad.cwiseProduct(n.value).cwiseQuotient(yb);
      t1.accumulate(reduce_to(g, t1.value.rows(), t1.value.cols()));
    }
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Matrix v = a.value().array() + s;
  return make(std::move(v), {a}, [](Node& n) { in(n, 0).accumulate(n.grad); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " x " + shape_str(b.value()));
  }
  Matrix v = a.value() * b.value();
  return make(std::move(v), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a.value()) + " x " + shape_str(b.value()) + "^T");
  }
  Matrix v = a.value() * b.value().transpose();
  return make(std::move(v), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value);
    if (y.requires_grad) y.accumulate(n.grad.transpose() * x.value);
  });
}

Var transpose(const Var& a) {
  Matrix v = a.value().transpose();
  return make(std::move(v), {a}, [](Node& n) { in(n, 0).accumulate(n.grad.transpose()); });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + c * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(k * (x + c * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * c * x * x);
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var floor_at(const Var& a, double floor) {
  return unary(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var softmax_rows(const Var& a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  return make(std::move(v), {a}, [](Node& n) {
    const Matrix& y = n.value;
    Matrix gy = n.grad.cwiseProduct(y);
    Eigen::VectorXd s = gy.rowwise().sum();
    Matrix d = gy - (y.array().colwise() * s.array()).matrix();
    in(n, 0).accumulate(d);
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    const double lse = m + std::log((v.row(i).array() - m).exp().sum());
    v.row(i).array() -= lse;
  }
  return make(std::move(v), {a}, [](Node& n) {
    Matrix p = n.value.array().exp();
    Eigen::VectorXd s = n.grad.rowwise().sum();
    Matrix d = n.grad - (p.array().colwise() * s.array()).matrix();
    in(n, 0).accumulate(d);
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const auto cols = static_cast<double>(x.cols());
  Eigen::VectorXd inv_std(x.rows());
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / cols;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = (x.row(i).array() - mu) * inv_std(i);
  }
  return make(std::move(y), {a}, [inv_std, cols](Node& n) {
    const Matrix& y = n.value;
    const Matrix& g = n.grad;
    Matrix d(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double gm = g.row(i).mean();
      const double gy = g.row(i).dot(y.row(i)) / cols;
      d.row(i) = inv_std(i) * (g.row(i).array() - gm - y.row(i).array() * gy);
    }
    in(n, 0).accumulate(d);
  });
}

Var sum(const Var& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / count);
}

Var sum_rows(const Var& a) {
  Matrix v = a.value().colwise().sum();
  return make(std::move(v), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(n.grad.replicate(x.value.rows(), 1));
  });
}

Var mean_rows(const Var& a) { return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows())); }

Var sum_cols(const Var& a) {
  Matrix v = a.value().rowwise().sum();
  return make(std::move(v), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(n.grad.replicate(1, x.value.cols()));
  });
}

Var mean_cols(const Var& a) { return scale(sum_cols(a), 1.0 / static_cast<double>(a.cols())); }

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make(std::move(v), parts, [](Node& n) {
    Eigen::Index at = 0;
    for (auto& p : n.inputs) {
      const auto c = p->value.cols();
      if (p->requires_grad) p->accumulate(n.grad.middleCols(at, c));
      at += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make(std::move(v), parts, [](Node& n) {
    Eigen::Index at = 0;
    for (auto& p : n.inputs) {
      const auto r = p->value.rows();
      if (p->requires_grad) p->accumulate(n.grad.middleRows(at, r));
      at += r;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols out of range");
  Matrix v = a.value().middleCols(start, count);
  return make(std::move(v), {a}, [start, count](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(start, count) = n.grad;
    x.accumulate(g);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows out of range");
  Matrix v = a.value().middleRows(start, count);
  return make(std::move(v), {a}, [start, count](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleRows(start, count) = n.grad;
    x.accumulate(g);
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("reshape " + shape_str(a.value()) + " to " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make(std::move(v), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate(Eigen::Map<const Matrix>(n.grad.data(), x.value.rows(), x.value.cols()));
  });
}

Var shift_rows(const Var& a, Eigen::Index k, Eigen::Index block) {
  const auto rows = a.rows();
  if (block <= 0) block = rows;
  if (rows % block != 0) throw ShapeError("shift_rows: rows not a multiple of the block length");
  const Eigen::Index lo = std::max<Eigen::Index>(0, k);
  const Eigen::Index hi = std::min<Eigen::Index>(block, block + k);
  Matrix v = Matrix::Zero(rows, a.cols());
  if (hi > lo) {
    for (Eigen::Index b = 0; b < rows; b += block) {
      v.middleRows(b + lo, hi - lo) = a.value().middleRows(b + lo - k, hi - lo);
    }
  }
  return make(std::move(v), {a}, [k, lo, hi, block](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    if (hi > lo) {
      for (Eigen::Index b = 0; b < g.rows(); b += block) {
        g.middleRows(b + lo - k, hi - lo) = n.grad.middleRows(b + lo, hi - lo);
      }
    }
    x.accumulate(g);
  });
}

Var repeat_rows(const Var& row, Eigen::Index count) {
  if (row.rows() != 1) throw ShapeError("repeat_rows expects a single row");
  Matrix v = row.value().replicate(count, 1);
  return make(std::move(v), {row}, [](Node& n) { in(n, 0).accumulate(n.grad.colwise().sum()); });
}

Var gather_rows(const Var& table, const std::vector<int>& index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), table.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= table.rows()) throw ShapeError("gather_rows index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(index[i]);
  }
  return make(std::move(v), {table}, [index](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    x.accumulate(g);
  });
}

Var pick(const Var& a, const std::vector<int>& index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ShapeError("pick: one index per row");
  Matrix v(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const int k = index[static_cast<std::size_t>(i)];
    if (k < 0 || k >= a.cols()) throw ShapeError("pick: index out of range");
    v(i, 0) = a.value()(i, k);
  }
  return make(std::move(v), {a}, [index](Node& n) {
    Node& x = in(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, index[static_cast<std::size_t>(i)]) = n.grad(i, 0);
    x.accumulate(g);
  });
}

Var detach(const Var& a) { return constant(a.value()); }

}  // namespace duogesture::ag
