#include "duogesture/nn.hpp"

#include <cmath>
#include <numbers>

#include "duogesture/errors.hpp"

namespace duogesture::nn {

Var ParamStore::create(const std::string& name, Matrix init, bool trainable) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  Var v(std::move(init), trainable);
  params_.push_back({name, v, trainable});
  return v;
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void ParamStore::freeze() {
  for (auto& p : params_) {
    p.trainable = false;
    p.var.set_requires_grad(false);
    p.var.zero_grad();
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    const auto& m = p.var.value();
    h = fnv1a64(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
  }
  return h;
}

void ParamStore::append_to(NamedArrays& bundle, const std::string& prefix) const {
  for (const auto& p : params_) {
    const auto& m = p.var.value();
    std::vector<double> values(m.data(), m.data() + m.size());
    bundle.arrays.emplace_back(
        prefix + p.name,
        NdArray::from_f64({static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                          std::move(values)));
  }
}

void ParamStore::load_from(const NamedArrays& bundle, const std::string& prefix) {
  for (auto& p : params_) {
    const NdArray& arr = bundle.at(prefix + p.name);
    auto& m = p.var.mutable_value();
    if (arr.dtype() != DType::f64 || arr.shape.size() != 2 ||
        arr.shape[0] != static_cast<std::uint32_t>(m.rows()) ||
        arr.shape[1] != static_cast<std::uint32_t>(m.cols())) {
      throw ManifestMismatchError("checkpoint parameter " + prefix + p.name + " has the wrong shape");
    }
    m = Eigen::Map<const Matrix>(arr.f64().data(), m.rows(), m.cols());
  }
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool trainable) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = store.create(name + ".weight", uniform_matrix(in, out, bound, rng), trainable);
  bias = store.create(name + ".bias", Matrix::Zero(1, out), trainable);
}

Var Linear::operator()(const Var& x) const { return ag::add(ag::matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim, bool trainable) {
  gamma = store.create(name + ".gamma", Matrix::Ones(1, dim), trainable);
  beta = store.create(name + ".beta", Matrix::Zero(1, dim), trainable);
}

Var LayerNorm::operator()(const Var& x) const {
  return ag::add(ag::mul(ag::layer_norm_rows(x), gamma), beta);
}

Mlp::Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out, Rng& rng,
         bool trainable)
    : first(store, name + ".fc1", in, hidden, rng, trainable),
      second(store, name + ".fc2", hidden, out, rng, trainable) {}

Var Mlp::operator()(const Var& x) const { return second(ag::gelu(first(x))); }

Conv3::Conv3(ParamStore& store, const std::string& name, int in, int out, Rng& rng)
    : proj(store, name, 3 * in, out, rng) {}

Var Conv3::operator()(const Var& x, Eigen::Index block) const {
  return proj(ag::concat_cols({ag::shift_rows(x, 1, block), x, ag::shift_rows(x, -1, block)}));
}

Downsample::Downsample(ParamStore& store, const std::string& name, int dim, int rate_, Rng& rng,
                       bool trainable)
    : rate(rate_), proj(store, name, dim * rate_, dim, rng, trainable) {}

Var Downsample::operator()(const Var& x) const {
  if (x.rows() % rate != 0) {
    throw ShapeError("downsample: length " + std::to_string(x.rows()) + " not divisible by " +
                     std::to_string(rate));
  }
  return proj(ag::reshape(x, x.rows() / rate, x.cols() * rate));
}

Upsample::Upsample(ParamStore& store, const std::string& name, int dim, int rate_, Rng& rng,
                   bool trainable)
    : rate(rate_), proj(store, name, dim, dim * rate_, rng, trainable) {}

Var Upsample::operator()(const Var& x) const {
  Var y = proj(x);
  return ag::reshape(y, x.rows() * rate, x.cols());
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, int dim,
                                       int heads_, Rng& rng)
    : heads(heads_),
      q(store, name + ".q", dim, dim, rng),
      k(store, name + ".k", dim, dim, rng),
      v(store, name + ".v", dim, dim, rng),
      o(store, name + ".o", dim, dim, rng) {
  if (dim % heads != 0) throw ConfigError(name + ": dim not divisible by heads");
}

Var MultiHeadAttention::operator()(const Var& query, const Var& memory) const {
  const Var qq = q(query);
  const Var kk = k(memory);
  const Var vv = v(memory);
  const auto dim = qq.cols();
  const auto head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  if (heads == 1) {
    const Var attn = ag::softmax_rows(ag::scale(ag::matmul_nt(qq, kk), inv_sqrt));
    return o(ag::matmul(attn, vv));
  }
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(qq, h * head_dim, head_dim);
    const Var kh = ag::slice_cols(kk, h * head_dim, head_dim);
    const Var vh = ag::slice_cols(vv, h * head_dim, head_dim);
    const Var attn = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt));
    outs.push_back(ag::matmul(attn, vh));
  }
  return o(ag::concat_cols(outs));
}

TransformerLayer::TransformerLayer(ParamStore& store, const std::string& name, int dim, int heads,
                                   int ff_dim, bool self_attention, bool cross_attention, Rng& rng)
    : has_self(self_attention), has_cross(cross_attention) {
  if (has_self) {
    norm_self = LayerNorm(store, name + ".norm_self", dim);
    self_attn = MultiHeadAttention(store, name + ".self_attn", dim, heads, rng);
  }
  if (has_cross) {
    norm_cross = LayerNorm(store, name + ".norm_cross", dim);
    cross_attn = MultiHeadAttention(store, name + ".cross_attn", dim, heads, rng);
  }
  norm_ff = LayerNorm(store, name + ".norm_ff", dim);
  ff = Mlp(store, name + ".ff", dim, ff_dim, dim, rng);
}

Var TransformerLayer::operator()(const Var& x_in, const Var& memory) const {
  Var x = x_in;
  if (has_self) {
    const Var h = norm_self(x);
    x = ag::add(x, self_attn(h, h));
  }
  if (has_cross) {
    if (!memory.defined()) throw ShapeError("cross-attention layer called without memory");
    x = ag::add(x, cross_attn(norm_cross(x), memory));
  }
  return ag::add(x, ff(norm_ff(x)));
}

Matrix periodic_positional_encoding(int length, int dim) {
  Matrix pe(length, dim);
  for (int t = 0; t < length; ++t) {
    for (int c = 0; c < dim; ++c) {
      const int harmonic = c / 2 + 1;
      const double angle = 2.0 * std::numbers::pi * harmonic * t / length;
      pe(t, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Adam::Adam(ParamStore& store, AdamOptions options) : store_(&store), options_(options) {
  for (const auto& p : store.params()) {
    m_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

void Adam::step(double grad_scale) {
  auto& params = store_->params();
  if (params.size() != m_.size()) throw ConfigError("parameter store changed after Adam construction");
  ++t_;
  double clip = 1.0;
  if (options_.clip_norm > 0) {
    double sq = 0;
    for (const auto& p : params) {
      if (p.trainable && p.var.grad().size() != 0) sq += (p.var.grad() * grad_scale).squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable || p.var.grad().size() == 0) continue;
    const Matrix g = p.var.grad() * (grad_scale * clip);
    m_[i] = options_.beta1 * m_[i] + (1 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1 - options_.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = m_[i] / bc1;
    const Matrix v_hat = v_[i] / bc2;
    p.var.mutable_value().array() -=
        options_.lr * m_hat.array() / (v_hat.array().sqrt() + options_.eps);
  }
  store_->zero_grad();
}

}  // namespace duogesture::nn
