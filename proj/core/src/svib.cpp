#include "duogesture/svib.hpp"

#include <cmath>
#include <string>

#include "duogesture/errors.hpp"

namespace duogesture {

namespace {

constexpr double kPsiClamp = 1e-6;

void require_cols(const ag::Var& v, int cols, const char* what) {
  if (v.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                     std::to_string(v.cols()));
  }
}

}  // namespace

std::vector<double> GateTrace::sigma2() const {
  std::vector<double> out(static_cast<std::size_t>(logvar.rows()));
  for (Eigen::Index t = 0; t < logvar.rows(); ++t) out[t] = logvar.row(t).array().exp().mean();
  return out;
}

GateTrace SvibOutput::trace() const {
  GateTrace g;
  g.mu = mu.value();
  g.logvar = logvar.value();
  g.eps = eps;
  g.z = z.value();
  g.timing = timing.value();
  g.psi.assign(psi.value().data(), psi.value().data() + psi.rows());
  return g;
}

Svib::Svib(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : audio_dim(cfg.audio_dim),
      cond_dim(cfg.cond_dim),
      timing_dim(cfg.timing_dim),
      bottleneck_dim(cfg.bottleneck_dim),
      logvar_min(cfg.logvar_min),
      logvar_max(cfg.logvar_max),
      audio_conv1(store, "svib.audio_conv1", cfg.audio_dim, cfg.cond_dim, rng),
      audio_conv2(store, "svib.audio_conv2", cfg.cond_dim, cfg.cond_dim, rng),
      timing_linear(store, "svib.timing", cfg.cond_dim, cfg.timing_dim, rng),
      timing_norm(store, "svib.timing_norm", cfg.timing_dim),
      mu_head(store, "svib.mu", cfg.cond_dim + cfg.timing_dim, cfg.bottleneck_dim, rng),
      logvar_head(store, "svib.logvar", cfg.cond_dim + cfg.timing_dim, cfg.bottleneck_dim, rng),
      interpreter(store, "svib.interpreter", cfg.bottleneck_dim, cfg.bottleneck_dim, 2, rng) {}

ag::Var Svib::audio_encoder(const ag::Var& audio) const {
  require_cols(audio, audio_dim, "audio features");
  if (!audio.value().allFinite()) throw NumericError("audio features contain non-finite values");
  return ag::gelu(audio_conv2(ag::gelu(audio_conv1(audio))));
}

ag::Var Svib::timing_projection(const ag::Var& audio) const {
  return ag::gelu(timing_norm(timing_linear(audio_encoder(audio))));
}

std::pair<ag::Var, ag::Var> Svib::bottleneck(const ag::Var& s_m, const ag::Var& timing) const {
  require_cols(s_m, cond_dim, "bottleneck semantic feature");
  require_cols(timing, timing_dim, "bottleneck timing");
  if (s_m.rows() != timing.rows()) throw ShapeError("bottleneck: frame count mismatch");
  const ag::Var h = ag::concat_cols({s_m, timing});
  return {mu_head(h), ag::clamp(logvar_head(h), logvar_min, logvar_max)};
}

ag::Var Svib::gate_logits(const ag::Var& z) const {
  require_cols(z, bottleneck_dim, "gate latent");
  return interpreter(z);
}

ag::Var Svib::gate(const ag::Var& z) const { return ag::slice_cols(ag::softmax_rows(gate_logits(z)), 1, 1); }

SvibOutput Svib::operator()(const ag::Var& s_m, const ag::Var& audio, Rng* rng) const {
  SvibOutput out;
  out.timing = timing_projection(audio);
  std::tie(out.mu, out.logvar) = bottleneck(s_m, out.timing);
  out.z = sample(out.mu, out.logvar, rng, &out.eps);
  out.logits = gate_logits(out.z);
  out.psi = ag::slice_cols(ag::softmax_rows(out.logits), 1, 1);
  return out;
}

ag::Matrix standard_normal(int rows, int cols, Rng& rng) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

ag::Var sample(const ag::Var& mu, const ag::Var& logvar, const ag::Matrix& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || eps.rows() != mu.rows() ||
      eps.cols() != mu.cols()) {
    throw ShapeError("sample: mu, logvar and eps shapes differ");
  }
  return ag::add(mu, ag::mul(ag::exp(ag::scale(logvar, 0.5)), ag::constant(eps)));
}

ag::Var sample(const ag::Var& mu, const ag::Var& logvar, Rng* rng, ag::Matrix* eps_out) {
  ag::Matrix eps = rng ? standard_normal(static_cast<int>(mu.rows()), static_cast<int>(mu.cols()), *rng)
                       : ag::Matrix::Zero(mu.rows(), mu.cols());
  if (eps_out) *eps_out = eps;
  if (!rng) return mu;
  return sample(mu, logvar, eps);
}

KlResult kl_free_bits(const ag::Var& mu, const ag::Var& logvar, double free_bits) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw ShapeError("kl: mu/logvar shape mismatch");
  const ag::Var elem = ag::scale(ag::add_scalar(ag::sub(ag::add(ag::square(mu), ag::exp(logvar)), logvar), -1.0), 0.5);
  const ag::Var per_dim = ag::mean_rows(elem);
  KlResult r;
  r.per_dim.assign(per_dim.value().data(), per_dim.value().data() + per_dim.cols());
  r.loss = ag::sum(ag::floor_at(per_dim, free_bits));
  return r;
}

ag::Var semantic_loss(const ag::Var& psi, const std::vector<int>& flags, double boost) {
  if (psi.cols() != 1 || psi.rows() != static_cast<Eigen::Index>(flags.size())) {
    throw ShapeError("semantic_loss: psi must be L x 1 with one flag per frame");
  }
  ag::Matrix pos(psi.rows(), 1), neg(psi.rows(), 1);
  for (std::size_t t = 0; t < flags.size(); ++t) {
    if (flags[t] != 0 && flags[t] != 1) throw DataError("semantic_loss: flags must be 0 or 1");
    pos(static_cast<Eigen::Index>(t), 0) = boost * flags[t];
    neg(static_cast<Eigen::Index>(t), 0) = 1.0 - flags[t];
  }
  const ag::Var p = ag::clamp(psi, kPsiClamp, 1.0 - kPsiClamp);
  const ag::Var ll = ag::add(ag::mul(ag::constant(pos), ag::log(p)),
                             ag::mul(ag::constant(neg), ag::log(ag::add_scalar(ag::neg(p), 1.0))));
  return ag::neg(ag::mean(ll));
}

}  // namespace duogesture
