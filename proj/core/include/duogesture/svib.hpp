#pragma once

#include <vector>

#include "duogesture/config.hpp"
#include "duogesture/nn.hpp"

namespace duogesture {

/// Per-frame posterior and gate values of one forward pass.
struct GateTrace {
  ag::Matrix mu;      // L x Z
  ag::Matrix logvar;  // L x Z, clamped
  ag::Matrix eps;     // L x Z noise used for z (all zero in deterministic mode)
  ag::Matrix z;       // mu + exp(logvar / 2) * eps
  ag::Matrix timing;  // L x timing_dim
  std::vector<double> psi;

  /// Mean posterior variance per frame.
  std::vector<double> sigma2() const;
};

struct SvibOutput {
  ag::Var timing;  // L x timing_dim
  ag::Var mu;
  ag::Var logvar;
  ag::Matrix eps;
  ag::Var z;
  ag::Var logits;  // L x 2: (beat, semantic)
  ag::Var psi;     // L x 1 semantic probability

  GateTrace trace() const;
};

/// Variational gate: audio timing projection, Gaussian bottleneck over
/// [semantic feature; timing], and a two-class interpreter of the sampled latent.
class Svib {
 public:
  Svib() = default;
  Svib(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

  /// Two kernel-3 convolutions with GELU: L x audio_dim -> L x cond_dim.
  ag::Var audio_encoder(const ag::Var& audio) const;
  /// audio_encoder followed by Linear + LayerNorm + GELU: L x timing_dim.
  ag::Var timing_projection(const ag::Var& audio) const;
  /// (mu, logvar) with logvar clamped to [logvar_min, logvar_max].
  std::pair<ag::Var, ag::Var> bottleneck(const ag::Var& s_m, const ag::Var& timing) const;
  ag::Var gate_logits(const ag::Var& z) const;
  /// L x 1 semantic-class probability.
  ag::Var gate(const ag::Var& z) const;

  /// Full gate pass. A null rng selects deterministic mode (z = mu).
  SvibOutput operator()(const ag::Var& s_m, const ag::Var& audio, Rng* rng) const;

  int audio_dim = 0;
  int cond_dim = 0;
  int timing_dim = 0;
  int bottleneck_dim = 0;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  nn::Conv3 audio_conv1;
  nn::Conv3 audio_conv2;
  nn::Linear timing_linear;
  nn::LayerNorm timing_norm;
  nn::Linear mu_head;
  nn::Linear logvar_head;
  nn::Mlp interpreter;
};

/// L x Z standard normal draws.
ag::Matrix standard_normal(int rows, int cols, Rng& rng);

/// mu + exp(logvar / 2) * eps.
ag::Var sample(const ag::Var& mu, const ag::Var& logvar, const ag::Matrix& eps);
/// Draws eps from rng, or uses eps = 0 when rng is null.
ag::Var sample(const ag::Var& mu, const ag::Var& logvar, Rng* rng, ag::Matrix* eps_out = nullptr);

struct KlResult {
  ag::Var loss;              // sum over dims of max(kl_d, free_bits)
  std::vector<double> per_dim;  // kl_d averaged over frames, before the floor
};

/// Gaussian KL to N(0, I) averaged over frames per dimension, floored per dimension.
/// Dimensions below the floor contribute a constant and receive no gradient.
KlResult kl_free_bits(const ag::Var& mu, const ag::Var& logvar, double free_bits);

/// Positive-weighted binary cross-entropy of psi (L x 1) against flags, mean over frames,
/// psi clamped to [1e-6, 1 - 1e-6].
ag::Var semantic_loss(const ag::Var& psi, const std::vector<int>& flags, double boost);

}  // namespace duogesture
