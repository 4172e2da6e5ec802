#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace duogesture {

/// Model, optimisation and regulariser hyperparameters.
///
/// Defaults are the full-scale values; ModelConfig::desk() shrinks widths, depths
/// and the codebook so training fits on a single CPU core.
struct ModelConfig {
  // Skeleton and input features.
  int joints = 55;
  int clip_length = 64;
  double fps = 30.0;
  int audio_dim = 1024;
  int word_dim = 300;
  int style_dim = 256;
  int num_speakers = 25;

  // Architecture.
  int hidden_dim = 768;
  int cond_dim = 256;  // latent width shared by MGSC, region latents and codebooks
  int timing_dim = 64;
  int bottleneck_dim = 16;
  int codebook_size = 256;
  int rvq_levels = 4;
  int latent_rate_body = 2;
  int latent_rate_face = 4;
  int heads = 4;
  int hidden_ff_dim = 1536;
  int cond_ff_dim = 512;
  int backbone_layers = 8;
  int face_layers = 4;
  int seed_encoder_layers = 3;

  // Stage-2 optimisation.
  double lr = 1e-4;
  double lr_decay = 0.3;
  int epochs = 200;
  int batch = 256;

  // Variational gate.
  double beta_target = 0.01;
  int kl_warmup_start = 20;
  int kl_warmup_end = 100;
  double free_bits = 0.5;
  double semantic_boost = 3.0;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  bool stochastic_eval = false;

  // Inertial prior.
  int phys_warmup_start = 30;
  int phys_warmup_end = 80;
  double beta_phys_target = 0.01;
  double tau_base = 0.5;
  double alpha_ibp = 1.0;

  // Stage-1 codec pretraining.
  int codec_steps = 2000;
  int codec_hidden_dim = 512;
  int codec_batch = 8;
  double codec_lr = 1e-3;
  double commitment_weight = 0.25;
  double ema_decay = 0.99;
  int dead_code_steps = 200;
  double quantizer_dropout = 0.5;

  std::uint64_t seed = 0;

  /// Desk-scale configuration (J = 12, narrow layers, K = 32).
  static ModelConfig desk();

  int latent_length_body() const { return clip_length / latent_rate_body; }
  int latent_length_face() const { return clip_length / latent_rate_face; }

  /// Human-readable list of violated constraints; empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ConfigError listing every violation.
  void validate() const;

  std::string to_json() const;
  /// Missing keys keep their default value; unknown keys are a ConfigError.
  static ModelConfig from_json(std::string_view text, const ModelConfig& base);
  static ModelConfig from_json(std::string_view text);
  static ModelConfig load(const std::string& path, const ModelConfig& base);
  static ModelConfig load(const std::string& path);

  /// Stable hash of the canonical JSON form.
  std::uint64_t hash() const;
};

}  // namespace duogesture
