#pragma once

#include <array>
#include <vector>

#include "duogesture/config.hpp"
#include "duogesture/nn.hpp"
#include "duogesture/rvq.hpp"

namespace duogesture {

/// Latents for hand, upper and lower body, in kBodyRegions order.
using BodyLatents = std::array<ag::Var, 3>;

/// Frozen seed-pose encoder: a GELU stack mapping each seed frame (J * 6) to hidden_dim.
class SeedEncoder {
 public:
  SeedEncoder() = default;
  SeedEncoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

  /// kSeedFrames x (J * 6) -> kSeedFrames x hidden_dim.
  ag::Var operator()(const ag::Var& seed_pose) const;

  int input_dim = 0;
  std::vector<nn::Linear> layers;
};

/// One generator stream: masked seed embedding + speaker embedding + periodic positional
/// encoding, a self-attention layer, cross-attention layers over a frame-level memory,
/// then per-region MLPs and strided downsampling to the latent rate. The memory is
/// projected to hidden_dim and carries the same positional encoding as the query.
class StreamBackbone {
 public:
  StreamBackbone() = default;
  StreamBackbone(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, int memory_dim, Rng& rng);

  /// seed: kSeedFrames x hidden_dim (encoded), memory: L x memory_dim.
  BodyLatents operator()(const ag::Var& seed, int speaker_id, const ag::Var& memory) const;

  int clip_length = 0;
  int memory_dim = 0;
  int num_speakers = 0;
  ag::Matrix positional;
  ag::Var mask_token;  // 1 x hidden_dim
  ag::Var speaker_table;  // num_speakers x hidden_dim
  nn::Linear memory_proj;
  nn::TransformerLayer self_layer;
  std::vector<nn::TransformerLayer> cross_layers;
  std::array<nn::Mlp, 3> region_mlp;
  std::array<nn::Downsample, 3> region_down;
};

/// Hierarchical cross-attention: hand attends to upper + lower, upper to hand + lower,
/// lower to upper + hand.
class Hca {
 public:
  Hca() = default;
  Hca(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng);

  BodyLatents operator()(const BodyLatents& z) const;

  std::array<nn::TransformerLayer, 3> layers;
};

/// Audio-conditioned face decoder: L x audio_dim -> (L / latent_rate_face) x cond_dim.
class FaceDecoder {
 public:
  FaceDecoder() = default;
  FaceDecoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

  ag::Var operator()(const ag::Var& audio) const;

  ag::Matrix positional;
  nn::Linear in_proj;
  std::vector<nn::TransformerLayer> layers;
  nn::Linear out_proj;
  std::vector<nn::Downsample> down;
  nn::Mlp head;
};

/// Mean of psi (L x 1) over consecutive windows of `rate` frames -> (L / rate) x 1.
ag::Var pool_psi(const ag::Var& psi, int rate);

/// (1 - psi) * beat + psi * semantic per row; psi is rows x 1.
ag::Var fuse(const ag::Var& beat, const ag::Var& semantic, const ag::Var& psi);

struct FusionResult {
  ag::Matrix fused;
  TokenGrid tokens;
  ag::Matrix motion;  // decoded region motion, L x (J_r * 6)
};

/// Convex blend, residual nearest-neighbour tokens, frozen decode. Throws ConfigError
/// when the codec is not frozen.
FusionResult fuse_quantize_decode(const ag::Matrix& beat, const ag::Matrix& semantic, const ag::Matrix& psi_latent,
                                  const RegionCodec& codec);

}  // namespace duogesture
