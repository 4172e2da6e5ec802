#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "duogesture/config.hpp"
#include "duogesture/nn.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

/// Per-region token indices: rows x levels, row-major.
struct TokenGrid {
  int rows = 0;
  int levels = 0;
  int codebook_size = 0;
  std::vector<std::int32_t> tokens;

  std::int32_t at(int row, int level) const { return tokens[static_cast<std::size_t>(row) * levels + level]; }
  std::int32_t& at(int row, int level) { return tokens[static_cast<std::size_t>(row) * levels + level]; }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

struct QuantizeResult {
  TokenGrid tokens;
  ag::Matrix quantized;                  // sum of the selected codewords
  std::vector<ag::Matrix> level_inputs;  // residual entering each level
  ag::Matrix final_residual;             // latents - quantized
};

/// Index of the nearest row of `codebook` to `x` by exact squared distance; ties go to
/// the lowest index.
int nearest_code(const ag::Matrix& codebook, const double* x);

/// Residual quantization of `latents` with the first `levels` codebooks.
QuantizeResult residual_quantize(const std::vector<ag::Matrix>& codebooks, const ag::Matrix& latents, int levels);

/// Region motion as an L x (joints * 6) matrix. An empty joint list yields the
/// single identity-rotation stub joint.
ag::Matrix region_motion(const MotionSequence& seq, const std::vector<int>& joints);
/// Stub width used when a region has no joints.
inline constexpr int kStubJoints = 1;

/// Encoder, residual quantizer and decoder for one body region.
class RegionCodec {
 public:
  RegionCodec(Region region, int region_joints, int latent_rate, const ModelConfig& cfg, Rng& rng);
  RegionCodec(RegionCodec&&) noexcept = default;
  RegionCodec& operator=(RegionCodec&&) noexcept = default;

  Region region() const { return region_; }
  int region_joints() const { return joints_; }
  int input_dim() const { return joints_ * kRot6d; }
  int latent_dim() const { return latent_dim_; }
  int latent_rate() const { return rate_; }
  int levels() const { return static_cast<int>(codebooks_.size()); }
  int codebook_size() const { return codebook_size_; }

  /// L x input_dim -> (L / rate) x latent_dim. Throws ShapeError on width mismatch or
  /// when L is not divisible by the latent rate. With block > 0 the rows are stacked
  /// sequences of `block` frames, encoded independently.
  ag::Var encode(const ag::Var& motion, int block = 0) const;
  ag::Matrix encode(const ag::Matrix& motion) const;

  /// Quantize with all levels (or the first `levels`).
  QuantizeResult quantize(const ag::Matrix& latents, int levels = -1) const;

  /// Continuous latents -> motion (differentiable in the latents). With block > 0 the
  /// rows are stacked latent sequences of `block` rows each.
  ag::Var decode_latents(const ag::Var& latents, int block = 0) const;
  /// Token grid -> motion. Throws DataError on out-of-range tokens.
  ag::Matrix decode(const TokenGrid& tokens) const;
  /// Sum of codewords selected by a token grid.
  ag::Matrix lookup(const TokenGrid& tokens) const;

  /// Fixed per-channel input standardisation (encoder input (x - mean) / scale,
  /// decoder output y * scale + mean). Identity until set; throws once frozen.
  void set_normalization(const ag::Matrix& mean, const ag::Matrix& scale);

  const std::vector<ag::Matrix>& codebooks() const { return codebooks_; }
  /// Mutable codebooks; throws once frozen.
  std::vector<ag::Matrix>& mutable_codebooks();

  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }

  bool frozen() const { return frozen_; }
  void freeze();
  /// Hash of network parameters and codebooks.
  std::uint64_t hash() const;

  void append_to(NamedArrays& bundle) const;
  void load_from(const NamedArrays& bundle);

 private:
  Region region_;
  int joints_;
  int latent_dim_;
  int rate_;
  int codebook_size_;
  bool frozen_ = false;
  std::unique_ptr<nn::ParamStore> store_;
  ag::Var norm_mean_;
  ag::Var norm_scale_;
  nn::Linear enc_in_;
  nn::Conv3 enc_conv_;
  nn::Downsample enc_down_;
  nn::Linear enc_out_;
  nn::Linear dec_in_;
  nn::Upsample dec_up_;
  nn::Conv3 dec_conv_;
  nn::Linear dec_out_;
  std::vector<ag::Matrix> codebooks_;
};

/// One codec per region, indexed by static_cast<int>(Region).
struct CodecSet {
  std::vector<RegionCodec> codecs;
  std::vector<std::vector<int>> joints;  // joints covered by each codec (empty = stub)

  static CodecSet create(const ModelConfig& cfg, Rng& rng);

  RegionCodec& at(Region r) { return codecs[static_cast<std::size_t>(r)]; }
  const RegionCodec& at(Region r) const { return codecs[static_cast<std::size_t>(r)]; }
  bool all_frozen() const;
  void freeze();
  std::uint64_t hash() const;

  /// Deep copy; `cfg` must be the config the set was created with.
  CodecSet clone(const ModelConfig& cfg) const;

  void save(const std::filesystem::path& dir, const ModelConfig& cfg) const;
  /// Rebuilds from a checkpoint written by save(); the stored config must match `cfg`
  /// in every shape-determining field.
  static CodecSet load(const std::filesystem::path& dir, const ModelConfig& cfg);
};

struct CodecTrainLog {
  std::vector<double> recon_mse;       // per step, region-averaged
  std::vector<double> commitment;      // per step
  double initial_recon_mse = 0.0;      // mean over the dataset before training
  double final_recon_mse = 0.0;        // mean over the dataset after training, all levels
};

/// Stage-1 training: reconstruction MSE plus commitment loss with straight-through
/// gradients, EMA codebooks, dead-code reseeding and quantizer dropout. Returns
/// frozen codecs. Throws DataError on an empty dataset.
CodecSet pretrain_codec(const std::vector<MotionSequence>& dataset, const ModelConfig& cfg,
                        CodecTrainLog* log = nullptr);

/// Mean reconstruction MSE over a dataset when decoding with the first `levels` levels.
double codec_reconstruction_mse(const CodecSet& codecs, const std::vector<MotionSequence>& dataset, int levels);

}  // namespace duogesture
