#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <vector>

#include "duogesture/blender.hpp"
#include "duogesture/config.hpp"
#include "duogesture/mgsc.hpp"
#include "duogesture/rvq.hpp"
#include "duogesture/svib.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

/// Graph of one Stage-2 forward pass.
struct ForwardPass {
  SemanticFeature semantic;
  SvibOutput gate;
  ag::Var psi_latent;  // L' x 1
  BodyLatents beat;              // stream outputs
  BodyLatents semantic_stream;
  BodyLatents beat_refined;      // after HCA
  BodyLatents semantic_refined;
  BodyLatents fused;
  ag::Var face;                  // L'_face x cond_dim
  /// Per region (kAllRegions order), per level: rows x codebook_size logits.
  std::array<std::vector<ag::Var>, 4> level_logits;

  /// Continuous latents predicted for a region (fused for body regions, face latent for face).
  const ag::Var& prediction(Region r) const;
};

/// Value snapshot of the latents and tokens of a generation.
struct RegionLatentSet {
  std::array<ag::Matrix, 3> beat, semantic, beat_refined, semantic_refined, fused;
  ag::Matrix face;
  std::array<TokenGrid, 4> tokens;  // kAllRegions order
};

struct Generation {
  MotionSequence motion;  // semantic_flags hold psi > 0.5
  GateTrace gate;
  RegionLatentSet latents;
};

/// Stage-2 generator over frozen Stage-1 codecs.
class DuoGestureModel {
 public:
  /// Throws ConfigError when the codecs are not frozen or do not match the config.
  DuoGestureModel(const ModelConfig& cfg, CodecSet codecs);
  DuoGestureModel(DuoGestureModel&&) noexcept = default;
  DuoGestureModel& operator=(DuoGestureModel&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  const CodecSet& codecs() const { return codecs_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }

  /// A null rng runs the gate deterministically (z = mu).
  ForwardPass forward(const FeatureBundle& features, Rng* rng) const;

  /// Inference: fuse, quantize and decode every region. Deterministic unless
  /// config().stochastic_eval is set, in which case `rng` drives the gate.
  Generation generate(const FeatureBundle& features, Rng* rng = nullptr) const;

  /// Writes model.json plus parameter arrays into dir and the codecs into dir/codecs.
  void save(const std::filesystem::path& dir) const;
  static DuoGestureModel load(const std::filesystem::path& dir);

  const SeedEncoder& seed_encoder() const { return seed_; }
  const Mgsc& mgsc() const { return mgsc_; }
  const Svib& svib() const { return svib_; }
  const StreamBackbone& beat_backbone() const { return beat_; }
  const StreamBackbone& semantic_backbone() const { return semantic_; }
  const Hca& beat_hca() const { return beat_hca_; }
  const Hca& semantic_hca() const { return semantic_hca_; }
  const FaceDecoder& face_decoder() const { return face_; }

 private:
  ModelConfig cfg_;
  CodecSet codecs_;
  std::unique_ptr<nn::ParamStore> store_;
  SeedEncoder seed_;
  Mgsc mgsc_;
  Svib svib_;
  StreamBackbone beat_;
  StreamBackbone semantic_;
  Hca beat_hca_;
  Hca semantic_hca_;
  FaceDecoder face_;
  std::array<nn::LayerNorm, 4> head_norms_;
  std::array<std::vector<nn::Mlp>, 4> heads_;
};

/// Feature arrays as autograd constants.
ag::Matrix feature_matrix(const std::vector<float>& values, int rows, int cols);

}  // namespace duogesture
