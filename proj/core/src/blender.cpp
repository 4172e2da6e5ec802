#include "duogesture/blender.hpp"

#include <string>

#include "duogesture/errors.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

namespace {

constexpr std::array<const char*, 3> kBodyNames = {"hand", "upper", "lower"};

int log2_exact(int v) {
  int n = 0;
  while (v > 1) {
    if (v % 2 != 0) throw ConfigError("latent_rate_face must be a power of two");
    v /= 2;
    ++n;
  }
  return n;
}

}  // namespace

SeedEncoder::SeedEncoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : input_dim(cfg.joints * kRot6d) {
  int in = input_dim;
  for (int l = 0; l < cfg.seed_encoder_layers; ++l) {
    layers.emplace_back(store, "seed.layer" + std::to_string(l), in, cfg.hidden_dim, rng, false);
    in = cfg.hidden_dim;
  }
}

ag::Var SeedEncoder::operator()(const ag::Var& seed_pose) const {
  if (seed_pose.cols() != input_dim || seed_pose.rows() != kSeedFrames) {
    throw ShapeError("seed pose must be " + std::to_string(kSeedFrames) + " x " + std::to_string(input_dim));
  }
  ag::Var h = seed_pose;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = layers[l](h);
    if (l + 1 < layers.size()) h = ag::gelu(h);
  }
  return h;
}

StreamBackbone::StreamBackbone(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg,
                               int memory_dim_, Rng& rng)
    : clip_length(cfg.clip_length),
      memory_dim(memory_dim_),
      num_speakers(cfg.num_speakers),
      positional(nn::periodic_positional_encoding(cfg.clip_length, cfg.hidden_dim)) {
  mask_token = store.create(name + ".mask_token", nn::uniform_matrix(1, cfg.hidden_dim, 0.1, rng));
  speaker_table = store.create(name + ".speaker", nn::uniform_matrix(cfg.num_speakers, cfg.hidden_dim, 0.5, rng));
  memory_proj = nn::Linear(store, name + ".memory_proj", memory_dim, cfg.hidden_dim, rng);
  self_layer = nn::TransformerLayer(store, name + ".self", cfg.hidden_dim, cfg.heads, cfg.hidden_ff_dim, true,
                                    false, rng);
  for (int l = 0; l < cfg.backbone_layers; ++l) {
    cross_layers.emplace_back(store, name + ".cross" + std::to_string(l), cfg.hidden_dim, cfg.heads,
                              cfg.hidden_ff_dim, false, true, rng);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    region_mlp[r] = nn::Mlp(store, name + ".region_" + kBodyNames[r], cfg.hidden_dim, cfg.hidden_dim,
                            cfg.cond_dim, rng);
    region_down[r] = nn::Downsample(store, name + ".down_" + kBodyNames[r], cfg.cond_dim, cfg.latent_rate_body, rng);
  }
}

BodyLatents StreamBackbone::operator()(const ag::Var& seed, int speaker_id, const ag::Var& memory) const {
  if (speaker_id < 0 || speaker_id >= num_speakers) {
    throw DataError("speaker id " + std::to_string(speaker_id) + " outside [0, " + std::to_string(num_speakers) + ")");
  }
  if (memory.rows() != clip_length || memory.cols() != memory_dim) {
    throw ShapeError("stream memory must be " + std::to_string(clip_length) + " x " + std::to_string(memory_dim));
  }
  const ag::Var pe = ag::constant(positional);
  const ag::Var tokens =
      ag::concat_rows({seed, ag::repeat_rows(mask_token, clip_length - kSeedFrames)});
  const ag::Var speaker = ag::gather_rows(speaker_table, {speaker_id});
  ag::Var x = ag::add(ag::add(tokens, speaker), pe);
  x = self_layer(x);
  const ag::Var mem = ag::add(memory_proj(memory), pe);
  for (const auto& layer : cross_layers) x = layer(x, mem);
  BodyLatents out;
  for (std::size_t r = 0; r < 3; ++r) out[r] = region_down[r](region_mlp[r](x));
  return out;
}

Hca::Hca(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng) {
  for (std::size_t r = 0; r < 3; ++r) {
    layers[r] = nn::TransformerLayer(store, name + "." + kBodyNames[r], cfg.cond_dim, cfg.heads, cfg.cond_ff_dim,
                                     false, true, rng);
  }
}

BodyLatents Hca::operator()(const BodyLatents& z) const {
  const auto len = z[0].rows();
  for (const auto& v : z) {
    if (v.rows() != len) throw ShapeError("HCA: region latents differ in length");
  }
  // hand <- upper + lower, upper <- hand + lower, lower <- upper + hand.
  return {layers[0](z[0], ag::add(z[1], z[2])), layers[1](z[1], ag::add(z[0], z[2])),
          layers[2](z[2], ag::add(z[1], z[0]))};
}

FaceDecoder::FaceDecoder(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : positional(nn::periodic_positional_encoding(cfg.clip_length, cfg.hidden_dim)),
      in_proj(store, "face.in", cfg.audio_dim, cfg.hidden_dim, rng) {
  for (int l = 0; l < cfg.face_layers; ++l) {
    layers.emplace_back(store, "face.layer" + std::to_string(l), cfg.hidden_dim, cfg.heads, cfg.hidden_ff_dim, true,
                        true, rng);
  }
  out_proj = nn::Linear(store, "face.out", cfg.hidden_dim, cfg.cond_dim, rng);
  const int steps = log2_exact(cfg.latent_rate_face);
  for (int s = 0; s < steps; ++s) {
    down.emplace_back(store, "face.down" + std::to_string(s), cfg.cond_dim, 2, rng);
  }
  head = nn::Mlp(store, "face.head", cfg.cond_dim, cfg.cond_dim, cfg.cond_dim, rng);
}

ag::Var FaceDecoder::operator()(const ag::Var& audio) const {
  if (audio.rows() != positional.rows()) throw ShapeError("face decoder: clip length mismatch");
  const ag::Var mem = ag::add(in_proj(audio), ag::constant(positional));
  ag::Var x = mem;
  for (const auto& layer : layers) x = layer(x, mem);
  x = out_proj(x);
  for (const auto& d : down) x = ag::gelu(d(x));
  return head(x);
}

ag::Var pool_psi(const ag::Var& psi, int rate) {
  if (psi.cols() != 1) throw ShapeError("pool_psi: psi must be a column");
  if (rate <= 0 || psi.rows() % rate != 0) throw ShapeError("pool_psi: length not divisible by rate");
  return ag::mean_cols(ag::reshape(psi, psi.rows() / rate, rate));
}

ag::Var fuse(const ag::Var& beat, const ag::Var& semantic, const ag::Var& psi) {
  if (beat.rows() != semantic.rows() || beat.cols() != semantic.cols()) throw ShapeError("fuse: stream shapes differ");
  if (psi.cols() != 1 || psi.rows() != beat.rows()) throw ShapeError("fuse: psi must be rows x 1");
  return ag::add(ag::mul(ag::add_scalar(ag::neg(psi), 1.0), beat), ag::mul(psi, semantic));
}

FusionResult fuse_quantize_decode(const ag::Matrix& beat, const ag::Matrix& semantic, const ag::Matrix& psi_latent,
                                  const RegionCodec& codec) {
  if (!codec.frozen()) {
    throw ConfigError("codec for region " + std::string(region_name(codec.region())) + " is not frozen");
  }
  ag::NoGradGuard guard;
  FusionResult r;
  r.fused = fuse(ag::constant(beat), ag::constant(semantic), ag::constant(psi_latent)).value();
  r.tokens = codec.quantize(r.fused).tokens;
  r.motion = codec.decode(r.tokens);
  return r;
}

}  // namespace duogesture
