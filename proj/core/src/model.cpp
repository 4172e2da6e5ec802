#include "duogesture/model.hpp"

#include <json.hpp>
#include <string>

#include "duogesture/archive.hpp"
#include "duogesture/errors.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {

namespace {

constexpr std::uint64_t kInitStream = 0x5747A6E;
constexpr const char* kModelFormat = "duogesture-model";

void check_features(const FeatureBundle& f, const ModelConfig& cfg) {
  if (f.length != cfg.clip_length) {
    throw ShapeError("feature length " + std::to_string(f.length) + " differs from clip_length " +
                     std::to_string(cfg.clip_length));
  }
  if (f.audio_dim != cfg.audio_dim || f.word_dim != cfg.word_dim || f.style_dim != cfg.style_dim ||
      f.joints != cfg.joints) {
    throw ShapeError("feature dimensions do not match the model config");
  }
  const auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw ShapeError(std::string(what) + " has the wrong number of values");
  };
  expect(f.e_a.size(), static_cast<std::size_t>(f.length) * f.audio_dim, "e_a");
  expect(f.e_s.size(), static_cast<std::size_t>(f.length) * f.word_dim, "e_s");
  expect(f.e_m.size(), static_cast<std::size_t>(f.style_dim), "e_m");
  expect(f.e_eps.size(), static_cast<std::size_t>(f.style_dim), "e_eps");
  expect(f.seed_pose.size(), static_cast<std::size_t>(kSeedFrames) * f.joints * kRot6d, "seed_pose");
}

}  // namespace

ag::Matrix feature_matrix(const std::vector<float>& values, int rows, int cols) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = values[static_cast<std::size_t>(i)];
  return m;
}

const ag::Var& ForwardPass::prediction(Region r) const {
  return r == Region::face ? face : fused[static_cast<std::size_t>(r)];
}

DuoGestureModel::DuoGestureModel(const ModelConfig& cfg, CodecSet codecs)
    : cfg_(cfg), codecs_(std::move(codecs)), store_(std::make_unique<nn::ParamStore>()) {
  cfg_.validate();
  if (codecs_.codecs.size() != kAllRegions.size()) throw ConfigError("codec set must hold one codec per region");
  if (!codecs_.all_frozen()) throw ConfigError("Stage-2 training requires frozen codecs");
  for (const auto& c : codecs_.codecs) {
    if (c.latent_dim() != cfg_.cond_dim || c.codebook_size() != cfg_.codebook_size || c.levels() != cfg_.rvq_levels) {
      throw ConfigError("codec shapes do not match the model config");
    }
  }
  Rng rng(cfg_.seed, kInitStream);
  auto& s = *store_;
  seed_ = SeedEncoder(s, cfg_, rng);
  mgsc_ = Mgsc(s, cfg_, rng);
  svib_ = Svib(s, cfg_, rng);
  beat_ = StreamBackbone(s, "beat", cfg_, cfg_.timing_dim, rng);
  semantic_ = StreamBackbone(s, "semantic", cfg_, cfg_.cond_dim, rng);
  beat_hca_ = Hca(s, "beat_hca", cfg_, rng);
  semantic_hca_ = Hca(s, "semantic_hca", cfg_, rng);
  face_ = FaceDecoder(s, cfg_, rng);
  for (Region r : kAllRegions) {
    auto& heads = heads_[static_cast<std::size_t>(r)];
    head_norms_[static_cast<std::size_t>(r)] = nn::LayerNorm(s, "head." + std::string(region_name(r)) + ".norm", cfg_.cond_dim);
    for (int l = 0; l < cfg_.rvq_levels; ++l) {
      heads.emplace_back(s, "head." + std::string(region_name(r)) + ".level" + std::to_string(l), cfg_.cond_dim,
                         cfg_.cond_dim, cfg_.codebook_size, rng);
    }
  }
}

ForwardPass DuoGestureModel::forward(const FeatureBundle& f, Rng* rng) const {
  check_features(f, cfg_);
  const int len = cfg_.clip_length;
  const ag::Var audio = ag::constant(feature_matrix(f.e_a, len, f.audio_dim));
  const ag::Var words = ag::constant(feature_matrix(f.e_s, len, f.word_dim));
  const ag::Var style = ag::constant(feature_matrix(f.e_m, 1, f.style_dim));
  const ag::Var emotion = ag::constant(feature_matrix(f.e_eps, 1, f.style_dim));
  const ag::Var seed_pose = ag::constant(feature_matrix(f.seed_pose, kSeedFrames, f.joints * kRot6d));

  ForwardPass p;
  p.semantic = mgsc_(words, style, emotion);
  p.gate = svib_(p.semantic.s_m, audio, rng);
  p.psi_latent = pool_psi(p.gate.psi, cfg_.latent_rate_body);

  const ag::Var seed = seed_(seed_pose);
  p.beat = beat_(seed, f.speaker_id, p.gate.timing);
  p.semantic_stream = semantic_(seed, f.speaker_id, ag::mul(p.gate.psi, p.semantic.s_m));
  p.beat_refined = beat_hca_(p.beat);
  p.semantic_refined = semantic_hca_(p.semantic_stream);
  for (std::size_t r = 0; r < 3; ++r) p.fused[r] = fuse(p.beat_refined[r], p.semantic_refined[r], p.psi_latent);
  p.face = face_(audio);

  for (Region r : kAllRegions) {
    const auto ri = static_cast<std::size_t>(r);
    const ag::Var h = head_norms_[ri](p.prediction(r));
    for (const auto& head : heads_[ri]) p.level_logits[ri].push_back(head(h));
  }
  return p;
}

Generation DuoGestureModel::generate(const FeatureBundle& f, Rng* rng) const {
  ag::NoGradGuard guard;
  const ForwardPass p = forward(f, cfg_.stochastic_eval ? rng : nullptr);
  Generation g;
  g.gate = p.gate.trace();
  auto& lat = g.latents;

  MotionSequence& m = g.motion;
  m.length = cfg_.clip_length;
  m.joints = cfg_.joints;
  m.fps = cfg_.fps;
  m.regions = default_region_partition(cfg_.joints);
  m.speaker_id = f.speaker_id;
  m.frames.assign(static_cast<std::size_t>(m.length) * m.joints * kRot6d, 0.0f);
  m.semantic_flags.resize(static_cast<std::size_t>(m.length));
  for (int t = 0; t < m.length; ++t) m.semantic_flags[t] = g.gate.psi[t] > 0.5 ? 1 : 0;

  auto place = [&](Region r, const ag::Matrix& motion) {
    const auto& joints = codecs_.joints[static_cast<std::size_t>(r)];
    for (int t = 0; t < m.length; ++t) {
      for (std::size_t k = 0; k < joints.size(); ++k) {
        for (int c = 0; c < kRot6d; ++c) {
          m.at(t, joints[k], c) = static_cast<float>(motion(t, static_cast<Eigen::Index>(k) * kRot6d + c));
        }
      }
    }
  };

  for (std::size_t r = 0; r < 3; ++r) {
    const Region region = kBodyRegions[r];
    lat.beat[r] = p.beat[r].value();
    lat.semantic[r] = p.semantic_stream[r].value();
    lat.beat_refined[r] = p.beat_refined[r].value();
    lat.semantic_refined[r] = p.semantic_refined[r].value();
    FusionResult fr =
        fuse_quantize_decode(lat.beat_refined[r], lat.semantic_refined[r], p.psi_latent.value(), codecs_.at(region));
    lat.fused[r] = std::move(fr.fused);
    lat.tokens[static_cast<std::size_t>(region)] = std::move(fr.tokens);
    place(region, fr.motion);
  }
  lat.face = p.face.value();
  const RegionCodec& face_codec = codecs_.at(Region::face);
  lat.tokens[static_cast<std::size_t>(Region::face)] = face_codec.quantize(lat.face).tokens;
  place(Region::face, face_codec.decode(lat.tokens[static_cast<std::size_t>(Region::face)]));
  return g;
}

void DuoGestureModel::save(const std::filesystem::path& dir) const {
  NamedArrays bundle;
  bundle.format = kModelFormat;
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg_.to_json());
  meta["config_hash"] = cfg_.hash();
  meta["codec_hash"] = codecs_.hash();
  bundle.metadata_json = meta.dump();
  store_->append_to(bundle, "");
  write_named_arrays(bundle, dir);
  codecs_.save(dir / "codecs", cfg_);
}

DuoGestureModel DuoGestureModel::load(const std::filesystem::path& dir) {
  const NamedArrays bundle = read_named_arrays(dir);
  if (bundle.format != kModelFormat) throw DataError("not a model checkpoint: format '" + bundle.format + "'");
  const auto meta = nlohmann::json::parse(bundle.metadata_json);
  if (!meta.contains("config")) throw ManifestMismatchError("model checkpoint lacks a config");
  const ModelConfig cfg = ModelConfig::from_json(meta["config"].dump());
  DuoGestureModel model(cfg, CodecSet::load(dir / "codecs", cfg));
  model.store_->load_from(bundle, "");
  if (meta.contains("codec_hash") && meta["codec_hash"].get<std::uint64_t>() != model.codecs_.hash()) {
    throw ManifestMismatchError("codec checkpoint does not match the one the model was trained with");
  }
  return model;
}

}  // namespace duogesture
