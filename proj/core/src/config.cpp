#include "duogesture/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "duogesture/errors.hpp"
#include "duogesture/rng.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

using nlohmann::json;

#define DUOGESTURE_CONFIG_FIELDS(X)                                                         \
  X(joints) X(clip_length) X(fps) X(audio_dim) X(word_dim) X(style_dim) X(num_speakers)     \
  X(hidden_dim) X(cond_dim) X(timing_dim) X(bottleneck_dim) X(codebook_size) X(rvq_levels)  \
  X(latent_rate_body) X(latent_rate_face) X(heads) X(hidden_ff_dim) X(cond_ff_dim)          \
  X(backbone_layers) X(face_layers) X(seed_encoder_layers) X(lr) X(lr_decay) X(epochs)      \
  X(batch) X(beta_target) X(kl_warmup_start) X(kl_warmup_end) X(free_bits)                  \
  X(semantic_boost) X(logvar_min) X(logvar_max) X(stochastic_eval) X(phys_warmup_start)     \
  X(phys_warmup_end) X(beta_phys_target) X(tau_base) X(alpha_ibp) X(codec_steps)            \
  X(codec_hidden_dim) X(codec_batch) X(codec_lr) X(commitment_weight) X(ema_decay) X(dead_code_steps)           \
  X(quantizer_dropout) X(seed)

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.joints = 12;
  c.audio_dim = 64;
  c.word_dim = 32;
  c.style_dim = 32;
  c.num_speakers = 8;
  c.hidden_dim = 48;
  c.cond_dim = 32;
  c.timing_dim = 16;
  c.codebook_size = 32;
  c.hidden_ff_dim = 96;
  c.cond_ff_dim = 64;
  c.backbone_layers = 2;
  c.face_layers = 1;
  c.seed_encoder_layers = 2;
  c.lr = 1e-3;
  c.epochs = 40;
  c.batch = 8;
  c.kl_warmup_start = 4;
  c.kl_warmup_end = 20;
  c.phys_warmup_start = 6;
  c.phys_warmup_end = 16;
  c.codec_steps = 600;
  c.codec_hidden_dim = 32;
  c.codec_lr = 3e-3;
  return c;
}

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> out;
  auto positive = [&](const char* name, double v) {
    if (!(v > 0)) out.push_back(std::string(name) + " must be positive");
  };
  positive("joints", joints);
  positive("clip_length", clip_length);
  positive("fps", fps);
  positive("audio_dim", audio_dim);
  positive("word_dim", word_dim);
  positive("style_dim", style_dim);
  positive("num_speakers", num_speakers);
  positive("hidden_dim", hidden_dim);
  positive("cond_dim", cond_dim);
  positive("timing_dim", timing_dim);
  positive("bottleneck_dim", bottleneck_dim);
  positive("codebook_size", codebook_size);
  positive("rvq_levels", rvq_levels);
  positive("latent_rate_body", latent_rate_body);
  positive("latent_rate_face", latent_rate_face);
  positive("heads", heads);
  positive("hidden_ff_dim", hidden_ff_dim);
  positive("cond_ff_dim", cond_ff_dim);
  positive("backbone_layers", backbone_layers);
  positive("face_layers", face_layers);
  positive("seed_encoder_layers", seed_encoder_layers);
  positive("lr", lr);
  positive("lr_decay", lr_decay);
  positive("epochs", epochs);
  positive("batch", batch);
  positive("beta_target", beta_target);
  positive("semantic_boost", semantic_boost);
  positive("tau_base", tau_base);
  positive("alpha_ibp", alpha_ibp);
  positive("codec_steps", codec_steps);
  positive("codec_hidden_dim", codec_hidden_dim);
  positive("codec_batch", codec_batch);
  positive("codec_lr", codec_lr);
  positive("commitment_weight", commitment_weight);
  positive("ema_decay", ema_decay);
  positive("dead_code_steps", dead_code_steps);
  if (beta_phys_target < 0) out.push_back("beta_phys_target must be non-negative");
  if (free_bits < 0) out.push_back("free_bits must be non-negative");
  if (kl_warmup_start >= kl_warmup_end) out.push_back("kl warmup start must precede end");
  if (phys_warmup_start >= phys_warmup_end) out.push_back("phys warmup start must precede end");
  if (kl_warmup_start < 0 || phys_warmup_start < 0) out.push_back("warmup start must be >= 0");
  if (ema_decay >= 1) out.push_back("ema_decay must be < 1");
  if (quantizer_dropout < 0 || quantizer_dropout > 1) out.push_back("quantizer_dropout must lie in [0,1]");
  if (logvar_min >= logvar_max) out.push_back("logvar_min must be < logvar_max");
  if (heads > 0 && hidden_dim % heads != 0) out.push_back("hidden_dim must be divisible by heads");
  if (heads > 0 && cond_dim % heads != 0) out.push_back("cond_dim must be divisible by heads");
  if (latent_rate_body > 0 && clip_length % latent_rate_body != 0)
    out.push_back("clip_length must be divisible by latent_rate_body");
  if (latent_rate_face > 0 && clip_length % latent_rate_face != 0)
    out.push_back("clip_length must be divisible by latent_rate_face");
  if (clip_length < kSeedFrames) out.push_back("clip_length must cover the seed frames");
  if (joints < 12) out.push_back("joints must be >= 12");
  return out;
}

void ModelConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : v) msg += "\n  " + s;
  throw ConfigError(msg);
}

std::string ModelConfig::to_json() const {
  json j;
#define X(name) j[#name] = name;
  DUOGESTURE_CONFIG_FIELDS(X)
#undef X
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(std::string_view text, const ModelConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig c = base;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    try {
#define X(name)                       \
  if (it.key() == #name) {            \
    it.value().get_to(c.name);        \
    known = true;                     \
  }
      DUOGESTURE_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
      throw ConfigError("config field '" + it.key() + "' has the wrong type: " + e.what());
    }
    if (!known) throw ConfigError("unknown config field '" + it.key() + "'");
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::string& path, const ModelConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), base);
}

ModelConfig ModelConfig::from_json(std::string_view text) { return from_json(text, ModelConfig{}); }

ModelConfig ModelConfig::load(const std::string& path) { return load(path, ModelConfig{}); }

std::uint64_t ModelConfig::hash() const {
  const std::string s = json::parse(to_json()).dump();
  return fnv1a64(s.data(), s.size());
}

}  // namespace duogesture
