#include "duogesture/mgsc.hpp"

#include <string>

#include "duogesture/errors.hpp"

namespace duogesture {

namespace {

void require_cols(const ag::Var& v, int cols, const char* what) {
  if (v.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                     std::to_string(v.cols()));
  }
}

}  // namespace

Mgsc::Mgsc(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : cond_dim(cfg.cond_dim),
      word_dim(cfg.word_dim),
      style_dim(cfg.style_dim),
      style_proj(store, "mgsc.style_proj", cfg.style_dim, cfg.cond_dim, rng),
      emotion_proj(store, "mgsc.emotion_proj", cfg.style_dim, cfg.cond_dim, rng),
      gate(store, "mgsc.gate", 2 * cfg.cond_dim, 2, rng),
      word_proj(store, "mgsc.word_proj", cfg.word_dim, cfg.cond_dim, rng),
      cross(store, "mgsc.cross", cfg.cond_dim, cfg.heads, cfg.cond_ff_dim, false, true, rng),
      out(store, "mgsc.out", cfg.cond_dim, cfg.cond_dim, cfg.cond_dim, rng) {}

MemoryGateResult Mgsc::memory_gate(const ag::Var& style, const ag::Var& emotion) const {
  require_cols(style, cond_dim, "memory_gate style");
  require_cols(emotion, cond_dim, "memory_gate emotion");
  if (style.rows() != 1 || emotion.rows() != 1) throw ShapeError("memory_gate: embeddings must be single rows");
  const ag::Var alpha = ag::softmax_rows(gate(ag::concat_cols({style, emotion})));
  const ag::Var memory =
      ag::add(ag::mul(ag::slice_cols(alpha, 0, 1), style), ag::mul(ag::slice_cols(alpha, 1, 1), emotion));
  return {alpha, memory};
}

SemanticFeature Mgsc::condition(const ag::Var& words, const MemoryGateResult& g) const {
  require_cols(words, word_dim, "condition words");
  require_cols(g.memory, cond_dim, "condition memory");
  const ag::Var query = word_proj(words);
  return {out(cross(query, g.memory)), g.alpha, g.memory};
}

SemanticFeature Mgsc::operator()(const ag::Var& words, const ag::Var& style, const ag::Var& emotion) const {
  require_cols(style, style_dim, "style embedding");
  require_cols(emotion, style_dim, "emotion embedding");
  return condition(words, memory_gate(style_proj(style), emotion_proj(emotion)));
}

}  // namespace duogesture
