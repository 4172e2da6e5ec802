#pragma once

#include "duogesture/config.hpp"
#include "duogesture/nn.hpp"

namespace duogesture {

struct MemoryGateResult {
  ag::Var alpha;   // 1 x 2: (style weight, emotion weight), sums to 1
  ag::Var memory;  // 1 x cond_dim convex combination of the two embeddings
};

struct SemanticFeature {
  ag::Var s_m;     // L x cond_dim
  ag::Var alpha;   // 1 x 2
  ag::Var memory;  // 1 x cond_dim
};

/// Motion-grounded semantic conditioning. Word embeddings query a length-1 memory
/// built from the style and emotion embeddings; no operation mixes frames.
class Mgsc {
 public:
  Mgsc() = default;
  Mgsc(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

  /// Inputs are the projected 1 x cond_dim embeddings.
  MemoryGateResult memory_gate(const ag::Var& style, const ag::Var& emotion) const;
  /// words: L x word_dim (raw), memory: 1 x cond_dim.
  SemanticFeature condition(const ag::Var& words, const MemoryGateResult& gate) const;
  /// Raw feature inputs: words L x word_dim, style and emotion 1 x style_dim.
  SemanticFeature operator()(const ag::Var& words, const ag::Var& style, const ag::Var& emotion) const;

  int cond_dim = 0;
  int word_dim = 0;
  int style_dim = 0;
  nn::Linear style_proj;
  nn::Linear emotion_proj;
  nn::Linear gate;       // [style; emotion] (2 cond_dim) -> 2 logits
  nn::Linear word_proj;  // word_dim -> cond_dim
  nn::TransformerLayer cross;
  nn::Mlp out;
};

}  // namespace duogesture
