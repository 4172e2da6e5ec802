#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duogesture/archive.hpp"
#include "duogesture/autograd.hpp"
#include "duogesture/rng.hpp"

namespace duogesture::nn {

using ag::Matrix;
using ag::Var;

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

/// Ordered registry of named parameters. Modules keep Var handles that share nodes
/// with the store, so the store is the single place for optimisation, hashing and
/// checkpointing.
class ParamStore {
 public:
  Var create(const std::string& name, Matrix init, bool trainable = true);

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  const Parameter* find(const std::string& name) const;

  void zero_grad();
  /// Marks every parameter non-trainable and drops requires_grad.
  void freeze();
  std::size_t scalar_count() const;
  /// FNV-1a over names and raw values; changes iff any parameter changes.
  std::uint64_t hash() const;

  void append_to(NamedArrays& bundle, const std::string& prefix) const;
  /// Overwrites values from a bundle; throws ManifestMismatchError on missing names or shapes.
  void load_from(const NamedArrays& bundle, const std::string& prefix);

 private:
  std::vector<Parameter> params_;
};

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
         bool trainable = true);

  Var operator()(const Var& x) const;
  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }

  Var weight;  // in x out
  Var bias;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim, bool trainable = true);

  Var operator()(const Var& x) const;

  Var gamma;
  Var beta;
};

/// Two-layer perceptron with GELU between the layers.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out, Rng& rng,
      bool trainable = true);

  Var operator()(const Var& x) const;

  Linear first;
  Linear second;
};

/// Temporal convolution with kernel 3 and zero padding 1, as a linear map over
/// [x[t-1], x[t], x[t+1]]. With block > 0 the rows are stacked sequences of that
/// length and padding applies at every sequence boundary.
class Conv3 {
 public:
  Conv3() = default;
  Conv3(ParamStore& store, const std::string& name, int in, int out, Rng& rng);

  Var operator()(const Var& x, Eigen::Index block = 0) const;

  Linear proj;
};

/// Strided temporal downsampling (kernel = stride = rate): frames are grouped in
/// consecutive blocks of `rate` and each block is mapped linearly to one output frame.
class Downsample {
 public:
  Downsample() = default;
  Downsample(ParamStore& store, const std::string& name, int dim, int rate, Rng& rng,
             bool trainable = true);

  Var operator()(const Var& x) const;

  int rate = 1;
  Linear proj;
};

/// Inverse of Downsample: each input frame expands to `rate` output frames.
class Upsample {
 public:
  Upsample() = default;
  Upsample(ParamStore& store, const std::string& name, int dim, int rate, Rng& rng,
           bool trainable = true);

  Var operator()(const Var& x) const;

  int rate = 1;
  Linear proj;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng);

  /// query: Lq x d, memory: Lm x d -> Lq x d.
  Var operator()(const Var& query, const Var& memory) const;

  int heads = 1;
  Linear q, k, v, o;
};

/// Pre-norm transformer layer: optional self-attention, optional cross-attention
/// over an external memory, then a GELU feed-forward block, each with a residual.
/// The memory is used as given (not normalised).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(ParamStore& store, const std::string& name, int dim, int heads, int ff_dim,
                   bool self_attention, bool cross_attention, Rng& rng);

  Var operator()(const Var& x, const Var& memory = Var()) const;

  bool has_self = false;
  bool has_cross = false;
  LayerNorm norm_self, norm_cross, norm_ff;
  MultiHeadAttention self_attn, cross_attn;
  Mlp ff;
};

/// Sinusoidal encodings whose fundamental period equals the sequence length:
/// column 2i holds sin(2*pi*(i+1)*t/L), column 2i+1 the matching cosine.
Matrix periodic_positional_encoding(int length, int dim);

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

/// Adam without weight decay over the trainable parameters of a store.
class Adam {
 public:
  Adam(ParamStore& store, AdamOptions options);

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  /// Applies one update using accumulated gradients scaled by `grad_scale`, then zeroes them.
  void step(double grad_scale = 1.0);
  long steps() const { return t_; }

 private:
  ParamStore* store_;
  AdamOptions options_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

}  // namespace duogesture::nn
