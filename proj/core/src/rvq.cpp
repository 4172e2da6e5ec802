#include "duogesture/rvq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "duogesture/errors.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {
namespace {

using ag::Matrix;
using ag::Var;

const std::string kCodecFormat = "duogesture-codecs";
// Floor for per-channel standardisation; keeps constant channels (stub joints) finite.
constexpr double kMinNormScale = 1e-2;

std::string prefix_for(Region r) { return std::string(region_name(r)) + "/"; }

/// Fields that determine codec parameter shapes.
bool same_codec_shape(const ModelConfig& a, const ModelConfig& b) {
  return a.joints == b.joints && a.clip_length == b.clip_length && a.cond_dim == b.cond_dim &&
         a.codebook_size == b.codebook_size && a.rvq_levels == b.rvq_levels &&
         a.latent_rate_body == b.latent_rate_body && a.latent_rate_face == b.latent_rate_face &&
         a.codec_hidden_dim == b.codec_hidden_dim;
}

struct EmaState {
  std::vector<Eigen::VectorXd> count;  // per level, K
  std::vector<Matrix> sum;             // per level, K x D
  std::vector<std::vector<int>> last_used;
};

Matrix stack_rows(const std::vector<Matrix>& parts) {
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, parts.empty() ? 0 : parts.front().cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

void init_codebooks(RegionCodec& codec, const Matrix& latents, Rng& rng, EmaState& ema) {
  auto& books = codec.mutable_codebooks();
  const int K = codec.codebook_size();
  Matrix residual = latents;
  for (std::size_t level = 0; level < books.size(); ++level) {
    Matrix& book = books[level];
    for (int k = 0; k < K; ++k) {
      const Eigen::Index row = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(residual.rows())));
      book.row(k) = residual.row(row);
      for (Eigen::Index d = 0; d < book.cols(); ++d) book(k, d) += 1e-3 * rng.normal();
    }
    const QuantizeResult q = residual_quantize({book}, residual, 1);
    residual = q.final_residual;
    ema.count[level].setOnes();
    ema.sum[level] = book;
  }
}

void ema_update(RegionCodec& codec, const std::vector<Matrix>& level_inputs, const TokenGrid& grid,
                int active_levels, double decay, int dead_steps, int step, Rng& rng, EmaState& ema) {
  auto& books = codec.mutable_codebooks();
  const int K = codec.codebook_size();
  const double eps = 1e-5;
  for (int level = 0; level < active_levels; ++level) {
    const Matrix& x = level_inputs[level];
    Eigen::VectorXd n = Eigen::VectorXd::Zero(K);
    Matrix s = Matrix::Zero(K, x.cols());
    for (int row = 0; row < grid.rows; ++row) {
      const int k = grid.at(row, level);
      n(k) += 1.0;
      s.row(k) += x.row(row);
    }
    ema.count[level] = decay * ema.count[level] + (1.0 - decay) * n;
    ema.sum[level] = decay * ema.sum[level] + (1.0 - decay) * s;
    const double total = ema.count[level].sum();
    for (int k = 0; k < K; ++k) {
      const double smoothed = (ema.count[level](k) + eps) / (total + K * eps) * total;
      books[level].row(k) = ema.sum[level].row(k) / smoothed;
      if (n(k) > 0) ema.last_used[level][k] = step;
      if (step - ema.last_used[level][k] >= dead_steps) {
        const Eigen::Index pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(x.rows())));
        books[level].row(k) = x.row(pick);
        ema.sum[level].row(k) = x.row(pick);
        ema.count[level](k) = 1.0;
        ema.last_used[level][k] = step;
      }
    }
  }
}

}  // namespace

int nearest_code(const Matrix& codebook, const double* x) {
  const Eigen::Index K = codebook.rows();
  const Eigen::Index D = codebook.cols();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < K; ++k) {
    const double* c = codebook.data() + k * D;
    double d = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) {
      const double diff = x[i] - c[i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

QuantizeResult residual_quantize(const std::vector<Matrix>& codebooks, const Matrix& latents, int levels) {
  if (levels < 1 || levels > static_cast<int>(codebooks.size())) throw ConfigError("invalid quantizer level count");
  if (!latents.allFinite()) throw NumericError("quantize: non-finite latents");
  QuantizeResult out;
  const int rows = static_cast<int>(latents.rows());
  out.tokens.rows = rows;
  out.tokens.levels = levels;
  out.tokens.codebook_size = static_cast<int>(codebooks.front().rows());
  out.tokens.tokens.assign(static_cast<std::size_t>(rows) * levels, 0);
  out.quantized = Matrix::Zero(latents.rows(), latents.cols());
  Matrix residual = latents;
  for (int level = 0; level < levels; ++level) {
    const Matrix& book = codebooks[level];
    if (book.cols() != latents.cols()) throw ShapeError("quantize: latent width differs from codebook width");
    out.level_inputs.push_back(residual);
    for (int r = 0; r < rows; ++r) {
      const int k = nearest_code(book, residual.data() + static_cast<Eigen::Index>(r) * residual.cols());
      out.tokens.at(r, level) = k;
      out.quantized.row(r) += book.row(k);
      residual.row(r) -= book.row(k);
    }
  }
  out.final_residual = residual;
  return out;
}

Matrix region_motion(const MotionSequence& seq, const std::vector<int>& joints) {
  if (joints.empty()) {
    Matrix stub(seq.length, kRot6d);
    for (int t = 0; t < seq.length; ++t) stub.row(t) << 1, 0, 0, 0, 1, 0;
    return stub;
  }
  Matrix out(seq.length, static_cast<Eigen::Index>(joints.size()) * kRot6d);
  for (int t = 0; t < seq.length; ++t) {
    for (std::size_t k = 0; k < joints.size(); ++k) {
      if (joints[k] < 0 || joints[k] >= seq.joints) throw ShapeError("region joint out of range");
      for (int c = 0; c < kRot6d; ++c) out(t, static_cast<Eigen::Index>(k) * kRot6d + c) = seq.at(t, joints[k], c);
    }
  }
  return out;
}

RegionCodec::RegionCodec(Region region, int region_joints, int latent_rate, const ModelConfig& cfg, Rng& rng)
    : region_(region),
      joints_(region_joints),
      latent_dim_(cfg.cond_dim),
      rate_(latent_rate),
      codebook_size_(cfg.codebook_size),
      store_(std::make_unique<nn::ParamStore>()) {
  if (region_joints <= 0) throw ConfigError("codec needs at least one joint");
  const int in = region_joints * kRot6d;
  const int h = cfg.codec_hidden_dim;
  auto& s = *store_;
  norm_mean_ = s.create("norm.mean", Matrix::Zero(1, in), false);
  norm_scale_ = s.create("norm.scale", Matrix::Ones(1, in), false);
  enc_in_ = nn::Linear(s, "enc.in", in, h, rng);
  enc_conv_ = nn::Conv3(s, "enc.conv", h, h, rng);
  enc_down_ = nn::Downsample(s, "enc.down", h, latent_rate, rng);
  enc_out_ = nn::Linear(s, "enc.out", h, latent_dim_, rng);
  dec_in_ = nn::Linear(s, "dec.in", latent_dim_, h, rng);
  dec_up_ = nn::Upsample(s, "dec.up", h, latent_rate, rng);
  dec_conv_ = nn::Conv3(s, "dec.conv", h, h, rng);
  dec_out_ = nn::Linear(s, "dec.out", h, in, rng);
  for (int l = 0; l < cfg.rvq_levels; ++l) {
    codebooks_.push_back(nn::uniform_matrix(codebook_size_, latent_dim_, 1.0 / codebook_size_, rng));
  }
}

Var RegionCodec::encode(const Var& motion, int block) const {
  if (motion.cols() != input_dim()) {
    throw ShapeError("encode: expected " + std::to_string(input_dim()) + " columns for region " +
                     std::string(region_name(region_)) + ", got " + std::to_string(motion.cols()));
  }
  const int len = block > 0 ? block : static_cast<int>(motion.rows());
  if (len % rate_ != 0 || motion.rows() % len != 0) {
    throw ShapeError("encode: length " + std::to_string(len) + " not divisible by latent rate " +
                     std::to_string(rate_));
  }
  Var h = ag::gelu(enc_in_(ag::div(ag::sub(motion, norm_mean_), norm_scale_)));
  h = ag::gelu(enc_conv_(h, len));
  h = enc_down_(h);
  return enc_out_(h);
}

Matrix RegionCodec::encode(const Matrix& motion) const {
  ag::NoGradGuard guard;
  return encode(ag::constant(motion)).value();
}

QuantizeResult RegionCodec::quantize(const Matrix& latents, int levels) const {
  if (latents.cols() != latent_dim_) throw ShapeError("quantize: latent width mismatch");
  return residual_quantize(codebooks_, latents, levels < 0 ? this->levels() : levels);
}

Var RegionCodec::decode_latents(const Var& latents, int block) const {
  if (latents.cols() != latent_dim_) throw ShapeError("decode: latent width mismatch");
  const int len = block > 0 ? block : static_cast<int>(latents.rows());
  Var h = ag::gelu(dec_in_(latents));
  h = ag::gelu(dec_up_(h));
  h = ag::gelu(dec_conv_(h, static_cast<Eigen::Index>(len) * rate_));
  return ag::add(ag::mul(dec_out_(h), norm_scale_), norm_mean_);
}

Matrix RegionCodec::lookup(const TokenGrid& tokens) const {
  if (tokens.levels < 1 || tokens.levels > levels()) throw DataError("token grid level count out of range");
  Matrix q = Matrix::Zero(tokens.rows, latent_dim_);
  for (int r = 0; r < tokens.rows; ++r) {
    for (int l = 0; l < tokens.levels; ++l) {
      const int k = tokens.at(r, l);
      if (k < 0 || k >= codebook_size_) {
        throw DataError("token " + std::to_string(k) + " at row " + std::to_string(r) + ", level " +
                        std::to_string(l) + " outside [0, " + std::to_string(codebook_size_) + ")");
      }
      q.row(r) += codebooks_[l].row(k);
    }
  }
  return q;
}

Matrix RegionCodec::decode(const TokenGrid& tokens) const {
  ag::NoGradGuard guard;
  return decode_latents(ag::constant(lookup(tokens))).value();
}

void RegionCodec::set_normalization(const Matrix& mean, const Matrix& scale) {
  if (frozen_) throw ConfigError("codec is frozen");
  if (mean.rows() != 1 || mean.cols() != input_dim() || scale.rows() != 1 || scale.cols() != input_dim()) {
    throw ShapeError("normalization statistics must be 1 x input_dim");
  }
  if ((scale.array() <= 0).any()) throw ConfigError("normalization scale must be positive");
  norm_mean_.mutable_value() = mean;
  norm_scale_.mutable_value() = scale;
}

std::vector<Matrix>& RegionCodec::mutable_codebooks() {
  if (frozen_) throw ConfigError("codec is frozen");
  return codebooks_;
}

void RegionCodec::freeze() {
  store_->freeze();
  frozen_ = true;
}

std::uint64_t RegionCodec::hash() const {
  std::uint64_t h = store_->hash();
  for (const auto& b : codebooks_) h = fnv1a64(b.data(), sizeof(double) * static_cast<std::size_t>(b.size()), h);
  return h;
}

void RegionCodec::append_to(NamedArrays& bundle) const {
  const std::string prefix = prefix_for(region_);
  store_->append_to(bundle, prefix);
  std::vector<double> values;
  for (const auto& b : codebooks_) values.insert(values.end(), b.data(), b.data() + b.size());
  bundle.arrays.emplace_back(prefix + "codebooks",
                             NdArray::from_f64({static_cast<std::uint32_t>(levels()),
                                                static_cast<std::uint32_t>(codebook_size_),
                                                static_cast<std::uint32_t>(latent_dim_)},
                                               std::move(values)));
}

void RegionCodec::load_from(const NamedArrays& bundle) {
  if (frozen_) throw ConfigError("codec is frozen");
  const std::string prefix = prefix_for(region_);
  store_->load_from(bundle, prefix);
  const NdArray& arr = bundle.at(prefix + "codebooks");
  if (arr.dtype() != DType::f64 || arr.shape.size() != 3 || arr.shape[0] != static_cast<std::uint32_t>(levels()) ||
      arr.shape[1] != static_cast<std::uint32_t>(codebook_size_) ||
      arr.shape[2] != static_cast<std::uint32_t>(latent_dim_)) {
    throw ManifestMismatchError("codebook array for " + std::string(region_name(region_)) + " has the wrong shape");
  }
  const std::size_t per = static_cast<std::size_t>(codebook_size_) * latent_dim_;
  for (int l = 0; l < levels(); ++l) {
    codebooks_[l] = Eigen::Map<const Matrix>(arr.f64().data() + l * per, codebook_size_, latent_dim_);
  }
}

CodecSet CodecSet::create(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  CodecSet set;
  const RegionMap map = default_region_partition(cfg.joints);
  for (Region r : kAllRegions) {
    const auto& joints = map[static_cast<int>(r)];
    const int n = joints.empty() ? kStubJoints : static_cast<int>(joints.size());
    const int rate = r == Region::face ? cfg.latent_rate_face : cfg.latent_rate_body;
    set.codecs.emplace_back(r, n, rate, cfg, rng);
    set.joints.push_back(joints);
  }
  return set;
}

bool CodecSet::all_frozen() const {
  return std::all_of(codecs.begin(), codecs.end(), [](const RegionCodec& c) { return c.frozen(); });
}

void CodecSet::freeze() {
  for (auto& c : codecs) c.freeze();
}

std::uint64_t CodecSet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& c : codecs) {
    const std::uint64_t ch = c.hash();
    h = fnv1a64(&ch, sizeof(ch), h);
  }
  return h;
}

void CodecSet::save(const std::filesystem::path& dir, const ModelConfig& cfg) const {
  NamedArrays bundle;
  bundle.format = kCodecFormat;
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg.to_json());
  nlohmann::json regions = nlohmann::json::object();
  for (std::size_t i = 0; i < codecs.size(); ++i) regions[std::string(region_name(codecs[i].region()))] = joints[i];
  meta["regions"] = regions;
  meta["frozen"] = all_frozen();
  bundle.metadata_json = meta.dump();
  for (const auto& c : codecs) c.append_to(bundle);
  write_named_arrays(bundle, dir);
}

CodecSet CodecSet::clone(const ModelConfig& cfg) const {
  NamedArrays bundle;
  for (const auto& c : codecs) c.append_to(bundle);
  Rng rng(0);
  CodecSet set = create(cfg, rng);
  if (set.codecs.size() != codecs.size()) throw ConfigError("clone: config does not match the codec set");
  for (auto& c : set.codecs) c.load_from(bundle);
  if (all_frozen()) set.freeze();
  return set;
}

CodecSet CodecSet::load(const std::filesystem::path& dir, const ModelConfig& cfg) {
  const NamedArrays bundle = read_named_arrays(dir);
  if (bundle.format != kCodecFormat) throw ManifestMismatchError("not a codec checkpoint: format " + bundle.format);
  const auto meta = nlohmann::json::parse(bundle.metadata_json);
  const ModelConfig stored = ModelConfig::from_json(meta.at("config").dump());
  if (!same_codec_shape(stored, cfg)) throw ConfigError("codec checkpoint was trained with a different shape config");
  Rng rng(0);
  CodecSet set = create(cfg, rng);
  for (auto& c : set.codecs) c.load_from(bundle);
  set.freeze();
  return set;
}

CodecSet pretrain_codec(const std::vector<MotionSequence>& dataset, const ModelConfig& cfg, CodecTrainLog* log) {
  if (dataset.empty()) throw DataError("pretrain_codec: empty dataset");
  cfg.validate();
  Rng rng(cfg.seed, 0xC0DEC);
  CodecSet set = CodecSet::create(cfg, rng);

  const std::size_t n_regions = set.codecs.size();
  std::vector<std::vector<Matrix>> motions(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    for (const auto& seq : dataset) {
      if (seq.joints != cfg.joints || seq.length != cfg.clip_length) {
        throw ShapeError("pretrain_codec: sequence shape differs from config");
      }
      motions[r].push_back(region_motion(seq, set.joints[r]));
    }
  }

  for (std::size_t r = 0; r < n_regions; ++r) {
    const Matrix all = stack_rows(motions[r]);
    const Matrix mean = all.colwise().mean();
    const Matrix centered = all.rowwise() - mean.row(0);
    Matrix scale = (centered.array().square().colwise().mean()).sqrt().matrix();
    scale = scale.cwiseMax(kMinNormScale);
    set.codecs[r].set_normalization(mean, scale);
  }

  std::vector<nn::Adam> opts;
  std::vector<EmaState> ema(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    opts.emplace_back(set.codecs[r].params(), nn::AdamOptions{cfg.codec_lr});
    const int K = cfg.codebook_size;
    ema[r].count.assign(cfg.rvq_levels, Eigen::VectorXd::Ones(K));
    ema[r].sum.assign(cfg.rvq_levels, Matrix::Zero(K, cfg.cond_dim));
    ema[r].last_used.assign(cfg.rvq_levels, std::vector<int>(K, 0));
  }

  CodecTrainLog local_log;
  local_log.initial_recon_mse = codec_reconstruction_mse(set, dataset, cfg.rvq_levels);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const int batch = std::min<int>(cfg.codec_batch, static_cast<int>(dataset.size()));

  for (int step = 0; step < cfg.codec_steps; ++step) {
    std::vector<std::size_t> picks;
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      picks.push_back(order[cursor++]);
    }
    double recon_total = 0.0;
    double commit_total = 0.0;
    for (std::size_t r = 0; r < n_regions; ++r) {
      RegionCodec& codec = set.codecs[r];
      std::vector<Matrix> parts;
      for (std::size_t i : picks) parts.push_back(motions[r][i]);
      const Matrix x = stack_rows(parts);
      const Var z = codec.encode(ag::constant(x), cfg.clip_length);
      const Matrix zv = z.value();
      if (step == 0) init_codebooks(codec, zv, rng, ema[r]);

      int active = codec.levels();
      if (rng.bernoulli(cfg.quantizer_dropout)) active = 1 + static_cast<int>(rng.index(codec.levels()));

      const QuantizeResult q = codec.quantize(zv, active);
      const Var straight = z + ag::constant(q.quantized - zv);
      const Var recon = codec.decode_latents(straight, cfg.clip_length / codec.latent_rate());
      const Var rec_loss = ag::mean(ag::square(recon - ag::constant(x)));
      const Var commit = ag::mean(ag::square(z - ag::constant(q.quantized)));
      ag::backward(rec_loss + ag::scale(commit, cfg.commitment_weight));
      opts[r].step();
      recon_total += rec_loss.item();
      commit_total += commit.item();
      ema_update(codec, q.level_inputs, q.tokens, active, cfg.ema_decay, cfg.dead_code_steps, step, rng, ema[r]);
    }
    const double denom = static_cast<double>(n_regions);
    local_log.recon_mse.push_back(recon_total / denom);
    local_log.commitment.push_back(commit_total / denom);
  }

  set.freeze();
  local_log.final_recon_mse = codec_reconstruction_mse(set, dataset, cfg.rvq_levels);
  if (log) *log = std::move(local_log);
  return set;
}

double codec_reconstruction_mse(const CodecSet& codecs, const std::vector<MotionSequence>& dataset, int levels) {
  if (dataset.empty()) throw DataError("empty dataset");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < codecs.codecs.size(); ++r) {
    const RegionCodec& codec = codecs.codecs[r];
    for (const auto& seq : dataset) {
      const Matrix x = region_motion(seq, codecs.joints[r]);
      const QuantizeResult q = codec.quantize(codec.encode(x), levels);
      const Matrix y = codec.decode(q.tokens);
      total += (y - x).squaredNorm();
      count += static_cast<std::size_t>(x.size());
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace duogesture
