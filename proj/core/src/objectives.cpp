#include "duogesture/objectives.hpp"

#include <cmath>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <string>

#include "duogesture/errors.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {

namespace {

constexpr std::uint64_t kGateStream = 0x6A7E;
constexpr std::uint64_t kShuffleStream = 0x5B0F;
constexpr double kGradClip = 1.0;

void require_finite(double v, const char* component) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + component + " loss");
}

LossBreakdown scaled_sum(const LossBreakdown& a, const LossBreakdown& b, double w) {
  LossBreakdown r = a;
  r.l_lat += w * b.l_lat;
  r.l_cls += w * b.l_cls;
  r.l_sem += w * b.l_sem;
  r.l_kl += w * b.l_kl;
  r.l_acc += w * b.l_acc;
  return r;
}

}  // namespace

double warmup(int epoch, int start, int end, double target) {
  if (!(start < end)) throw ConfigError("warmup start must precede end");
  if (epoch < start) return 0.0;
  if (epoch >= end) return target;
  return target * static_cast<double>(epoch - start) / static_cast<double>(end - start);
}

double learning_rate(const ModelConfig& cfg, int epoch) {
  const int first = static_cast<int>(0.60 * cfg.epochs);
  const int second = static_cast<int>(0.85 * cfg.epochs);
  double lr = cfg.lr;
  if (epoch >= first) lr *= cfg.lr_decay;
  if (epoch >= second) lr *= cfg.lr_decay;
  return lr;
}

ag::Var latent_loss(const std::vector<ag::Var>& predicted, const std::vector<ag::Matrix>& targets) {
  if (predicted.size() != targets.size()) throw ShapeError("latent_loss: region count mismatch");
  ag::Var total = ag::constant(0.0);
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    if (predicted[r].rows() != targets[r].rows() || predicted[r].cols() != targets[r].cols()) {
      throw ShapeError("latent_loss: prediction and target shapes differ for region " + std::to_string(r));
    }
    total = ag::add(total, ag::mean(ag::square(ag::sub(predicted[r], ag::constant(targets[r])))));
  }
  return total;
}

ag::Var cls_loss(const std::vector<ag::Var>& logits, const std::vector<std::vector<int>>& targets) {
  if (logits.size() != targets.size()) throw ShapeError("cls_loss: group count mismatch");
  ag::Var total = ag::constant(0.0);
  std::size_t rows = 0;
  for (std::size_t g = 0; g < logits.size(); ++g) {
    if (logits[g].rows() != static_cast<Eigen::Index>(targets[g].size())) {
      throw ShapeError("cls_loss: logits and targets differ in rows");
    }
    const auto k = logits[g].cols();
    for (int t : targets[g]) {
      if (t < 0 || t >= k) throw DataError("cls_loss: target " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
    }
    total = ag::add(total, ag::sum(ag::pick(ag::log_softmax_rows(logits[g]), targets[g])));
    rows += targets[g].size();
  }
  if (rows == 0) return ag::constant(0.0);
  return ag::scale(total, -1.0 / static_cast<double>(rows));
}

double LossBreakdown::composed() const { return l_lat + l_cls + l_sem + beta_vib * l_kl + beta_phys * l_acc; }

std::string LossBreakdown::to_json() const {
  nlohmann::json j;
  j["l_lat"] = l_lat;
  j["l_cls"] = l_cls;
  j["l_sem"] = l_sem;
  j["l_kl"] = l_kl;
  j["l_acc"] = l_acc;
  j["beta_vib"] = beta_vib;
  j["beta_phys"] = beta_phys;
  j["total"] = total;
  return j.dump();
}

LatentTargets latent_targets(const CodecSet& codecs, const MotionSequence& motion) {
  LatentTargets t;
  for (Region r : kAllRegions) {
    const auto ri = static_cast<std::size_t>(r);
    const RegionCodec& codec = codecs.at(r);
    QuantizeResult q = codec.quantize(codec.encode(region_motion(motion, codecs.joints[ri])));
    t.quantized[ri] = std::move(q.quantized);
    t.tokens[ri] = std::move(q.tokens);
  }
  return t;
}

ClipLoss clip_loss(const DuoGestureModel& model, const ForwardPass& pass, const Clip& clip,
                   const LatentTargets& targets, const InertiaTable& inertia, double beta_vib, double beta_phys) {
  const ModelConfig& cfg = model.config();
  ClipLoss out;

  std::vector<ag::Var> predicted;
  std::vector<ag::Matrix> target_latents;
  std::vector<ag::Var> logits;
  std::vector<std::vector<int>> target_tokens;
  for (Region r : kAllRegions) {
    const auto ri = static_cast<std::size_t>(r);
    predicted.push_back(pass.prediction(r));
    target_latents.push_back(targets.quantized[ri]);
    const TokenGrid& grid = targets.tokens[ri];
    for (int l = 0; l < grid.levels; ++l) {
      std::vector<int> col(static_cast<std::size_t>(grid.rows));
      for (int row = 0; row < grid.rows; ++row) col[row] = grid.at(row, l);
      logits.push_back(pass.level_logits[ri][static_cast<std::size_t>(l)]);
      target_tokens.push_back(std::move(col));
    }
  }
  out.l_lat = latent_loss(predicted, target_latents);
  out.l_cls = cls_loss(logits, target_tokens);
  out.l_sem = semantic_loss(pass.gate.psi, clip.motion.semantic_flags, cfg.semantic_boost);
  out.l_kl = kl_free_bits(pass.gate.mu, pass.gate.logvar, cfg.free_bits).loss;
  require_finite(out.l_lat.item(), "latent");
  require_finite(out.l_cls.item(), "classification");
  require_finite(out.l_sem.item(), "semantic");
  require_finite(out.l_kl.item(), "KL");

  {
    std::optional<ag::NoGradGuard> no_grad;
    if (beta_phys == 0.0) no_grad.emplace();
    const GateTrace trace = pass.gate.trace();
    const ag::Matrix tau = tau_weights(inertia, trace.psi, trace.sigma2(), cfg.tau_base, cfg.alpha_ibp);
    const auto& regions = model.codecs().joints;
    ag::Var acc = ag::constant(0.0);
    double terms = 0.0;
    for (std::size_t b = 0; b < kBodyRegions.size(); ++b) {
      const auto ri = static_cast<std::size_t>(kBodyRegions[b]);
      const auto& joints = regions[ri];
      std::vector<int> local;
      ag::Matrix tau_r(tau.rows(), static_cast<Eigen::Index>(joints.size()));
      for (std::size_t k = 0; k < joints.size(); ++k) {
        tau_r.col(static_cast<Eigen::Index>(k)) = tau.col(joints[k]);
        if (inertia.mask[joints[k]]) local.push_back(static_cast<int>(k));
      }
      if (local.empty()) continue;
      const ag::Var x = model.codecs().codecs[ri].decode_latents(pass.beat_refined[b]);
      const double n = static_cast<double>(x.rows() - 2) * static_cast<double>(local.size());
      acc = ag::add(acc, ag::scale(acc_loss(x, const_velocity_pred(x), tau_r, local), n));
      terms += n;
    }
    out.l_acc = terms > 0 ? ag::scale(acc, 1.0 / terms) : acc;
  }

  LossBreakdown& bd = out.breakdown;
  bd.l_lat = out.l_lat.item();
  bd.l_cls = out.l_cls.item();
  bd.l_sem = out.l_sem.item();
  bd.l_kl = out.l_kl.item();
  bd.l_acc = out.l_acc.item();
  bd.beta_vib = beta_vib;
  bd.beta_phys = beta_phys;
  require_finite(bd.l_acc, "inertial");
  bd.total = bd.composed();

  ag::Var total = ag::add(ag::add(out.l_lat, out.l_cls), out.l_sem);
  total = ag::add(total, ag::scale(out.l_kl, beta_vib));
  if (beta_phys != 0.0) total = ag::add(total, ag::scale(out.l_acc, beta_phys));
  out.total = total;
  return out;
}

Trainer::Trainer(DuoGestureModel& model, std::vector<Clip> clips)
    : model_(&model),
      clips_(std::move(clips)),
      inertia_(InertiaTable::for_joints(model.config().joints)),
      adam_(model.params(), nn::AdamOptions{model.config().lr, 0.9, 0.999, 1e-8, kGradClip}) {
  if (clips_.empty()) throw DataError("Stage-2 training needs at least one clip");
  targets_.reserve(clips_.size());
  for (const Clip& c : clips_) targets_.push_back(latent_targets(model.codecs(), c.motion));
}

LossBreakdown Trainer::train_step(const std::vector<int>& batch, int epoch) {
  if (batch.empty()) throw DataError("empty batch");
  const ModelConfig& cfg = model_->config();
  const double beta_vib = warmup(epoch, cfg.kl_warmup_start, cfg.kl_warmup_end, cfg.beta_target);
  const double beta_phys = warmup(epoch, cfg.phys_warmup_start, cfg.phys_warmup_end, cfg.beta_phys_target);
  adam_.set_lr(learning_rate(cfg, epoch));

  const Rng base(cfg.seed, kGateStream);
  LossBreakdown mean;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int idx = batch[i];
    if (idx < 0 || idx >= static_cast<int>(clips_.size())) throw DataError("batch index out of range");
    Rng rng = base.fork(static_cast<std::uint64_t>(step_) * batch.size() + i);
    const ForwardPass pass = model_->forward(clips_[idx].features, &rng);
    const ClipLoss loss = clip_loss(*model_, pass, clips_[idx], targets_[idx], inertia_, beta_vib, beta_phys);
    ag::backward(loss.total);
    mean = scaled_sum(mean, loss.breakdown, w);
  }
  adam_.step(w);
  ++step_;
  mean.beta_vib = beta_vib;
  mean.beta_phys = beta_phys;
  mean.total = mean.composed();
  return mean;
}

EpochLog Trainer::run_epoch(int epoch) {
  const ModelConfig& cfg = model_->config();
  std::vector<int> order(clips_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng(cfg.seed, kShuffleStream).fork(static_cast<std::uint64_t>(epoch)).shuffle(order);
  EpochLog log;
  log.epoch = epoch;
  log.lr = learning_rate(cfg, epoch);
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
    const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    const LossBreakdown b = train_step(batch, epoch);
    log.mean = scaled_sum(log.mean, b, static_cast<double>(batch.size()) / static_cast<double>(order.size()));
    log.mean.beta_vib = b.beta_vib;
    log.mean.beta_phys = b.beta_phys;
    ++log.steps;
  }
  log.mean.total = log.mean.composed();
  return log;
}

std::vector<EpochLog> Trainer::fit(const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  for (int e = 0; e < model_->config().epochs; ++e) {
    logs.push_back(run_epoch(e));
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

LossBreakdown Trainer::evaluate(const std::vector<int>& clips, int epoch) const {
  if (clips.empty()) throw DataError("evaluate needs at least one clip");
  const ModelConfig& cfg = model_->config();
  const double beta_vib = warmup(epoch, cfg.kl_warmup_start, cfg.kl_warmup_end, cfg.beta_target);
  const double beta_phys = warmup(epoch, cfg.phys_warmup_start, cfg.phys_warmup_end, cfg.beta_phys_target);
  ag::NoGradGuard guard;
  LossBreakdown mean;
  const double w = 1.0 / static_cast<double>(clips.size());
  for (int idx : clips) {
    const ForwardPass pass = model_->forward(clips_.at(static_cast<std::size_t>(idx)).features, nullptr);
    mean = scaled_sum(mean, clip_loss(*model_, pass, clips_[idx], targets_[idx], inertia_, beta_vib, beta_phys).breakdown, w);
  }
  mean.beta_vib = beta_vib;
  mean.beta_phys = beta_phys;
  mean.total = mean.composed();
  return mean;
}

std::string run_log_json(const ModelConfig& cfg, const std::vector<EpochLog>& log) {
  nlohmann::json j;
  j["format"] = "duogesture-runlog";
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : log) {
    nlohmann::json row = nlohmann::json::parse(e.mean.to_json());
    row["epoch"] = e.epoch;
    row["lr"] = e.lr;
    row["steps"] = e.steps;
    j["epochs"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace duogesture
