#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "duogesture/ibp.hpp"
#include "duogesture/model.hpp"

namespace duogesture {

/// 0 before `start`, linear ramp to `target` over [start, end], `target` afterwards.
/// Throws ConfigError unless start < end.
double warmup(int epoch, int start, int end, double target);

/// Learning rate for an epoch: lr, decayed by lr_decay at 60% and again at 85% of the epochs.
double learning_rate(const ModelConfig& cfg, int epoch);

/// Sum over regions of the mean squared error between predicted and target latents.
ag::Var latent_loss(const std::vector<ag::Var>& predicted, const std::vector<ag::Matrix>& targets);

/// Mean cross-entropy over every (group, row) pair, where group g holds rows x K logits
/// and targets[g] the class of each row. Throws DataError for targets outside [0, K).
ag::Var cls_loss(const std::vector<ag::Var>& logits, const std::vector<std::vector<int>>& targets);

struct LossBreakdown {
  double l_lat = 0.0;
  double l_cls = 0.0;
  double l_sem = 0.0;
  double l_kl = 0.0;
  double l_acc = 0.0;
  double beta_vib = 0.0;
  double beta_phys = 0.0;
  double total = 0.0;

  /// l_lat + l_cls + l_sem + beta_vib * l_kl + beta_phys * l_acc.
  double composed() const;
  std::string to_json() const;
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Stage-1 quantized latents and tokens of a ground-truth clip, per region.
struct LatentTargets {
  std::array<ag::Matrix, 4> quantized;
  std::array<TokenGrid, 4> tokens;
};

LatentTargets latent_targets(const CodecSet& codecs, const MotionSequence& motion);

/// Loss graph of one clip.
struct ClipLoss {
  ag::Var total;
  ag::Var l_lat, l_cls, l_sem, l_kl, l_acc;
  LossBreakdown breakdown;
};

/// Builds every term of the training objective for one clip. The inertial term decodes
/// the refined beat latents of each body region holding arm-chain joints through the
/// frozen decoders; its weights use the gate values without passing gradient into them.
/// When beta_phys is 0 the inertial term is evaluated without a graph and does not
/// reach the total.
ClipLoss clip_loss(const DuoGestureModel& model, const ForwardPass& pass, const Clip& clip,
                   const LatentTargets& targets, const InertiaTable& inertia, double beta_vib, double beta_phys);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  int steps = 0;
  LossBreakdown mean;
};

/// Stage-2 optimisation with Adam, step decay and warmup-scheduled weights.
class Trainer {
 public:
  /// Throws DataError on an empty dataset.
  Trainer(DuoGestureModel& model, std::vector<Clip> clips);

  /// One optimiser step on the given clip indices; returns the batch-mean breakdown.
  /// Throws NumericError naming the component when a loss term is not finite.
  LossBreakdown train_step(const std::vector<int>& batch, int epoch);
  /// Shuffles the clips with a per-epoch seeded order and runs every batch.
  EpochLog run_epoch(int epoch);
  /// Runs all configured epochs, calling `on_epoch` after each.
  std::vector<EpochLog> fit(const std::function<void(const EpochLog&)>& on_epoch = {});

  /// Deterministic-gate loss of the given clips at `epoch` weights, without updating.
  LossBreakdown evaluate(const std::vector<int>& clips, int epoch) const;

  const std::vector<Clip>& clips() const { return clips_; }
  long steps() const { return step_; }

 private:
  DuoGestureModel* model_;
  std::vector<Clip> clips_;
  std::vector<LatentTargets> targets_;
  InertiaTable inertia_;
  nn::Adam adam_;
  long step_ = 0;
};

/// Run-log document: config hash, seed and per-epoch breakdowns.
std::string run_log_json(const ModelConfig& cfg, const std::vector<EpochLog>& log);

}  // namespace duogesture
