#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "duogesture/datagen.hpp"
#include "duogesture/errors.hpp"
#include "duogesture/objectives.hpp"
#include "gradcheck.hpp"
#include "tmpdir.hpp"

namespace duogesture {
namespace {

using ag::Matrix;
using ag::Var;
using testing::random_matrix;

TEST(Warmup, ScheduleValues) {
  EXPECT_EQ(warmup(10, 20, 100, 0.01), 0.0);
  EXPECT_NEAR(warmup(60, 20, 100, 0.01), 0.005, 1e-15);
  EXPECT_EQ(warmup(150, 20, 100, 0.01), 0.01);
  EXPECT_EQ(warmup(100, 20, 100, 0.01), 0.01);
  EXPECT_EQ(warmup(20, 20, 100, 0.01), 0.0);
  EXPECT_THROW(warmup(5, 10, 10, 0.01), ConfigError);
}

TEST(LearningRate, StepDecayAtSixtyAndEightyFivePercent) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.epochs = 100;
  cfg.lr = 1e-3;
  cfg.lr_decay = 0.3;
  EXPECT_EQ(learning_rate(cfg, 0), 1e-3);
  EXPECT_EQ(learning_rate(cfg, 59), 1e-3);
  EXPECT_NEAR(learning_rate(cfg, 60), 3e-4, 1e-18);
  EXPECT_NEAR(learning_rate(cfg, 84), 3e-4, 1e-18);
  EXPECT_NEAR(learning_rate(cfg, 85), 9e-5, 1e-18);
}

TEST(LatentLoss, ZeroForIdenticalAndUnitOffsetClosedForm) {
  Rng rng(1);
  const Matrix a = random_matrix(4, 5, rng);
  const Matrix b = random_matrix(2, 3, rng);
  EXPECT_EQ(latent_loss({ag::constant(a), ag::constant(b)}, {a, b}).item(), 0.0);
  Matrix shifted = a;
  shifted(2, 3) += 1.0;
  EXPECT_NEAR(latent_loss({ag::constant(shifted)}, {a}).item(), 1.0 / 20.0, 1e-15);
  EXPECT_NEAR(latent_loss({ag::constant(shifted), ag::constant(b)}, {a, b}).item(), 1.0 / 20.0, 1e-15);
  EXPECT_THROW(latent_loss({ag::constant(a)}, {b}), ShapeError);
}

TEST(LatentLoss, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const Matrix target = random_matrix(6, 4, rng);
  const Matrix other = random_matrix(3, 4, rng);
  auto f = [&](const Var& x) { return latent_loss({x, ag::scale(ag::slice_rows(x, 0, 3), 2.0)}, {target, other}); };
  EXPECT_LT(testing::gradient_error(f, random_matrix(6, 4, rng)), 1e-4);
}

TEST(ClsLoss, OneHotAndUniformLogits) {
  const int K = 256;
  std::vector<int> targets = {3, 100, 255};
  Matrix confident = Matrix::Constant(3, K, -50.0);
  for (int i = 0; i < 3; ++i) confident(i, targets[i]) = 50.0;
  EXPECT_LT(cls_loss({ag::constant(confident)}, {targets}).item(), 1e-12);
  EXPECT_NEAR(cls_loss({ag::zeros(3, K)}, {targets}).item(), std::log(256.0), 1e-12);
  EXPECT_NEAR(std::log(256.0), 5.545, 1e-3);
}

TEST(ClsLoss, GradientAndRangeChecks) {
  Rng rng(3);
  const std::vector<std::vector<int>> targets = {{0, 4, 2}, {1, 1}};
  const Matrix second = random_matrix(2, 5, rng);
  auto f = [&](const Var& x) { return cls_loss({x, ag::constant(second)}, targets); };
  EXPECT_LT(testing::gradient_error(f, random_matrix(3, 5, rng)), 1e-4);
  EXPECT_THROW(cls_loss({ag::zeros(2, 5)}, {{0, 5}}), DataError);
  EXPECT_THROW(cls_loss({ag::zeros(2, 5)}, {{-1, 0}}), DataError);
}

TEST(LossBreakdownTest, CompositionAndJson) {
  LossBreakdown b{0.5, 1.25, 0.75, 8.0, 0.01, 0.002, 0.003, 0.0};
  b.total = b.composed();
  EXPECT_EQ(b.total, 0.5 + 1.25 + 0.75 + 0.002 * 8.0 + 0.003 * 0.01);
  const auto j = nlohmann::json::parse(b.to_json());
  for (const char* key : {"l_lat", "l_cls", "l_sem", "l_kl", "l_acc", "beta_vib", "beta_phys", "total"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

/// Small dataset, quickly pretrained codecs and a fresh model per test.
class StageTwo : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new ModelConfig(ModelConfig::desk());
    cfg_->codec_steps = 60;
    cfg_->batch = 4;
    cfg_->epochs = 4;
    cfg_->kl_warmup_start = 1;
    cfg_->kl_warmup_end = 3;
    cfg_->phys_warmup_start = 1;
    cfg_->phys_warmup_end = 3;
    SynthSpec spec = SynthSpec::matching(*cfg_);
    spec.n_clips = 8;
    clips_ = new std::vector<Clip>(synth_dataset(spec));
    std::vector<MotionSequence> motions;
    for (const auto& c : *clips_) motions.push_back(c.motion);
    codecs_ = new CodecSet(pretrain_codec(motions, *cfg_));
  }
  static void TearDownTestSuite() {
    delete codecs_;
    delete clips_;
    delete cfg_;
  }

  static DuoGestureModel make_model(const ModelConfig& cfg) { return DuoGestureModel(cfg, codecs_->clone(cfg)); }

  static inline ModelConfig* cfg_ = nullptr;
  static inline std::vector<Clip>* clips_ = nullptr;
  static inline CodecSet* codecs_ = nullptr;
};

TEST_F(StageTwo, ModelRejectsUnfrozenCodecs) {
  Rng rng(1);
  EXPECT_THROW(DuoGestureModel(*cfg_, CodecSet::create(*cfg_, rng)), ConfigError);
}

TEST_F(StageTwo, StepKeepsCompositionAndFreezesCodecs) {
  DuoGestureModel model = make_model(*cfg_);
  Trainer trainer(model, *clips_);
  const auto codec_hash = model.codecs().hash();
  const auto param_hash = model.params().hash();
  const LossBreakdown b0 = trainer.train_step({0, 1, 2, 3}, 0);
  EXPECT_EQ(b0.beta_vib, 0.0);
  EXPECT_EQ(b0.beta_phys, 0.0);
  EXPECT_EQ(b0.total, b0.composed());
  const LossBreakdown b2 = trainer.train_step({4, 5}, 2);
  EXPECT_GT(b2.beta_vib, 0.0);
  EXPECT_GT(b2.beta_phys, 0.0);
  EXPECT_EQ(b2.total, b2.composed());
  for (double v : {b2.l_lat, b2.l_cls, b2.l_sem, b2.l_kl, b2.l_acc}) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(b2.l_kl, cfg_->bottleneck_dim * cfg_->free_bits - 1e-12);
  EXPECT_EQ(model.codecs().hash(), codec_hash);
  EXPECT_NE(model.params().hash(), param_hash);
  EXPECT_EQ(trainer.steps(), 2);
}

TEST_F(StageTwo, NonFiniteLossNamesComponent) {
  DuoGestureModel model = make_model(*cfg_);
  for (auto& p : model.params().params()) {
    if (p.name == "svib.mu.bias") p.var.mutable_value()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  }
  Trainer trainer(model, *clips_);
  try {
    trainer.train_step({0}, 2);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST_F(StageTwo, TrainingIsDeterministicGivenSeed) {
  DuoGestureModel a = make_model(*cfg_);
  DuoGestureModel b = make_model(*cfg_);
  Trainer ta(a, *clips_), tb(b, *clips_);
  const EpochLog la = ta.run_epoch(0);
  const EpochLog lb = tb.run_epoch(0);
  EXPECT_EQ(la.mean, lb.mean);
  EXPECT_EQ(a.params().hash(), b.params().hash());
  EXPECT_EQ(ta.evaluate({0, 1}, 2), tb.evaluate({0, 1}, 2));
}

TEST_F(StageTwo, ZeroPhysicsWeightMatchesDefaultUntilWarmupStarts) {
  ModelConfig off = *cfg_;
  off.beta_phys_target = 0.0;
  DuoGestureModel with = make_model(*cfg_);
  DuoGestureModel without = make_model(off);
  Trainer tw(with, *clips_), to(without, *clips_);
  for (int e = 0; e <= cfg_->phys_warmup_start; ++e) {
    const EpochLog a = tw.run_epoch(e);
    const EpochLog b = to.run_epoch(e);
    EXPECT_EQ(a.mean.l_lat, b.mean.l_lat) << "epoch " << e;
    EXPECT_EQ(a.mean.l_acc, b.mean.l_acc) << "epoch " << e;
    EXPECT_EQ(with.params().hash(), without.params().hash()) << "epoch " << e;
  }
  tw.run_epoch(cfg_->phys_warmup_start + 1);
  to.run_epoch(cfg_->phys_warmup_start + 1);
  EXPECT_NE(with.params().hash(), without.params().hash());
}

TEST_F(StageTwo, InertialTermIgnoresFaceDecoder) {
  DuoGestureModel model = make_model(*cfg_);
  const Clip& clip = (*clips_)[0];
  const LatentTargets targets = latent_targets(model.codecs(), clip.motion);
  const InertiaTable inertia = InertiaTable::for_joints(cfg_->joints);
  ag::NoGradGuard guard;
  const double before =
      clip_loss(model, model.forward(clip.features, nullptr), clip, targets, inertia, 0.01, 0.01).breakdown.l_acc;
  for (auto& p : model.params().params()) {
    if (p.name.rfind("face.", 0) == 0) p.var.mutable_value().array() += 0.5;
  }
  const ClipLoss after = clip_loss(model, model.forward(clip.features, nullptr), clip, targets, inertia, 0.01, 0.01);
  EXPECT_EQ(after.breakdown.l_acc, before);
}

TEST_F(StageTwo, GenerationIsDeterministicAndWellFormed) {
  DuoGestureModel model = make_model(*cfg_);
  const Clip& clip = (*clips_)[1];
  const Generation a = model.generate(clip.features);
  const Generation b = model.generate(clip.features);
  EXPECT_EQ(a.motion.frames, b.motion.frames);
  EXPECT_EQ(a.latents.tokens, b.latents.tokens);
  EXPECT_EQ(a.motion.length, cfg_->clip_length);
  EXPECT_EQ(a.motion.joints, cfg_->joints);
  for (float v : a.motion.frames) EXPECT_TRUE(std::isfinite(v));
  for (const auto& grid : a.latents.tokens) {
    for (int t : grid.tokens) {
      EXPECT_GE(t, 0);
      EXPECT_LT(t, cfg_->codebook_size);
    }
  }
  for (int t = 0; t < cfg_->clip_length; ++t) EXPECT_EQ(a.motion.semantic_flags[t], a.gate.psi[t] > 0.5 ? 1 : 0);
  EXPECT_EQ(a.gate.z, a.gate.mu);
  for (int r = 0; r < 3; ++r) {
    const Matrix& f = a.latents.fused[r];
    const Matrix& zb = a.latents.beat_refined[r];
    const Matrix& zs = a.latents.semantic_refined[r];
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      EXPECT_GE(f.data()[i], std::min(zb.data()[i], zs.data()[i]) - 1e-12);
      EXPECT_LE(f.data()[i], std::max(zb.data()[i], zs.data()[i]) + 1e-12);
    }
  }
}

TEST_F(StageTwo, CheckpointRoundTripPreservesOutputs) {
  testing::TempDir tmp("model_ckpt");
  DuoGestureModel model = make_model(*cfg_);
  Trainer trainer(model, *clips_);
  trainer.train_step({0, 1}, 0);
  model.save(tmp / "m");
  const DuoGestureModel loaded = DuoGestureModel::load(tmp / "m");
  EXPECT_EQ(loaded.params().hash(), model.params().hash());
  EXPECT_EQ(loaded.codecs().hash(), model.codecs().hash());
  EXPECT_EQ(loaded.config().hash(), model.config().hash());
  EXPECT_EQ(loaded.generate((*clips_)[2].features).motion.frames, model.generate((*clips_)[2].features).motion.frames);
}

TEST_F(StageTwo, RunLogRecordsConfigAndSeed) {
  DuoGestureModel model = make_model(*cfg_);
  Trainer trainer(model, *clips_);
  const std::vector<EpochLog> logs = {trainer.run_epoch(0)};
  const auto j = nlohmann::json::parse(run_log_json(*cfg_, logs));
  EXPECT_EQ(j["config_hash"].get<std::uint64_t>(), cfg_->hash());
  EXPECT_EQ(j["seed"].get<std::uint64_t>(), cfg_->seed);
  ASSERT_EQ(j["epochs"].size(), 1u);
  EXPECT_EQ(j["epochs"][0]["steps"].get<int>(), 2);
}

TEST_F(StageTwo, SemanticFeaturesClusterByTriggerWord) {
  DuoGestureModel model = make_model(*cfg_);
  Trainer trainer(model, *clips_);
  for (int e = 0; e < 3; ++e) trainer.run_epoch(e);
  // Rows of S_m on frames covered by a trigger word, with the word id.
  std::vector<std::pair<int, Eigen::VectorXd>> rows;
  ag::NoGradGuard guard;
  SynthSpec spec = SynthSpec::matching(*cfg_);
  for (const Clip& clip : *clips_) {
    const Matrix s_m = model.forward(clip.features, nullptr).semantic.s_m.value();
    for (const auto& span : clip.motion.word_spans) {
      if (span.word_id >= spec.n_triggers) continue;
      rows.emplace_back(span.word_id, s_m.row((span.start + span.end) / 2).transpose());
    }
  }
  double same = 0.0, diff = 0.0;
  int n_same = 0, n_diff = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double cos = rows[i].second.dot(rows[j].second) / (rows[i].second.norm() * rows[j].second.norm());
      if (rows[i].first == rows[j].first) {
        same += cos;
        ++n_same;
      } else {
        diff += cos;
        ++n_diff;
      }
    }
  }
  ASSERT_GT(n_same, 0);
  ASSERT_GT(n_diff, 0);
  EXPECT_GT(same / n_same, diff / n_diff);
}

TEST(TrainerTest, EmptyDatasetIsRejected) {
  ModelConfig cfg = ModelConfig::desk();
  cfg.codec_steps = 1;
  SynthSpec spec = SynthSpec::matching(cfg);
  spec.n_clips = 1;
  const auto clips = synth_dataset(spec);
  DuoGestureModel model(cfg, pretrain_codec({clips[0].motion}, cfg));
  EXPECT_THROW(Trainer(model, {}), DataError);
}

}  // namespace
}  // namespace duogesture
