#include <gtest/gtest.h>

#include "duogesture/blender.hpp"
#include "duogesture/errors.hpp"
#include "gradcheck.hpp"

namespace duogesture {
namespace {

using ag::Matrix;
using ag::Var;
using testing::random_matrix;

double gap(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

class StreamTest : public ::testing::Test {
 protected:
  ModelConfig cfg = ModelConfig::desk();
  nn::ParamStore store;
  Rng rng{31};
  SeedEncoder seed_encoder{store, cfg, rng};
  StreamBackbone beat{store, "beat", cfg, cfg.timing_dim, rng};
  StreamBackbone semantic{store, "semantic", cfg, cfg.cond_dim, rng};
  Var seed = seed_encoder(ag::constant(random_matrix(kSeedFrames, cfg.joints * kRot6d, rng)));
};

TEST_F(StreamTest, BeatStreamLatentShapes) {
  const BodyLatents z = beat(seed, 0, ag::constant(random_matrix(cfg.clip_length, cfg.timing_dim, rng)));
  for (const Var& v : z) {
    EXPECT_EQ(v.rows(), cfg.clip_length / cfg.latent_rate_body);
    EXPECT_EQ(v.cols(), cfg.cond_dim);
    EXPECT_TRUE(v.value().allFinite());
  }
}

TEST_F(StreamTest, SpeakerIdentityChangesLatents) {
  const Var timing = ag::constant(random_matrix(cfg.clip_length, cfg.timing_dim, rng));
  Rng pick(3);
  for (int pair = 0; pair < 10; ++pair) {
    const int a = static_cast<int>(pick.index(cfg.num_speakers));
    int b = static_cast<int>(pick.index(cfg.num_speakers - 1));
    if (b >= a) ++b;
    const BodyLatents za = beat(seed, a, timing);
    const BodyLatents zb = beat(seed, b, timing);
    EXPECT_GT(gap(za[0].value(), zb[0].value()), 0.0) << a << " vs " << b;
  }
}

TEST_F(StreamTest, UnknownSpeakerIsRejected) {
  const Var timing = ag::zeros(cfg.clip_length, cfg.timing_dim);
  EXPECT_THROW(beat(seed, cfg.num_speakers, timing), DataError);
  EXPECT_THROW(beat(seed, -1, timing), DataError);
}

TEST_F(StreamTest, BeatStreamConsumesTiming) {
  const BodyLatents zero = beat(seed, 1, ag::zeros(cfg.clip_length, cfg.timing_dim));
  const BodyLatents live = beat(seed, 1, ag::constant(random_matrix(cfg.clip_length, cfg.timing_dim, rng)));
  for (int r = 0; r < 3; ++r) EXPECT_GT(gap(zero[r].value(), live[r].value()), 1e-6);
}

TEST_F(StreamTest, ZeroGateGivesSemanticIndependentBaseline) {
  const Var psi_zero = ag::zeros(cfg.clip_length, 1);
  const Var s_m = ag::constant(random_matrix(cfg.clip_length, cfg.cond_dim, rng));
  const BodyLatents gated = semantic(seed, 2, ag::mul(psi_zero, s_m));
  const BodyLatents baseline = semantic(seed, 2, ag::zeros(cfg.clip_length, cfg.cond_dim));
  for (int r = 0; r < 3; ++r) EXPECT_EQ(gated[r].value(), baseline[r].value());
}

TEST_F(StreamTest, SingleFramePerturbationPropagates) {
  Matrix s_m = random_matrix(cfg.clip_length, cfg.cond_dim, rng);
  const BodyLatents a = semantic(seed, 2, ag::constant(s_m));
  s_m.row(10).array() += 1.0;
  const BodyLatents b = semantic(seed, 2, ag::constant(s_m));
  double total = 0.0;
  for (int r = 0; r < 3; ++r) total += gap(a[r].value(), b[r].value());
  EXPECT_GT(total, 1e-8);
}

TEST_F(StreamTest, SeedEncoderIsFrozenAndMaskTokenTrainable) {
  for (const auto& p : store.params()) {
    if (p.name.rfind("seed.", 0) == 0) EXPECT_FALSE(p.trainable) << p.name;
  }
  const nn::Parameter* mask = store.find("beat.mask_token");
  ASSERT_NE(mask, nullptr);
  EXPECT_TRUE(mask->trainable);
}

class HcaTest : public ::testing::Test {
 protected:
  ModelConfig cfg = ModelConfig::desk();
  nn::ParamStore store;
  Rng rng{41};
  Hca hca{store, "hca", cfg, rng};
  int len = ModelConfig::desk().latent_length_body();
};

TEST_F(HcaTest, ShapesPreserved) {
  const BodyLatents z = {ag::constant(random_matrix(len, cfg.cond_dim, rng)),
                         ag::constant(random_matrix(len, cfg.cond_dim, rng)),
                         ag::constant(random_matrix(len, cfg.cond_dim, rng))};
  const BodyLatents out = hca(z);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(out[r].rows(), len);
    EXPECT_EQ(out[r].cols(), cfg.cond_dim);
  }
}

TEST_F(HcaTest, ZeroSiblingsLeaveOnlyResidualPath) {
  const Var hand = ag::constant(random_matrix(len, cfg.cond_dim, rng));
  const BodyLatents out = hca({hand, ag::zeros(len, cfg.cond_dim), ag::zeros(len, cfg.cond_dim)});
  const nn::TransformerLayer& layer = hca.layers[0];
  const Var expected = ag::add(hand, layer.ff(layer.norm_ff(hand)));
  EXPECT_LT((out[0].value() - expected.value()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(HcaTest, HandOutputSymmetricInUpperAndLower) {
  const Var h = ag::constant(random_matrix(len, cfg.cond_dim, rng));
  const Var u = ag::constant(random_matrix(len, cfg.cond_dim, rng));
  const Var l = ag::constant(random_matrix(len, cfg.cond_dim, rng));
  EXPECT_EQ(hca({h, u, l})[0].value(), hca({h, l, u})[0].value());
}

TEST_F(HcaTest, LengthMismatchIsRejected) {
  EXPECT_THROW(hca({ag::zeros(len, cfg.cond_dim), ag::zeros(len - 1, cfg.cond_dim), ag::zeros(len, cfg.cond_dim)}),
               ShapeError);
}

TEST(FaceDecoderTest, QuarterRateLatentsAndDeterminism) {
  const ModelConfig cfg = ModelConfig::desk();
  nn::ParamStore store;
  Rng rng(51);
  FaceDecoder face(store, cfg, rng);
  const Var audio = ag::constant(random_matrix(cfg.clip_length, cfg.audio_dim, rng));
  const Var z = face(audio);
  EXPECT_EQ(z.rows(), cfg.clip_length / 4);
  EXPECT_EQ(z.cols(), cfg.cond_dim);
  EXPECT_EQ(z.value(), face(audio).value());
}

TEST(PoolPsi, MeanOverLatentWindows) {
  Matrix psi(6, 1);
  psi << 0.0, 1.0, 0.2, 0.4, 1.0, 1.0;
  const Matrix pooled = pool_psi(ag::constant(psi), 2).value();
  ASSERT_EQ(pooled.rows(), 3);
  EXPECT_DOUBLE_EQ(pooled(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(pooled(1, 0), 0.3);
  EXPECT_DOUBLE_EQ(pooled(2, 0), 1.0);
  EXPECT_THROW(pool_psi(ag::constant(psi), 4), ShapeError);
}

class FusionTest : public ::testing::Test {
 protected:
  ModelConfig cfg = ModelConfig::desk();
  Rng rng{61};
  RegionCodec codec{Region::upper, 6, cfg.latent_rate_body, cfg, rng};
  int len = ModelConfig::desk().latent_length_body();

  void SetUp() override {
    for (auto& book : codec.mutable_codebooks()) book = random_matrix(book.rows(), book.cols(), rng);
    codec.freeze();
  }
};

TEST_F(FusionTest, GateEndpointsReproduceSingleStreamTokens) {
  const Matrix b = random_matrix(len, cfg.cond_dim, rng);
  const Matrix s = random_matrix(len, cfg.cond_dim, rng);
  const FusionResult zero = fuse_quantize_decode(b, s, Matrix::Zero(len, 1), codec);
  const FusionResult one = fuse_quantize_decode(b, s, Matrix::Ones(len, 1), codec);
  EXPECT_EQ(zero.fused, b);
  EXPECT_EQ(one.fused, s);
  EXPECT_EQ(zero.tokens, codec.quantize(b).tokens);
  EXPECT_EQ(one.tokens, codec.quantize(s).tokens);
  EXPECT_EQ(zero.motion, codec.decode(zero.tokens));
  EXPECT_EQ(zero.motion.rows(), cfg.clip_length);
}

TEST_F(FusionTest, EqualStreamsAreFixedPointOfBlend) {
  const Matrix b = random_matrix(len, cfg.cond_dim, rng);
  const FusionResult r = fuse_quantize_decode(b, b, Matrix::Constant(len, 1, 0.5), codec);
  EXPECT_LT((r.fused - b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(FusionTest, FusedLatentStaysOnSegment) {
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix b = random_matrix(len, cfg.cond_dim, rng);
    const Matrix s = random_matrix(len, cfg.cond_dim, rng);
    Matrix psi(len, 1);
    for (int t = 0; t < len; ++t) psi(t, 0) = rng.uniform();
    const Matrix f = fuse(ag::constant(b), ag::constant(s), ag::constant(psi)).value();
    for (int t = 0; t < len; ++t) {
      for (int c = 0; c < cfg.cond_dim; ++c) {
        EXPECT_GE(f(t, c), std::min(b(t, c), s(t, c)) - 1e-12);
        EXPECT_LE(f(t, c), std::max(b(t, c), s(t, c)) + 1e-12);
      }
    }
  }
}

TEST_F(FusionTest, RepeatedRunsGiveIdenticalTokens) {
  const Matrix b = random_matrix(len, cfg.cond_dim, rng);
  const Matrix s = random_matrix(len, cfg.cond_dim, rng);
  const Matrix psi = Matrix::Constant(len, 1, 0.3);
  EXPECT_EQ(fuse_quantize_decode(b, s, psi, codec).tokens, fuse_quantize_decode(b, s, psi, codec).tokens);
}

TEST(FusionUnfrozen, CodecMustBeFrozen) {
  const ModelConfig cfg = ModelConfig::desk();
  Rng rng(71);
  RegionCodec codec(Region::hand, 4, cfg.latent_rate_body, cfg, rng);
  const int len = cfg.latent_length_body();
  EXPECT_THROW(fuse_quantize_decode(Matrix::Zero(len, cfg.cond_dim), Matrix::Zero(len, cfg.cond_dim),
                                    Matrix::Zero(len, 1), codec),
               ConfigError);
}

TEST(FuseGradient, MatchesFiniteDifferences) {
  Rng rng(81);
  const Matrix b = random_matrix(4, 3, rng);
  const Matrix s = random_matrix(4, 3, rng);
  Matrix psi(4, 1);
  psi << 0.1, 0.5, 0.9, 0.3;
  auto f = [&](const Var& p) { return ag::sum(ag::square(fuse(ag::constant(b), ag::constant(s), p))); };
  EXPECT_LT(testing::gradient_error(f, psi), 1e-6);
}

}  // namespace
}  // namespace duogesture
