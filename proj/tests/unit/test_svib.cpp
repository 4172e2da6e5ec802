#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "duogesture/errors.hpp"
#include "duogesture/svib.hpp"
#include "gradcheck.hpp"

namespace duogesture {
namespace {

using ag::Matrix;
using ag::Var;
using testing::random_matrix;

class SvibTest : public ::testing::Test {
 protected:
  ModelConfig cfg = ModelConfig::desk();
  nn::ParamStore store;
  Rng rng{21};
  Svib svib{store, cfg, rng};
};

TEST_F(SvibTest, TimingProjectionShapeAndZeroAudio) {
  const Var t = svib.timing_projection(ag::constant(random_matrix(64, cfg.audio_dim, rng)));
  EXPECT_EQ(t.rows(), 64);
  EXPECT_EQ(t.cols(), cfg.timing_dim);
  EXPECT_TRUE(t.value().allFinite());

  for (auto& p : store.params()) {
    if (p.name.find("bias") != std::string::npos || p.name.find("beta") != std::string::npos) {
      p.var.mutable_value().setZero();
    }
  }
  const Var zero = svib.timing_projection(ag::zeros(64, cfg.audio_dim));
  EXPECT_EQ(zero.value().cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(SvibTest, ShiftedAudioStillGivesFiniteTiming) {
  const Matrix a = random_matrix(32, cfg.audio_dim, rng);
  const Var t = svib.timing_projection(ag::constant((a.array() + 5.0).matrix()));
  EXPECT_EQ(t.rows(), 32);
  EXPECT_TRUE(t.value().allFinite());
}

TEST_F(SvibTest, TimingIgnoresWordInformationByConstruction) {
  // The timing path takes audio only; its output is identical whatever the semantic input is.
  const Var audio = ag::constant(random_matrix(16, cfg.audio_dim, rng));
  const SvibOutput a = svib(ag::constant(random_matrix(16, cfg.cond_dim, rng)), audio, nullptr);
  const SvibOutput b = svib(ag::constant(random_matrix(16, cfg.cond_dim, rng)), audio, nullptr);
  EXPECT_EQ(a.timing.value(), b.timing.value());
}

TEST_F(SvibTest, BottleneckZeroInputsAndWeights) {
  for (auto* lin : {&svib.mu_head, &svib.logvar_head}) {
    lin->weight.mutable_value().setZero();
    lin->bias.mutable_value().setZero();
  }
  for (int L : {1, 5, 64}) {
    const auto [mu, logvar] = svib.bottleneck(ag::zeros(L, cfg.cond_dim), ag::zeros(L, cfg.timing_dim));
    EXPECT_EQ(mu.rows(), L);
    EXPECT_EQ(mu.cols(), cfg.bottleneck_dim);
    EXPECT_EQ(mu.value().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(logvar.value().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST_F(SvibTest, BottleneckMeanGradientMatchesFiniteDifferences) {
  const Var s_m = ag::constant(random_matrix(6, cfg.cond_dim, rng));
  const Var timing = ag::constant(random_matrix(6, cfg.timing_dim, rng));
  const Matrix weights = random_matrix(6, cfg.bottleneck_dim, rng);
  auto f = [&](const Var& w) {
    Svib local = svib;
    local.mu_head.weight = w;
    return ag::sum(ag::mul(local.bottleneck(s_m, timing).first, ag::constant(weights)));
  };
  EXPECT_LT(testing::gradient_error(f, svib.mu_head.weight.value()), 1e-4);
}

TEST_F(SvibTest, LogvarIsClampedAndDimensionsChecked) {
  svib.logvar_head.bias.mutable_value().setConstant(-50.0);
  svib.logvar_head.weight.mutable_value().setZero();
  const Var mu_in = ag::constant(random_matrix(4, cfg.cond_dim, rng));
  const Var t_in = ag::constant(random_matrix(4, cfg.timing_dim, rng));
  const auto [mu, logvar] = svib.bottleneck(mu_in, t_in);
  EXPECT_EQ(logvar.value().maxCoeff(), cfg.logvar_min);
  Rng draw(3);
  const Var z = sample(mu, logvar, &draw);
  EXPECT_LT((z.value() - mu.value()).cwiseAbs().maxCoeff(), 6.0 * std::exp(-5.0));
  EXPECT_THROW(svib.bottleneck(ag::zeros(4, cfg.cond_dim), ag::zeros(3, cfg.timing_dim)), ShapeError);
  EXPECT_THROW(svib.bottleneck(ag::zeros(4, cfg.cond_dim + 1), ag::zeros(4, cfg.timing_dim)), ShapeError);
}

TEST(Sample, DeterministicModeReturnsMeanExactly) {
  Rng rng(5);
  const Var mu = ag::constant(random_matrix(8, 16, rng));
  const Var logvar = ag::constant(random_matrix(8, 16, rng));
  Matrix eps;
  const Var z = sample(mu, logvar, nullptr, &eps);
  EXPECT_EQ(z.value(), mu.value());
  EXPECT_EQ(eps.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sample, RecordedNoiseReproducesLatent) {
  Rng rng(6);
  const Var mu = ag::constant(random_matrix(8, 16, rng));
  const Var logvar = ag::constant(random_matrix(8, 16, rng));
  Matrix eps;
  Rng draw(9);
  const Var z = sample(mu, logvar, &draw, &eps);
  const Matrix expected = mu.value().array() + (logvar.value().array() * 0.5).exp() * eps.array();
  EXPECT_LT((z.value() - expected).cwiseAbs().maxCoeff(), 1e-14);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

TEST(Sample, DrawsFollowDiagonalGaussian) {
  const int n = 100000;
  Matrix mu_row(1, 4), lv_row(1, 4);
  mu_row << 0.5, -1.0, 2.0, 0.0;
  lv_row << 0.0, -1.0, 0.7, -3.0;
  const Var mu = ag::constant(mu_row.replicate(n, 1));
  const Var logvar = ag::constant(lv_row.replicate(n, 1));
  Rng rng(12);
  const Matrix z = sample(mu, logvar, &rng).value();
  for (int d = 0; d < 4; ++d) {
    const double sigma = std::exp(0.5 * lv_row(0, d));
    EXPECT_LT(std::abs(z.col(d).mean() - mu_row(0, d)), 3.0 * sigma / std::sqrt(n)) << "dim " << d;
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) u[i] = (z(i, d) - mu_row(0, d)) / sigma;
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = normal_cdf(u[i]);
      ks = std::max({ks, std::abs(c - static_cast<double>(i) / n), std::abs(c - static_cast<double>(i + 1) / n)});
    }
    // Kolmogorov critical value at p = 0.01.
    EXPECT_LT(ks * std::sqrt(static_cast<double>(n)), 1.628) << "dim " << d;
  }
}

TEST_F(SvibTest, InterpreterEqualLogitsGiveHalf) {
  svib.interpreter.second.weight.mutable_value().setZero();
  svib.interpreter.second.bias.mutable_value().setZero();
  const Var psi = svib.gate(ag::constant(random_matrix(5, cfg.bottleneck_dim, rng)));
  for (int t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(psi.value()(t, 0), 0.5);
}

TEST_F(SvibTest, InterpreterSaturatesTowardSemantic) {
  svib.interpreter.second.weight.mutable_value().setZero();
  svib.interpreter.second.bias.mutable_value() << -20.0, 20.0;
  const Var psi = svib.gate(ag::constant(random_matrix(3, cfg.bottleneck_dim, rng)));
  for (int t = 0; t < 3; ++t) EXPECT_GT(psi.value()(t, 0), 1.0 - 1e-8);
}

TEST_F(SvibTest, GateProbabilitiesSumToOneAndStayInUnitInterval) {
  const Var z = ag::constant(random_matrix(40, cfg.bottleneck_dim, rng, 5.0));
  const Matrix probs = ag::softmax_rows(svib.gate_logits(z)).value();
  const Matrix psi = svib.gate(z).value();
  for (int t = 0; t < 40; ++t) {
    EXPECT_EQ(psi(t, 0), probs(t, 1));
    EXPECT_NEAR(probs(t, 0) + psi(t, 0), 1.0, 1e-15);
    EXPECT_GE(psi(t, 0), 0.0);
    EXPECT_LE(psi(t, 0), 1.0);
  }
}

TEST_F(SvibTest, FullPassRecordsConsistentTrace) {
  const Var s_m = ag::constant(random_matrix(16, cfg.cond_dim, rng));
  const Var audio = ag::constant(random_matrix(16, cfg.audio_dim, rng));
  Rng draw(4);
  const GateTrace t = svib(s_m, audio, &draw).trace();
  const Matrix expected = t.mu.array() + (t.logvar.array() * 0.5).exp() * t.eps.array();
  EXPECT_LT((t.z - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(t.logvar.allFinite());
  const auto s2 = t.sigma2();
  ASSERT_EQ(s2.size(), 16u);
  EXPECT_NEAR(s2[3], t.logvar.row(3).array().exp().mean(), 1e-15);
  const GateTrace det = svib(s_m, audio, nullptr).trace();
  EXPECT_EQ(det.z, det.mu);
}

TEST(KlFreeBits, StandardPosteriorHitsTheFloorEverywhere) {
  const KlResult r = kl_free_bits(ag::zeros(10, 16), ag::zeros(10, 16), 0.5);
  for (double d : r.per_dim) EXPECT_EQ(d, 0.0);
  EXPECT_DOUBLE_EQ(r.loss.item(), 8.0);
}

TEST(KlFreeBits, UnitMeanShiftCostsHalfANat) {
  Matrix mu = Matrix::Zero(3, 16);
  mu.col(2).setOnes();
  const KlResult r = kl_free_bits(ag::constant(mu), ag::zeros(3, 16), 0.5);
  EXPECT_DOUBLE_EQ(r.per_dim[2], 0.5);
}

TEST(KlFreeBits, DimensionsBelowFloorGetExactlyZeroGradient) {
  Matrix mu = Matrix::Zero(4, 16);
  mu.col(0).setConstant(std::sqrt(0.6));  // kl = 0.3 < 0.5
  mu.col(1).setConstant(2.0);             // kl = 2.0 > 0.5
  auto f = [](const Var& m) { return kl_free_bits(m, ag::zeros(4, 16), 0.5).loss; };
  const Matrix analytic = testing::analytic_gradient(f, mu);
  const Matrix numeric = testing::numeric_gradient(f, mu);
  EXPECT_EQ(analytic.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(numeric.col(0).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(analytic(0, 1), 2.0 / 4.0, 1e-12);
  EXPECT_LT(testing::max_relative_error(analytic, numeric), 1e-6);
}

TEST(KlFreeBits, LossNeverBelowFloorTimesDims) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix mu = random_matrix(6, 16, rng, trial % 2 == 0 ? 0.3 : 2.0);
    const Matrix lv = random_matrix(6, 16, rng, 0.3);
    const KlResult r = kl_free_bits(ag::constant(mu), ag::constant(lv), 0.5);
    EXPECT_GE(r.loss.item(), 16 * 0.5 - 1e-12);
    const bool all_below = std::all_of(r.per_dim.begin(), r.per_dim.end(), [](double d) { return d <= 0.5; });
    EXPECT_EQ(r.loss.item() == 8.0, all_below);
  }
}

TEST(KlFreeBits, GradientMatchesFiniteDifferencesAboveFloor) {
  Rng rng(9);
  const Matrix mu = random_matrix(5, 16, rng, 2.0);
  const Matrix lv = random_matrix(5, 16, rng, 0.5);
  auto f_mu = [&](const Var& m) { return kl_free_bits(m, ag::constant(lv), 0.5).loss; };
  auto f_lv = [&](const Var& l) { return kl_free_bits(ag::constant(mu), l, 0.5).loss; };
  EXPECT_LT(testing::gradient_error(f_mu, mu), 1e-4);
  EXPECT_LT(testing::gradient_error(f_lv, lv), 1e-4);
}

TEST(SemanticLoss, PerfectPredictionCostsOnlyTheClampFloor) {
  const std::vector<int> flags = {1, 0, 0, 1, 0};
  Matrix psi(5, 1);
  for (int t = 0; t < 5; ++t) psi(t, 0) = flags[t];
  EXPECT_LT(semantic_loss(ag::constant(psi), flags, 3.0).item(), 2e-5);
}

TEST(SemanticLoss, HalfProbabilityClosedForm) {
  const std::vector<int> flags = {1, 0, 1, 0, 1, 0};
  const double v = semantic_loss(ag::constant(Matrix::Constant(6, 1, 0.5)), flags, 3.0).item();
  EXPECT_NEAR(v, 2.0 * std::log(2.0), 1e-12);
}

TEST(SemanticLoss, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  Matrix psi(12, 1);
  std::vector<int> flags(12);
  for (int t = 0; t < 12; ++t) {
    psi(t, 0) = rng.uniform(0.05, 0.95);
    flags[t] = static_cast<int>(rng.index(2));
  }
  auto f = [&](const Var& p) { return semantic_loss(p, flags, 3.0); };
  EXPECT_LT(testing::gradient_error(f, psi), 1e-4);
  EXPECT_THROW(semantic_loss(ag::constant(psi), std::vector<int>(12, 2), 3.0), DataError);
}

}  // namespace
}  // namespace duogesture
