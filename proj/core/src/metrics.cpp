#include "duogesture/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "duogesture/errors.hpp"
#include "duogesture/kinematics.hpp"
#include "duogesture/regions.hpp"

namespace duogesture {
namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  const double denom = std::max<Eigen::Index>(1, x.rows() - 1);
  return (c.transpose() * c) / denom;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_from_stats(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                          const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b) {
  if (mean_a.size() != mean_b.size() || cov_a.rows() != cov_b.rows() || cov_a.rows() != mean_a.size()) {
    throw ShapeError("frechet: dimension mismatch");
  }
  const Eigen::MatrixXd sa = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = sa * cov_b * sa;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
  return std::max(0.0, d);
}

double frechet(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b) {
  if (feats_a.cols() != feats_b.cols()) throw ShapeError("frechet: feature dimensions differ");
  if (feats_a.rows() < 1 || feats_b.rows() < 1) throw DataError("frechet: empty feature set");
  require_finite(feats_a, "frechet input a");
  require_finite(feats_b, "frechet input b");
  const Eigen::VectorXd ma = feats_a.colwise().mean();
  const Eigen::VectorXd mb = feats_b.colwise().mean();
  return frechet_from_stats(ma, covariance(feats_a, ma), mb, covariance(feats_b, mb));
}

bool frechet_rank_warning(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b) {
  return feats_a.rows() < feats_a.cols() + 1 || feats_b.rows() < feats_b.cols() + 1;
}

double diversity_l1(const std::vector<MotionSequence>& motions) {
  if (motions.size() < 2) throw DataError("diversity needs at least two sequences");
  const std::size_t n = motions.front().frames.size();
  for (const auto& m : motions) {
    if (m.frames.size() != n || m.length != motions.front().length || m.joints != motions.front().joints) {
      throw ShapeError("diversity: sequences differ in shape");
    }
  }
  if (n == 0) throw ShapeError("diversity: empty sequences");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < motions.size(); ++i) {
    for (std::size_t j = i + 1; j < motions.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += std::abs(static_cast<double>(motions[i].frames[k]) - static_cast<double>(motions[j].frames[k]));
      }
      total += s / static_cast<double>(n);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

std::vector<double> motion_beats(const MotionSequence& motion) {
  const auto speed = mean_angular_speed(motion, arm_chain_joints(motion.joints));
  std::vector<double> beats;
  for (int t = 1; t + 1 < motion.length; ++t) {
    if (speed[t] < speed[t - 1] && speed[t] <= speed[t + 1]) beats.push_back(t / motion.fps);
  }
  return beats;
}

double beat_alignment(const std::vector<double>& audio_onsets, const std::vector<double>& beats, double sigma_s) {
  if (audio_onsets.empty()) throw DataError("beat_alignment: no audio onsets");
  if (!(sigma_s > 0)) throw ConfigError("beat_alignment: sigma must be positive");
  double total = 0.0;
  for (double onset : audio_onsets) {
    double best = std::numeric_limits<double>::infinity();
    for (double b : beats) best = std::min(best, std::abs(onset - b));
    if (std::isfinite(best)) total += std::exp(-best * best / (2.0 * sigma_s * sigma_s));
  }
  return total / static_cast<double>(audio_onsets.size());
}

double beat_alignment(const std::vector<double>& audio_onsets, const MotionSequence& motion, double sigma_s) {
  const double duration = motion.length / motion.fps;
  for (double t : audio_onsets) {
    if (t < 0.0 || t > duration) throw DataError("beat_alignment: onset outside the clip");
  }
  return beat_alignment(audio_onsets, motion_beats(motion), sigma_s);
}

MotionFeatureizer::MotionFeatureizer(int joints, FeatureizerOptions options)
    : joints_(joints), options_(options), store_(std::make_unique<nn::ParamStore>()) {
  if (joints <= 0 || options.chunk <= 0 || options.feature_dim <= 0) throw ConfigError("invalid featureizer shape");
  Rng rng(options.seed, 0xFEA7);
  const int in = options.chunk * joints * kRot6d;
  encoder_ = nn::Mlp(*store_, "enc", in, options.hidden, options.feature_dim, rng);
  decoder_ = nn::Mlp(*store_, "dec", options.feature_dim, options.hidden, in, rng);
}

ag::Matrix MotionFeatureizer::chunks(const std::vector<MotionSequence>& motions) const {
  const int width = options_.chunk * joints_ * kRot6d;
  std::size_t rows = 0;
  for (const auto& m : motions) {
    if (m.joints != joints_) throw ShapeError("featureizer: joint count mismatch");
    rows += static_cast<std::size_t>(m.length / options_.chunk);
  }
  ag::Matrix out(static_cast<Eigen::Index>(rows), width);
  Eigen::Index r = 0;
  for (const auto& m : motions) {
    for (int c = 0; c + options_.chunk <= m.length; c += options_.chunk) {
      const std::size_t off = static_cast<std::size_t>(c) * joints_ * kRot6d;
      for (int k = 0; k < width; ++k) out(r, k) = m.frames[off + k];
      ++r;
    }
  }
  return out;
}

double MotionFeatureizer::fit(const std::vector<MotionSequence>& motions) {
  const ag::Matrix data = chunks(motions);
  if (data.rows() == 0) throw DataError("featureizer: no complete chunks");
  nn::Adam opt(*store_, {options_.lr});
  Rng rng(options_.seed, 0xF17);
  const Eigen::Index batch = std::min<Eigen::Index>(64, data.rows());
  double last = 0.0;
  for (int step = 0; step < options_.steps; ++step) {
    ag::Matrix x(batch, data.cols());
    for (Eigen::Index i = 0; i < batch; ++i) x.row(i) = data.row(static_cast<Eigen::Index>(rng.index(data.rows())));
    const ag::Var in = ag::constant(x);
    const ag::Var loss = ag::mean(ag::square(decoder_(encoder_(in)) - in));
    ag::backward(loss);
    opt.step();
    last = loss.item();
  }
  return last;
}

Eigen::MatrixXd MotionFeatureizer::features(const std::vector<MotionSequence>& motions) const {
  ag::NoGradGuard guard;
  const ag::Var f = encoder_(ag::constant(chunks(motions)));
  return f.value();
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0;
  double neg = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        rank_sum += mid_rank;
        pos += 1.0;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) throw DataError("roc_auc needs both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double stddev(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace duogesture
