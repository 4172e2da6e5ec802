#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "duogesture/nn.hpp"
#include "duogesture/types.hpp"

namespace duogesture {

/// Fréchet distance between Gaussian fits of two feature sets (rows are samples).
/// The cross term uses tr(sqrt(sqrt(Sa) Sb sqrt(Sa))) with eigenvalues clipped at 0.
double frechet(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);
double frechet_from_stats(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                          const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b);
/// True when either set has fewer than D + 1 rows (singular covariance).
bool frechet_rank_warning(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

/// Mean over unordered pairs of the mean absolute elementwise difference.
double diversity_l1(const std::vector<MotionSequence>& motions);

/// Times (s) of strict local minima of the mean arm-chain angular speed.
std::vector<double> motion_beats(const MotionSequence& motion);

/// Mean over onsets of exp(-d^2 / (2 sigma^2)), d = distance to the nearest motion beat.
double beat_alignment(const std::vector<double>& audio_onsets, const MotionSequence& motion,
                      double sigma_s = 0.1);
double beat_alignment(const std::vector<double>& audio_onsets, const std::vector<double>& motion_beats,
                      double sigma_s = 0.1);

/// Area under the ROC curve of `scores` against binary `labels` (ties count half).
/// Throws DataError when either class is absent or the lengths differ.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Population standard deviation.
double stddev(const std::vector<double>& values);

struct FeatureizerOptions {
  int chunk = 8;  // frames per feature row
  int hidden = 64;
  int feature_dim = 32;
  int steps = 400;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Default gesture featureizer: an MLP autoencoder over non-overlapping frame chunks.
/// Feature values depend on training data and seed, so distances computed with it are
/// only comparable between runs that share both.
class MotionFeatureizer {
 public:
  MotionFeatureizer(int joints, FeatureizerOptions options = {});

  /// Reconstruction training; returns the final mean squared error.
  double fit(const std::vector<MotionSequence>& motions);
  /// One row per complete chunk across all sequences.
  Eigen::MatrixXd features(const std::vector<MotionSequence>& motions) const;

 private:
  ag::Matrix chunks(const std::vector<MotionSequence>& motions) const;

  int joints_;
  FeatureizerOptions options_;
  std::unique_ptr<nn::ParamStore> store_;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
};

}  // namespace duogesture
