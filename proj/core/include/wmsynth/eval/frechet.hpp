#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wmsynth/sim/render.hpp"

namespace wmsynth::eval {

// Fixed random convolutional features: 16 filters of 5x5xC with stride 4 on
// [0, 1] pixels, ReLU, then mean pooling over the four image quadrants.
class RandomConvFeatures {
 public:
  explicit RandomConvFeatures(std::uint64_t seed, std::size_t filters = 16, std::size_t kernel = 5,
                              std::size_t stride = 4, std::size_t channels = 3);
  std::size_t dim() const { return filters_ * 4; }
  std::string id() const;
  Eigen::VectorXd features(const sim::Frame& f) const;
  Eigen::MatrixXd features(std::span<const sim::Frame> frames) const;  // one row per frame

 private:
  std::uint64_t seed_;
  std::size_t filters_, kernel_, stride_, channels_;
  std::vector<double> weights_;  // [filter][ky][kx][c]
  std::vector<double> bias_;
};

struct FrechetReport {
  double distance = 0.0;
  std::string extractor;
  std::size_t count_a = 0, count_b = 0;
  bool shrinkage = false;  // covariance shrinkage applied (fewer samples than feature dims)
};

// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}). The cross term is computed
// as Tr((S1^{1/2} S2 S1^{1/2})^{1/2}) with symmetric eigendecompositions and
// negative eigenvalues clamped to zero.
FrechetReport frechet_from_features(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double shrinkage = 1e-3);
double frechet_from_moments(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                            const Eigen::MatrixXd& s2);

// Throws std::invalid_argument when either set has fewer than 32 frames.
FrechetReport frechet_feature_distance(std::span<const sim::Frame> a, std::span<const sim::Frame> b,
                                       std::uint64_t extractor_seed);

}  // namespace wmsynth::eval
