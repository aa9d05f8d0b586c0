#include "wmsynth/eval/frechet.hpp"

#include <cmath>
#include <stdexcept>

#include "wmsynth/numerics/rng.hpp"

namespace wmsynth::eval {

RandomConvFeatures::RandomConvFeatures(std::uint64_t seed, std::size_t filters, std::size_t kernel,
                                       std::size_t stride, std::size_t channels)
    : seed_(seed), filters_(filters), kernel_(kernel), stride_(stride), channels_(channels) {
  numerics::Rng rng(numerics::derive_seed(seed, "frechet.extractor"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(kernel * kernel * channels));
  weights_.resize(filters * kernel * kernel * channels);
  for (auto& w : weights_) w = numerics::standard_normal(rng) * scale;
  bias_.resize(filters);
  for (auto& b : bias_) b = 0.1 * numerics::standard_normal(rng);
}

std::string RandomConvFeatures::id() const {
  return "randconv-f" + std::to_string(filters_) + "-k" + std::to_string(kernel_) + "-s" + std::to_string(stride_) +
         "-seed" + std::to_string(seed_);
}

Eigen::VectorXd RandomConvFeatures::features(const sim::Frame& f) const {
  const auto& g = f.geometry;
  if (g.channels != channels_ || g.height < kernel_ || g.width < kernel_) {
    throw std::invalid_argument("random conv features: unsupported frame geometry");
  }
  const std::size_t oh = (g.height - kernel_) / stride_ + 1, ow = (g.width - kernel_) / stride_ + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  std::vector<double> counts(4, 0.0);
  std::vector<double> patch(kernel_ * kernel_ * channels_);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      std::size_t i = 0;
      for (std::size_t ky = 0; ky < kernel_; ++ky) {
        for (std::size_t kx = 0; kx < kernel_; ++kx) {
          const auto* px = f.at(r * stride_ + ky, c * stride_ + kx);
          for (std::size_t ch = 0; ch < channels_; ++ch) patch[i++] = px[ch] / 255.0;
        }
      }
      const std::size_t q = (r * 2 / oh) * 2 + (c * 2 / ow);
      counts[q] += 1.0;
      for (std::size_t k = 0; k < filters_; ++k) {
        double acc = bias_[k];
        const double* w = weights_.data() + k * patch.size();
        for (std::size_t j = 0; j < patch.size(); ++j) acc += w[j] * patch[j];
        out[static_cast<Eigen::Index>(q * filters_ + k)] += std::max(acc, 0.0);
      }
    }
  }
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t k = 0; k < filters_; ++k) out[static_cast<Eigen::Index>(q * filters_ + k)] /= counts[q];
  }
  return out;
}

Eigen::MatrixXd RandomConvFeatures::features(std::span<const sim::Frame> frames) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < frames.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = features(frames[i]).transpose();
  return m;
}

namespace {

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void moments(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
  cov = (c.transpose() * c) / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
}

}  // namespace

double frechet_from_moments(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                            const Eigen::MatrixXd& s2) {
  if (mu1.size() != mu2.size() || s1.rows() != s2.rows() || s1.rows() != mu1.size()) {
    throw std::invalid_argument("frechet: moment dimensions differ");
  }
  const Eigen::MatrixXd r1 = sqrt_psd(s1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r1 * s2 * r1);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

FrechetReport frechet_from_features(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double shrinkage) {
  if (a.cols() != b.cols()) throw std::invalid_argument("frechet: feature dimensions differ");
  FrechetReport r;
  r.count_a = static_cast<std::size_t>(a.rows());
  r.count_b = static_cast<std::size_t>(b.rows());
  Eigen::VectorXd m1, m2;
  Eigen::MatrixXd s1, s2;
  moments(a, m1, s1);
  moments(b, m2, s2);
  if (a.rows() < a.cols() || b.rows() < b.cols()) {
    r.shrinkage = true;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.cols(), a.cols());
    s1 += shrinkage * eye;
    s2 += shrinkage * eye;
  }
  r.distance = frechet_from_moments(m1, s1, m2, s2);
  return r;
}

FrechetReport frechet_feature_distance(std::span<const sim::Frame> a, std::span<const sim::Frame> b,
                                       std::uint64_t extractor_seed) {
  if (a.size() < 32 || b.size() < 32) {
    throw std::invalid_argument("frechet_feature_distance: each set needs at least 32 frames (got " +
                                std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
  }
  const RandomConvFeatures fx(extractor_seed);
  FrechetReport r = frechet_from_features(fx.features(a), fx.features(b));
  r.extractor = fx.id();
  return r;
}

}  // namespace wmsynth::eval
