#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "ipcc/error.hpp"
#include "ipcc/rng.hpp"

namespace ipcc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kSymmetryTolerance = 1e-12;

// A Cholesky pivot must exceed this fraction of the largest diagonal entry.
// Rank-deficient covariances (the raw projected form) land at ~1e-16.
inline constexpr double kPivotTolerance = 1e-12;

inline double max_asymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Gaussian over the stacked positions [x1, y1, ..., xN, yN] at one step.
class JointGaussian {
 public:
  JointGaussian(Vector mean, Matrix cov) : mean_(std::move(mean)) {
    const Index dim = mean_.size();
    if (dim == 0 || dim % 2 != 0) {
      throw Error(ErrorKind::Dimension, "mean length must be a positive even number, got " +
                                            std::to_string(dim));
    }
    if (cov.rows() != dim || cov.cols() != dim) {
      throw Error(ErrorKind::Dimension, "covariance must be " + std::to_string(dim) + "x" +
                                            std::to_string(dim));
    }
    if (!mean_.allFinite() || !cov.allFinite()) {
      throw Error(ErrorKind::NonFinite, "joint gaussian has non-finite entries");
    }
    if (const double asym = max_asymmetry(cov); asym > kSymmetryTolerance) {
      throw Error(ErrorKind::Domain, "covariance asymmetry " + std::to_string(asym));
    }
    cov_ = symmetrized(cov);
  }

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }
  Index dim() const noexcept { return mean_.size(); }
  Index agent_count() const noexcept { return mean_.size() / 2; }

 private:
  Vector mean_;
  Matrix cov_;
};

/// Lower-triangular factor of a positive definite matrix.
struct CholeskyFactor {
  Matrix lower;
  double log_det = 0.0;

  Index dim() const noexcept { return lower.rows(); }

  /// L^{-1} b
  Vector whiten(const Vector& b) const {
    return lower.triangularView<Eigen::Lower>().solve(b);
  }

  /// A^{-1} b through two triangular solves.
  Vector solve(const Vector& b) const {
    const Vector half = whiten(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(half);
  }

  Matrix solve_matrix(const Matrix& b) const {
    const Matrix half = lower.triangularView<Eigen::Lower>().solve(b);
    return lower.transpose().triangularView<Eigen::Upper>().solve(half);
  }

  /// A^{-1}. Only needed where the full matrix enters a gradient.
  Matrix inverse() const { return symmetrized(solve_matrix(Matrix::Identity(dim(), dim()))); }

  Matrix reconstruct() const { return lower * lower.transpose(); }
};

inline Matrix tikhonov_regularize(const Matrix& cov, double delta) {
  if (cov.rows() != cov.cols()) {
    throw Error(ErrorKind::Dimension, "tikhonov_regularize needs a square matrix");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorKind::Domain, "regularization must be finite and nonnegative");
  }
  Matrix out = cov;
  out.diagonal().array() += delta;
  return out;
}

inline JointGaussian tikhonov_regularize(const JointGaussian& dist, double delta) {
  return JointGaussian(dist.mean(), tikhonov_regularize(dist.cov(), delta));
}

inline CholeskyFactor cholesky_factor(const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw Error(ErrorKind::Dimension, "cholesky_factor needs a nonempty square matrix");
  }
  if (!cov.allFinite()) throw Error(ErrorKind::NonFinite, "cholesky_factor input");
  if (max_asymmetry(cov) > kSymmetryTolerance) {
    throw Error(ErrorKind::Domain, "cholesky_factor input is not symmetric");
  }
  const Index n = cov.rows();
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  const double floor = kPivotTolerance * scale;

  CholeskyFactor f;
  f.lower = Matrix::Zero(n, n);
  Matrix& l = f.lower;
  for (Index j = 0; j < n; ++j) {
    double pivot = cov(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > floor)) throw NotPositiveDefinite(static_cast<std::size_t>(j), pivot);
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Index i = j + 1; i < n; ++i) {
      double s = cov(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
    f.log_det += 2.0 * std::log(d);
  }
  return f;
}

inline double log_two_pi() { return std::log(2.0 * std::numbers::pi); }

/// Negative log-density of one step's stacked positions.
inline double scene_nll(const CholeskyFactor& factor, const Vector& mean,
                        const Vector& observation) {
  if (observation.size() != factor.dim() || mean.size() != factor.dim()) {
    throw Error(ErrorKind::Dimension, "observation length does not match distribution");
  }
  const Vector white = factor.whiten(observation - mean);
  const double dim = static_cast<double>(factor.dim());
  return 0.5 * (factor.log_det + white.squaredNorm() + dim * log_two_pi());
}

inline double scene_nll(const JointGaussian& dist, const Vector& observation) {
  if (observation.size() != dist.dim()) {
    throw Error(ErrorKind::Dimension, "observation length does not match distribution");
  }
  return scene_nll(cholesky_factor(dist.cov()), dist.mean(), observation);
}

/// Sum of per-step NLLs, accumulated in step order.
inline double trajectory_nll(std::span<const JointGaussian> steps,
                             std::span<const Vector> observations) {
  if (steps.size() != observations.size()) {
    throw Error(ErrorKind::Dimension, "step count does not match observation count");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < steps.size(); ++t) total += scene_nll(steps[t], observations[t]);
  return total;
}

/// count x 2N samples, row k = mean + L z_k. Normals are drawn row by row,
/// coordinate by coordinate, from Rng(seed).
inline Matrix sample_joint(const JointGaussian& dist, std::uint64_t seed, Index count) {
  if (count <= 0) throw Error(ErrorKind::Domain, "sample count must be positive");
  const CholeskyFactor factor = cholesky_factor(dist.cov());
  const Index dim = dist.dim();
  Rng rng(seed);
  Matrix out(count, dim);
  Vector z(dim);
  for (Index k = 0; k < count; ++k) {
    for (Index c = 0; c < dim; ++c) z(c) = rng.normal();
    out.row(k) = (dist.mean() + factor.lower.triangularView<Eigen::Lower>() * z).transpose();
  }
  return out;
}

inline JointGaussian marginalize_agent(const JointGaussian& dist, Index agent) {
  if (agent < 0 || agent >= dist.agent_count()) {
    throw Error(ErrorKind::Domain, "agent index " + std::to_string(agent) + " out of range");
  }
  return JointGaussian(dist.mean().segment(2 * agent, 2), dist.cov().block(2 * agent, 2 * agent, 2, 2));
}

}  // namespace ipcc
