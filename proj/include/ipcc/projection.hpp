#pragma once

// Incremental-correlation model: 1-D displacement statistics with a single
// correlation per agent pair, projected onto the x-y plane.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipcc/error.hpp"
#include "ipcc/gaussian.hpp"

namespace ipcc {

/// Maps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// N x N correlation matrix of 1-D increments: symmetric, unit diagonal,
/// entries in [-1, 1].
class IpccMatrix {
 public:
  explicit IpccMatrix(Matrix rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
      throw Error(ErrorKind::Dimension, "correlation matrix must be square and nonempty");
    }
    if (!rho.allFinite()) throw Error(ErrorKind::NonFinite, "correlation matrix");
    if (max_asymmetry(rho) > kSymmetryTolerance) {
      throw Error(ErrorKind::InvalidCorrelation, "correlation matrix is not symmetric");
    }
    for (Index i = 0; i < rho.rows(); ++i) {
      if (std::abs(rho(i, i) - 1.0) > kSymmetryTolerance) {
        throw Error(ErrorKind::InvalidCorrelation,
                    "diagonal entry " + std::to_string(i) + " is not 1");
      }
    }
    if (rho.cwiseAbs().maxCoeff() > 1.0) {
      throw Error(ErrorKind::InvalidCorrelation, "correlation entry outside [-1, 1]");
    }
    rho_ = symmetrized(rho);
    rho_.diagonal().setOnes();
  }

  static IpccMatrix identity(Index n) { return IpccMatrix(Matrix::Identity(n, n)); }

  Index size() const noexcept { return rho_.rows(); }
  double operator()(Index i, Index j) const { return rho_(i, j); }
  const Matrix& matrix() const noexcept { return rho_; }

  double min_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(rho_, Eigen::EigenvaluesOnly).eigenvalues()(0);
  }

 private:
  Matrix rho_;
};

/// Stored cross-agent parameters: one correlation per unordered pair.
constexpr std::size_t cross_parameter_count(std::size_t agents) {
  return agents * (agents - 1) / 2;
}

/// The same count for the four-correlation (xx, xy, yx, yy) position form.
constexpr std::size_t position_cross_parameter_count(std::size_t agents) {
  return 4 * cross_parameter_count(agents);
}

/// Per-agent 1-D displacement mean and spread at one step.
struct IncrementParams {
  Vector mu_delta;
  Vector sigma_delta;

  Index agent_count() const noexcept { return mu_delta.size(); }

  void validate() const {
    if (mu_delta.size() == 0 || mu_delta.size() != sigma_delta.size()) {
      throw Error(ErrorKind::Dimension, "increment mean and spread must have equal nonzero length");
    }
    if (!mu_delta.allFinite() || !sigma_delta.allFinite()) {
      throw Error(ErrorKind::NonFinite, "increment parameters");
    }
    if ((mu_delta.array() < 0.0).any()) throw Error(ErrorKind::Domain, "increment mean must be >= 0");
    if ((sigma_delta.array() <= 0.0).any()) throw Error(ErrorKind::Domain, "increment spread must be > 0");
  }
};

/// Covariance of the 1-D increments, P .* (sigma sigma^T).
inline Matrix increment_covariance(const IncrementParams& inc, const IpccMatrix& rho) {
  return rho.matrix().cwiseProduct(inc.sigma_delta * inc.sigma_delta.transpose());
}

/// One agent's 2-D marginal at one step. Means are absolute positions.
struct AgentMarginal {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rho_xy = 0.0;

  Eigen::Vector2d mean() const { return {mu_x, mu_y}; }

  Eigen::Matrix2d block() const {
    const double c = rho_xy * sigma_x * sigma_y;
    Eigen::Matrix2d b;
    b << sigma_x * sigma_x, c, c, sigma_y * sigma_y;
    return b;
  }
};

using MarginalParams = std::vector<AgentMarginal>;

/// Each block must be positive semidefinite. Blocks obtained by projecting a
/// 1-D increment are rank one (|rho_xy| = 1), so the bound is inclusive.
inline void validate_marginals(const MarginalParams& marginals) {
  if (marginals.empty()) throw Error(ErrorKind::Dimension, "no marginals");
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    const AgentMarginal& m = marginals[i];
    const std::string who = "agent " + std::to_string(i);
    if (!std::isfinite(m.mu_x) || !std::isfinite(m.mu_y) || !std::isfinite(m.sigma_x) ||
        !std::isfinite(m.sigma_y) || !std::isfinite(m.rho_xy)) {
      throw Error(ErrorKind::NonFinite, who + " marginal");
    }
    if (m.sigma_x < 0.0 || m.sigma_y < 0.0) throw Error(ErrorKind::Domain, who + " has a negative sigma");
    if (std::abs(m.rho_xy) > 1.0) throw Error(ErrorKind::Domain, who + " has |rho_xy| > 1");
  }
}

/// Headings used to project increments, one per agent, in (-pi, pi].
class YawVector {
 public:
  explicit YawVector(Vector theta) : theta_(std::move(theta)) {
    if (!theta_.allFinite()) throw Error(ErrorKind::NonFinite, "yaw vector");
    for (Index i = 0; i < theta_.size(); ++i) {
      if (!(theta_(i) > -std::numbers::pi && theta_(i) <= std::numbers::pi)) {
        throw Error(ErrorKind::Domain, "yaw " + std::to_string(i) + " outside (-pi, pi]");
      }
    }
  }

  Index size() const noexcept { return theta_.size(); }
  double operator()(Index i) const { return theta_(i); }
  const Vector& values() const noexcept { return theta_; }

 private:
  Vector theta_;
};

/// Heading of a displacement, atan2(dy, dx) in (-pi, pi].
inline double estimate_yaw(double dx, double dy) {
  if (!std::isfinite(dx) || !std::isfinite(dy)) {
    throw Error(ErrorKind::NonFinite, "displacement for yaw estimate");
  }
  if (dx == 0.0 && dy == 0.0) throw Error(ErrorKind::DegenerateHeading, "zero displacement");
  return wrap_angle(std::atan2(dy, dx));
}

struct YawEstimate {
  YawVector theta;
  std::vector<std::size_t> fallback_agents;  ///< agents whose heading was substituted
};

/// Headings from signed mean displacements (marginal mean minus current
/// position). Stationary agents take `fallback(i)`.
inline YawEstimate estimate_yaws(const MarginalParams& marginals, const Matrix& current,
                                 const Vector& fallback) {
  const Index n = static_cast<Index>(marginals.size());
  if (current.rows() != n || current.cols() != 2 || fallback.size() != n) {
    throw Error(ErrorKind::Dimension, "estimate_yaws: inconsistent agent count");
  }
  Vector theta(n);
  std::vector<std::size_t> flagged;
  for (Index i = 0; i < n; ++i) {
    try {
      theta(i) = estimate_yaw(marginals[i].mu_x - current(i, 0), marginals[i].mu_y - current(i, 1));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateHeading) throw;
      theta(i) = wrap_angle(fallback(i));
      flagged.push_back(static_cast<std::size_t>(i));
    }
  }
  return {YawVector(std::move(theta)), std::move(flagged)};
}

namespace detail {

inline void check_agents(Index n, Index other, const char* what) {
  if (n != other) {
    throw Error(ErrorKind::Dimension, std::string(what) + ": expected " + std::to_string(n) +
                                          " agents, got " + std::to_string(other));
  }
}

inline Eigen::Vector2d heading_vec(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace detail

/// Mean C M_dr + M_0 and covariance C^T Sigma_dr C of the projected
/// increments. The covariance has rank at most N.
inline JointGaussian project_increments(const IncrementParams& inc, const IpccMatrix& rho,
                                        const YawVector& theta, const Matrix& current) {
  inc.validate();
  const Index n = inc.agent_count();
  detail::check_agents(n, rho.size(), "project_increments correlation");
  detail::check_agents(n, theta.size(), "project_increments yaw");
  if (current.rows() != n || current.cols() != 2) {
    throw Error(ErrorKind::Dimension, "current positions must be N x 2");
  }
  Vector mean(2 * n);
  Matrix cov(2 * n, 2 * n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d ui = detail::heading_vec(theta(i));
    mean.segment<2>(2 * i) = current.row(i).transpose() + inc.mu_delta(i) * ui;
    for (Index j = 0; j < n; ++j) {
      const Eigen::Vector2d uj = detail::heading_vec(theta(j));
      const double s = rho(i, j) * inc.sigma_delta(i) * inc.sigma_delta(j);
      cov.block<2, 2>(2 * i, 2 * j) = s * (ui * uj.transpose());
    }
  }
  return JointGaussian(std::move(mean), std::move(cov));
}

/// (xx, xy; yx, yy) position correlations of agents i and j implied by one
/// increment correlation: rho * sgn of the heading outer product, sgn(0) = 0.
inline Eigen::Matrix2d reconstruct_cross_correlations(double rho_delta, double theta_i,
                                                      double theta_j) {
  if (!(rho_delta >= -1.0 && rho_delta <= 1.0)) {
    throw Error(ErrorKind::Domain, "increment correlation outside [-1, 1]");
  }
  const Eigen::Vector2d ui = detail::heading_vec(theta_i);
  const Eigen::Vector2d uj = detail::heading_vec(theta_j);
  Eigen::Matrix2d out;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) out(a, b) = rho_delta * sgn(ui(a) * uj(b));
  }
  return out;
}

/// d(cross block i,j)/d(rho_ij): the sign pattern scaled by the marginal
/// spreads. The assembled block is rho_ij times this.
inline Eigen::Matrix2d cross_block_sensitivity(const AgentMarginal& mi, const AgentMarginal& mj,
                                               double theta_i, double theta_j) {
  const Eigen::Matrix2d signs = reconstruct_cross_correlations(1.0, theta_i, theta_j);
  const Eigen::Vector2d si(mi.sigma_x, mi.sigma_y);
  const Eigen::Vector2d sj(mj.sigma_x, mj.sigma_y);
  return signs.cwiseProduct(si * sj.transpose());
}

/// Joint distribution from per-agent marginals and increment correlations.
/// Diagonal blocks are the marginal blocks verbatim. Not regularized.
inline JointGaussian assemble_joint(const MarginalParams& marginals, const IpccMatrix& rho,
                                    const YawVector& theta) {
  validate_marginals(marginals);
  const Index n = static_cast<Index>(marginals.size());
  detail::check_agents(n, rho.size(), "assemble_joint correlation");
  detail::check_agents(n, theta.size(), "assemble_joint yaw");
  Vector mean(2 * n);
  Matrix cov(2 * n, 2 * n);
  for (Index i = 0; i < n; ++i) {
    mean.segment<2>(2 * i) = marginals[i].mean();
    cov.block<2, 2>(2 * i, 2 * i) = marginals[i].block();
    for (Index j = i + 1; j < n; ++j) {
      const Eigen::Matrix2d block =
          rho(i, j) * cross_block_sensitivity(marginals[i], marginals[j], theta(i), theta(j));
      cov.block<2, 2>(2 * i, 2 * j) = block;
      cov.block<2, 2>(2 * j, 2 * i) = block.transpose();
    }
  }
  return JointGaussian(std::move(mean), std::move(cov));
}

/// Marginals of projected increments for agents moving along `yaw`:
/// sigma_x = |cos| sigma, sigma_y = |sin| sigma, rho_xy = sgn(cos sin).
inline MarginalParams marginals_from_increments(const IncrementParams& inc, const YawVector& yaw,
                                                const Matrix& current) {
  inc.validate();
  const Index n = inc.agent_count();
  detail::check_agents(n, yaw.size(), "marginals_from_increments yaw");
  if (current.rows() != n || current.cols() != 2) {
    throw Error(ErrorKind::Dimension, "current positions must be N x 2");
  }
  MarginalParams out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double c = std::cos(yaw(i));
    const double s = std::sin(yaw(i));
    AgentMarginal& m = out[static_cast<std::size_t>(i)];
    m.mu_x = current(i, 0) + inc.mu_delta(i) * c;
    m.mu_y = current(i, 1) + inc.mu_delta(i) * s;
    m.sigma_x = std::abs(c) * inc.sigma_delta(i);
    m.sigma_y = std::abs(s) * inc.sigma_delta(i);
    m.rho_xy = sgn(c * s);
  }
  return out;
}

/// Max abs difference (mean and covariance) between the projected joint
/// under `theta` and the joint assembled from marginals that were projected
/// along `marginal_yaw` (the actual headings; defaults to `theta`).
inline double equivalence_check(const IncrementParams& inc, const IpccMatrix& rho,
                                const YawVector& theta, const Matrix& current,
                                const std::optional<YawVector>& marginal_yaw = std::nullopt) {
  const JointGaussian projected = project_increments(inc, rho, theta, current);
  const MarginalParams marginals =
      marginals_from_increments(inc, marginal_yaw.value_or(theta), current);
  const JointGaussian assembled = assemble_joint(marginals, rho, theta);
  const double cov_dev = (projected.cov() - assembled.cov()).cwiseAbs().maxCoeff();
  const double mean_dev = (projected.mean() - assembled.mean()).cwiseAbs().maxCoeff();
  return std::max(cov_dev, mean_dev);
}

}  // namespace ipcc
