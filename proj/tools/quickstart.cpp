// Builds a two-agent joint distribution from marginals and one increment
// correlation, then scores an observation and samples from it.

#include <cstdio>

#include "ipcc/ipcc.hpp"

int main() {
  using namespace ipcc;

  // Two vehicles in the same lane heading north-east; the follower mirrors
  // the leader's speed changes.
  const IncrementParams inc{Vector::Constant(2, 5.0), Vector::Constant(2, 0.8)};
  Matrix rho(2, 2);
  rho << 1.0, 0.9, 0.9, 1.0;
  const IpccMatrix correlation(rho);
  const YawVector theta(Vector::Constant(2, 0.25 * std::numbers::pi));
  Matrix current(2, 2);
  current << 0.0, 0.0, -8.0, -8.0;

  const MarginalParams marginals = marginals_from_increments(inc, theta, current);
  const JointGaussian joint = assemble_joint(marginals, correlation, theta);
  const JointGaussian regularized = tikhonov_regularize(joint, 1e-4);

  std::printf("projection vs assembly deviation: %.3e\n", equivalence_check(inc, correlation, theta, current));
  std::printf("NLL at the mean: %.6f\n", scene_nll(regularized, regularized.mean()));

  const Matrix samples = sample_joint(regularized, 42, 20000);
  Matrix increments(samples.rows(), 2);
  for (Index i = 0; i < 2; ++i) {
    const Eigen::Vector2d u(std::cos(theta(i)), std::sin(theta(i)));
    increments.col(i) = (samples.middleCols(2 * i, 2).rowwise() - current.row(i)) * u;
  }
  std::printf("empirical increment correlation: %.4f\n", empirical_increment_pcc(increments)(0, 1));
  return 0;
}
