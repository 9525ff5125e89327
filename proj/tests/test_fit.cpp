#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"

using namespace ipcc;
using ipcc::testing::expect_error;

namespace {

std::vector<FitScene> fit_scenes(const ScenarioConfig& cfg, std::size_t count, Index width = 0,
                                 std::size_t skip = 0) {
  std::vector<FitScene> out;
  for (std::size_t k = skip; k < skip + count; ++k) out.push_back(make_fit_scene(generate_scene(cfg, k), width));
  return out;
}

ScenarioConfig pair_config(Pattern p, std::optional<double> rho, std::uint64_t seed, std::size_t t_fut = 3) {
  ScenarioConfig cfg;
  cfg.pattern = p;
  cfg.n_agents = 2;
  cfg.t_fut = t_fut;
  cfg.pair_rho = rho;
  cfg.seed = seed;
  return cfg;
}

/// Direct-rho fit of a generated two-agent dataset.
FitReport fit_direct(const std::vector<FitScene>& scenes, double delta = 1e-4, std::size_t iters = 1000) {
  FitConfig cfg;
  cfg.delta_reg = delta;
  cfg.max_iters = iters;
  return fit_parameters(cfg, FitDataset(scenes));
}

/// Regularized joint at step t for a fit scene and correlation matrix.
JointGaussian regularized_joint(const FitScene& s, std::size_t t, const IpccMatrix& rho, double delta) {
  return tikhonov_regularize(assemble_joint(s.marginals[t], rho, s.theta[t]), delta);
}

}  // namespace

TEST(FitConfig, JsonRoundTripAndValidation) {
  FitConfig c;
  c.learning_rate = 0.01;
  c.max_iters = 77;
  c.delta_reg = 1e-3;
  c.parameterization = Parameterization::RelevanceHead;
  c.seed = 9;
  const FitConfig back = fit_config_from_json(json_io::Json::parse(fit_config_to_json(c).dump()));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.max_iters, c.max_iters);
  EXPECT_EQ(back.delta_reg, c.delta_reg);
  EXPECT_EQ(back.parameterization, c.parameterization);
  EXPECT_EQ(back.seed, c.seed);
  expect_error([] { fit_config_from_json(json_io::Json::parse(R"({"delta_reg": -1})")); }, ErrorKind::Config);
  expect_error([] { fit_config_from_json(json_io::Json::parse(R"({"parameterization": "lstm"})")); },
               ErrorKind::Config);
}

TEST(FitDataset, GroupsScenesWithSharedConditioning) {
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, std::nullopt, 1), 50);
  const FitDataset data(scenes);
  EXPECT_EQ(data.scene_count(), 50u);
  ASSERT_EQ(data.groups().size(), 1u);
  EXPECT_EQ(data.groups()[0].count, 50u);
  expect_error([] { FitDataset(std::span<const FitScene>{}); }, ErrorKind::Domain);
}

TEST(DirectCorrelation, TanhMappingRoundTrips) {
  Matrix rho(3, 3);
  rho << 1, 0.3, -0.8, 0.3, 1, 0.1, -0.8, 0.1, 1;
  const std::vector<IpccMatrix> per_step{IpccMatrix(rho), IpccMatrix::identity(3)};
  const Vector p = direct_params_from(per_step);
  const ParamSpec spec{Parameterization::DirectRho, 3, 2, 0};
  ASSERT_EQ(p.size(), spec.size());
  EXPECT_LT((direct_correlation(p, spec, 0).matrix() - rho).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(direct_correlation(p, spec, 1).matrix() == Matrix::Identity(3, 3));
}

// With P = I the joint factorizes, so the objective of a single scene is the
// sum of the per-agent marginal negative log-likelihoods.
TEST(NllObjective, IdentityCorrelationIsSumOfMarginals) {
  ScenarioConfig cfg = pair_config(Pattern::Follow, std::nullopt, 2, 4);
  cfg.n_agents = 3;
  const std::vector<FitScene> one = fit_scenes(cfg, 1);
  const FitDataset data(one);
  const ParamSpec spec{Parameterization::DirectRho, 3, 4, 0};
  const double delta = 1e-4;
  double sum = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      const AgentMarginal& m = one[0].marginals[t][i];
      const JointGaussian marginal(m.mean(), tikhonov_regularize(Matrix(m.block()), delta));
      sum += scene_nll(marginal, one[0].observed[t].segment(2 * static_cast<Index>(i), 2));
    }
  }
  EXPECT_NEAR(nll_objective(Vector::Zero(spec.size()), spec, data, delta), sum, 1e-9 * std::abs(sum));
}

// Observations drawn from the model itself: the expected objective at the
// true parameters is the differential entropy 0.5 ln|2 pi e Sigma| per step.
TEST(NllObjective, TrueParametersGiveJointEntropy) {
  const double delta = 1e-2;
  const ScenarioConfig cfg = pair_config(Pattern::Follow, 0.7, 3, 3);
  FitScene base = make_fit_scene(generate_scene(cfg, 0));
  const IpccMatrix truth = scenario_correlation(cfg);
  const std::size_t count = 20000;
  std::vector<Matrix> draws;
  double entropy = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    const JointGaussian j = regularized_joint(base, t, truth, delta);
    draws.push_back(sample_joint(j, 100 + t, static_cast<Index>(count)));
    entropy += 0.5 * (cholesky_factor(j.cov()).log_det + 4.0 * (1.0 + std::log(2.0 * std::numbers::pi)));
  }
  std::vector<FitScene> scenes(count, base);
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t t = 0; t < 3; ++t) scenes[k].observed[t] = draws[t].row(static_cast<Index>(k)).transpose();
  const FitDataset data(scenes);
  const ParamSpec spec{Parameterization::DirectRho, 2, 3, 0};
  const std::vector<IpccMatrix> per_step(3, truth);
  const double value = nll_objective(direct_params_from(per_step), spec, data, delta);
  // Per-scene std is sqrt(3 * 4 / 2); five standard errors of the mean.
  EXPECT_NEAR(value, entropy, 5.0 * std::sqrt(6.0 / double(count)));
}

TEST(NllObjective, ZeroRegularizationFailsOnDegenerateData) {
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, std::nullopt, 4), 10);
  const FitDataset data(scenes);
  const ParamSpec spec{Parameterization::DirectRho, 2, 3, 0};
  EXPECT_THROW(nll_objective(Vector::Zero(3), spec, data, 0.0), FactorizationFailure);
  EXPECT_NO_THROW(nll_objective(Vector::Zero(3), spec, data, 1e-4));
}

TEST(GradientCheck, QuadraticToy) {
  Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  const Vector b = (Vector(3) << 1, -2, 0.5).finished();
  auto f = [&](const Vector& x) { return 0.5 * x.dot(a * x) - b.dot(x); };
  const Vector x = (Vector(3) << 0.3, -0.7, 1.1).finished();
  EXPECT_LT(gradient_check(f, x, a * x - b, 1e-4).max_rel_error, 1e-10);
}

TEST(GradientCheck, LargeStepShowsTruncationError) {
  auto f = [](const Vector& x) { return std::exp(x(0)) + std::sin(3.0 * x(1)); };
  const Vector x = (Vector(2) << 0.4, 0.2).finished();
  const Vector g = (Vector(2) << std::exp(0.4), 3.0 * std::cos(0.6)).finished();
  const double small = gradient_check(f, x, g, 1e-3).max_rel_error;
  const double large = gradient_check(f, x, g, 1e-1).max_rel_error;
  EXPECT_GT(large, 50.0 * small);
  // O(h^2): tenfold step, roughly hundredfold error.
  const double mid = gradient_check(f, x, g, 1e-2).max_rel_error;
  EXPECT_NEAR(large / mid, 100.0, 10.0);
}

TEST(GradNll, MatchesFiniteDifferencesForBothParameterizations) {
  ScenarioConfig cfg;
  cfg.pattern = Pattern::Mixed;
  cfg.n_agents = 3;
  cfg.t_fut = 4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto scenes = fit_scenes(cfg, 8, 8);
    const FitDataset data(scenes);
    const ParamSpec direct{Parameterization::DirectRho, 3, 4, 8};
    Vector p(direct.size());
    Rng rng(seed, 5);
    for (Index k = 0; k < p.size(); ++k) p(k) = rng.uniform(-0.5, 0.5);
    EXPECT_LT(gradient_check(p, direct, data, 1e-2, 1e-6).max_rel_error, 1e-5);
    const ParamSpec head{Parameterization::RelevanceHead, 3, 4, 8};
    EXPECT_LT(gradient_check(init_relevance_head(8, seed).flatten(), head, data, 1e-2, 1e-6).max_rel_error, 1e-5);
  }
}

// Relabeling the agents of a pair leaves the objective unchanged, so the
// gradient of the pair entry does not depend on the order of i and j.
TEST(GradNll, PairGradientSymmetricUnderAgentSwap) {
  ScenarioConfig cfg;
  cfg.pattern = Pattern::Mixed;
  cfg.n_agents = 3;
  cfg.t_fut = 2;
  auto scenes = fit_scenes(cfg, 20);
  std::vector<FitScene> swapped = scenes;
  for (FitScene& s : swapped) {
    for (std::size_t t = 0; t < s.marginals.size(); ++t) {
      std::swap(s.marginals[t][0], s.marginals[t][1]);
      Vector th = s.theta[t].values();
      std::swap(th(0), th(1));
      s.theta[t] = YawVector(th);
      Vector o = s.observed[t];
      o.segment(0, 2).swap(o.segment(2, 2));
      s.observed[t] = o;
    }
  }
  const ParamSpec spec{Parameterization::DirectRho, 3, 2, 0};
  // Pairs per step in order (0,1), (0,2), (1,2).
  Vector p = (Vector(6) << 0.3, -0.2, 0.1, 0.5, 0.05, -0.4).finished();
  Vector q = p;
  for (Index t = 0; t < 2; ++t) std::swap(q(3 * t + 1), q(3 * t + 2));
  const Vector g = grad_nll(p, spec, FitDataset(scenes), 1e-3);
  const Vector h = grad_nll(q, spec, FitDataset(swapped), 1e-3);
  for (Index t = 0; t < 2; ++t) {
    EXPECT_NEAR(g(3 * t), h(3 * t), 1e-9 * std::max(1.0, std::abs(g(3 * t))));
    EXPECT_NEAR(g(3 * t + 1), h(3 * t + 2), 1e-9 * std::max(1.0, std::abs(g(3 * t + 1))));
  }
}

// One-parameter problem: locate the minimum by bisection on the sign of the
// analytic derivative, then confirm the gradient vanishes there.
TEST(GradNll, VanishesAtStrictMinimum) {
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, 0.5, 6, 1), 500);
  const FitDataset data(scenes);
  const ParamSpec spec{Parameterization::DirectRho, 2, 1, 0};
  auto g = [&](double x) { return grad_nll(Vector::Constant(1, x), spec, data, 1e-2)(0); };
  double lo = -2.0, hi = 2.0;
  ASSERT_LT(g(lo), 0.0);
  ASSERT_GT(g(hi), 0.0);
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  EXPECT_LT(std::abs(g(lo)), 1e-8);
  const double f0 = nll_objective(Vector::Constant(1, lo), spec, data, 1e-2);
  EXPECT_GT(nll_objective(Vector::Constant(1, lo + 1e-3), spec, data, 1e-2), f0);
  EXPECT_GT(nll_objective(Vector::Constant(1, lo - 1e-3), spec, data, 1e-2), f0);
}

TEST(FitParameters, RecoversIndependentAndFollowerCorrelation) {
  const FitReport indep = fit_direct(fit_scenes(pair_config(Pattern::Independent, std::nullopt, 7), 10000));
  ASSERT_FALSE(indep.failed) << indep.failure_reason;
  for (const IpccMatrix& r : indep.recovered) EXPECT_NEAR(r(0, 1), 0.0, 0.05);
  const FitReport follow = fit_direct(fit_scenes(pair_config(Pattern::Follow, 0.8, 8), 10000));
  ASSERT_FALSE(follow.failed) << follow.failure_reason;
  for (const IpccMatrix& r : follow.recovered) {
    EXPECT_GT(r(0, 1), 0.75);
    EXPECT_LT(r(0, 1), 0.85);
  }
}

TEST(FitParameters, RelevanceHeadRecoversFollower) {
  FitConfig cfg;
  cfg.parameterization = Parameterization::RelevanceHead;
  cfg.learning_rate = 0.02;
  cfg.max_iters = 2000;
  cfg.seed = 3;
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, 0.8, 9), 2000, cfg.feature_width);
  const FitReport r = fit_parameters(cfg, FitDataset(scenes));
  ASSERT_FALSE(r.failed) << r.failure_reason;
  for (const IpccMatrix& p : r.recovered) EXPECT_NEAR(p(0, 1), 0.8, 0.1);
}

TEST(FitParameters, RecoveryImprovesWithDatasetSize) {
  double err_small = 0.0, err_large = 0.0;
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    const ScenarioConfig cfg = pair_config(Pattern::Follow, 0.5, seed, 4);
    for (auto [count, err] : {std::pair{std::size_t{1000}, &err_small}, std::pair{std::size_t{10000}, &err_large}}) {
      const FitReport r = fit_direct(fit_scenes(cfg, count));
      ASSERT_FALSE(r.failed);
      for (const IpccMatrix& p : r.recovered) *err += std::abs(p(0, 1) - 0.5);
    }
  }
  EXPECT_LT(err_large, err_small);
}

// With marginals and headings at their true values the fitted pair
// correlation is the sample correlation of the realized increments.
TEST(FitParameters, AgreesWithEmpiricalIncrementCorrelation) {
  const ScenarioConfig cfg = pair_config(Pattern::Yield, -0.6, 14);
  const auto generated = generate_dataset(cfg, 10000);
  std::vector<FitScene> scenes;
  for (const auto& g : generated) scenes.push_back(make_fit_scene(g));
  const FitReport r = fit_direct(scenes);
  ASSERT_FALSE(r.failed);
  for (std::size_t t = 0; t < cfg.t_fut; ++t) {
    Matrix x(static_cast<Index>(generated.size()), 2);
    for (std::size_t k = 0; k < generated.size(); ++k) {
      x.row(static_cast<Index>(k)) = realized_increments(generated[k].scene, t).transpose();
    }
    EXPECT_NEAR(r.recovered[t](0, 1), empirical_increment_pcc(x)(0, 1), 0.02);
  }
}

TEST(FitParameters, ZeroRegularizationFailsAtFirstIteration) {
  const FitReport r = fit_direct(fit_scenes(pair_config(Pattern::Follow, std::nullopt, 15), 100), 0.0);
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.iterations_run, 0u);
  EXPECT_TRUE(r.nll_trace.empty());
  EXPECT_NE(r.failure_reason.find("factorization failed"), std::string::npos);
  EXPECT_TRUE(std::isnan(r.final_nll));
}

// Held-out NLL under each model's own regularized covariance: on rank-deficient
// data the larger regularizer inflates every null-space variance.
TEST(FitParameters, LargerRegularizationGivesWorseValidationNll) {
  const ScenarioConfig cfg = pair_config(Pattern::Follow, 0.8, 16);
  const auto train = fit_scenes(cfg, 2000);
  const auto valid = fit_scenes(cfg, 1000, 0, 2000);
  const FitDataset vdata(valid);
  auto validation_nll = [&](double delta) {
    const FitReport r = fit_direct(train, delta);
    EXPECT_FALSE(r.failed);
    return nll_objective(r.params, r.spec, vdata, r.delta_reg_used);
  };
  EXPECT_GT(validation_nll(1e-3), validation_nll(1e-4));
}

TEST(FitParameters, SmallLearningRateTraceIsMonotone) {
  FitConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_iters = 300;
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, 0.6, 17), 500);
  const FitReport r = fit_parameters(cfg, FitDataset(scenes));
  ASSERT_FALSE(r.failed);
  ASSERT_EQ(r.nll_trace.size(), 300u);
  for (std::size_t k = 1; k < r.nll_trace.size(); ++k) EXPECT_LE(r.nll_trace[k], r.nll_trace[k - 1]);
}

TEST(FitParameters, DeterministicForSameSeed) {
  FitConfig cfg;
  cfg.parameterization = Parameterization::RelevanceHead;
  cfg.max_iters = 50;
  cfg.seed = 5;
  const auto scenes = fit_scenes(pair_config(Pattern::Follow, 0.8, 18), 200, cfg.feature_width);
  const FitReport a = fit_parameters(cfg, FitDataset(scenes));
  const FitReport b = fit_parameters(cfg, FitDataset(scenes));
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(nll_trace_csv(a), nll_trace_csv(b));
  EXPECT_EQ(nll_trace_csv(a).substr(0, 14), "iteration,nll\n");
}
