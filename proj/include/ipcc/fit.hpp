#pragma once

// Maximum-likelihood fitting of increment correlations under the per-step
// scene NLL, with marginals and headings held at ground truth.

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ipcc/error.hpp"
#include "ipcc/gaussian.hpp"
#include "ipcc/json_io.hpp"
#include "ipcc/projection.hpp"
#include "ipcc/relevance.hpp"
#include "ipcc/scenes.hpp"

namespace ipcc {

enum class Parameterization { DirectRho, RelevanceHead };

inline std::string_view to_string(Parameterization p) {
  return p == Parameterization::DirectRho ? "direct-rho" : "relevance-head";
}

inline Parameterization parse_parameterization(std::string_view name) {
  if (name == "direct-rho") return Parameterization::DirectRho;
  if (name == "relevance-head") return Parameterization::RelevanceHead;
  throw Error(ErrorKind::Config, "unknown parameterization '" + std::string(name) + "'");
}

struct FitConfig {
  double learning_rate = 0.05;
  std::size_t max_iters = 1000;
  double delta_reg = 1e-4;
  Parameterization parameterization = Parameterization::DirectRho;
  std::uint64_t seed = 0;
  /// Stop once |NLL_k - NLL_{k-1}| falls below this.
  double convergence_tol = 1e-10;
  /// Latent width for the relevance head.
  Index feature_width = 8;
  /// Seed of the per-agent embedding channels of synthetic latents.
  std::uint64_t embed_seed = 7;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorKind::Config, "learning_rate must be > 0");
    }
    if (max_iters < 1) throw Error(ErrorKind::Config, "max_iters must be >= 1");
    if (!(delta_reg >= 0.0) || !std::isfinite(delta_reg)) {
      throw Error(ErrorKind::Config, "delta_reg must be >= 0");
    }
    if (!(convergence_tol >= 0.0)) throw Error(ErrorKind::Config, "convergence_tol must be >= 0");
    if (feature_width < 1) throw Error(ErrorKind::Config, "feature_width must be >= 1");
  }
};

/// Conditioning and observations of one scene, per future step.
struct FitScene {
  std::vector<MarginalParams> marginals;
  std::vector<YawVector> theta;
  std::vector<LatentFeatures> latent;  ///< empty unless fitting the relevance head
  std::vector<Vector> observed;
};

/// Fit inputs from a generated scene: marginals projected from the true
/// increments along the true headings, which also serve as theta.
inline FitScene make_fit_scene(const GeneratedScene& g, Index latent_width = 0,
                               std::uint64_t embed_seed = 7) {
  const SceneSpec& scene = g.scene;
  const Matrix current = scene.current_positions();
  FitScene out;
  for (std::size_t t = 0; t < scene.future_len(); ++t) {
    YawVector yaw(scene.true_yaw().col(static_cast<Index>(t)));
    out.marginals.push_back(marginals_from_increments(g.increments[t], yaw, current));
    out.theta.push_back(yaw);
    if (latent_width > 0) out.latent.push_back(synthetic_latent(scene, t, latent_width, embed_seed));
    out.observed.push_back(scene.future_stacked(t));
  }
  return out;
}

/// Scenes sharing identical conditioning, reduced to their residual scatter.
struct FitGroup {
  std::size_t first_scene = 0;
  std::size_t count = 0;
  std::vector<MarginalParams> marginals;
  std::vector<YawVector> theta;
  std::vector<LatentFeatures> latent;
  std::vector<Vector> mean;
  std::vector<Matrix> scatter;  ///< sum over member scenes of r r^T, r = observed - mean
  std::vector<Matrix> root;     ///< W with W W^T = scatter
};

/// The per-step NLL depends on a scene's observations only through r r^T, so
/// scenes with equal conditioning are merged. Accumulation follows scene order.
class FitDataset {
 public:
  explicit FitDataset(std::span<const FitScene> scenes) {
    if (scenes.empty()) throw Error(ErrorKind::Domain, "dataset is empty");
    agents_ = static_cast<Index>(scenes.front().marginals.empty() ? 0 : scenes.front().marginals.front().size());
    steps_ = scenes.front().marginals.size();
    if (agents_ == 0 || steps_ == 0) throw Error(ErrorKind::Dimension, "dataset scenes have no steps");
    has_latent_ = !scenes.front().latent.empty();
    std::map<std::vector<double>, std::size_t> index;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const FitScene& scene = scenes[s];
      check(scene, s);
      auto [it, inserted] = index.try_emplace(key(scene), groups_.size());
      if (inserted) groups_.push_back(new_group(scene, s));
      FitGroup& g = groups_[it->second];
      ++g.count;
      for (std::size_t t = 0; t < steps_; ++t) {
        const Vector r = scene.observed[t] - g.mean[t];
        g.scatter[t].noalias() += r * r.transpose();
      }
    }
    for (FitGroup& g : groups_) {
      for (const Matrix& sc : g.scatter) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sc);
        g.root.push_back(eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
      }
    }
    scene_count_ = scenes.size();
  }

  Index agent_count() const noexcept { return agents_; }
  std::size_t step_count() const noexcept { return steps_; }
  std::size_t scene_count() const noexcept { return scene_count_; }
  bool has_latent() const noexcept { return has_latent_; }
  const std::vector<FitGroup>& groups() const noexcept { return groups_; }

 private:
  void check(const FitScene& scene, std::size_t s) const {
    const std::string who = "scene " + std::to_string(s);
    if (scene.marginals.size() != steps_ || scene.theta.size() != steps_ ||
        scene.observed.size() != steps_ || (has_latent_ && scene.latent.size() != steps_) ||
        (!has_latent_ && !scene.latent.empty())) {
      throw Error(ErrorKind::Dimension, who + ": inconsistent step count");
    }
    for (std::size_t t = 0; t < steps_; ++t) {
      validate_marginals(scene.marginals[t]);
      if (static_cast<Index>(scene.marginals[t].size()) != agents_ || scene.theta[t].size() != agents_ ||
          scene.observed[t].size() != 2 * agents_ ||
          (has_latent_ && scene.latent[t].agent_count() != agents_)) {
        throw Error(ErrorKind::Dimension, who + ": inconsistent agent count");
      }
      if (!scene.observed[t].allFinite()) throw Error(ErrorKind::NonFinite, who + " observation");
    }
  }

  static std::vector<double> key(const FitScene& scene) {
    std::vector<double> k;
    for (std::size_t t = 0; t < scene.marginals.size(); ++t) {
      for (const AgentMarginal& m : scene.marginals[t]) {
        k.insert(k.end(), {m.mu_x, m.mu_y, m.sigma_x, m.sigma_y, m.rho_xy});
      }
      const Vector& th = scene.theta[t].values();
      k.insert(k.end(), th.data(), th.data() + th.size());
      if (!scene.latent.empty()) {
        const Matrix& l = scene.latent[t].matrix();
        k.insert(k.end(), l.data(), l.data() + l.size());
      }
    }
    return k;
  }

  FitGroup new_group(const FitScene& scene, std::size_t s) const {
    FitGroup g;
    g.first_scene = s;
    g.marginals = scene.marginals;
    g.theta = scene.theta;
    g.latent = scene.latent;
    for (std::size_t t = 0; t < steps_; ++t) {
      Vector mean(2 * agents_);
      for (Index i = 0; i < agents_; ++i) mean.segment<2>(2 * i) = scene.marginals[t][static_cast<std::size_t>(i)].mean();
      g.mean.push_back(std::move(mean));
      g.scatter.push_back(Matrix::Zero(2 * agents_, 2 * agents_));
    }
    return g;
  }

  Index agents_ = 0;
  std::size_t steps_ = 0;
  std::size_t scene_count_ = 0;
  bool has_latent_ = false;
  std::vector<FitGroup> groups_;
};

/// Layout of the free parameter vector.
///
/// direct-rho: one unconstrained u per step and unordered pair, rho = tanh(u),
/// step-major, pairs (i < j) in row-major order.
/// relevance-head: RelevanceHeadParams::flatten() of a head shared by all steps.
struct ParamSpec {
  Parameterization kind = Parameterization::DirectRho;
  Index agents = 0;
  std::size_t steps = 0;
  Index width = 0;

  Index pair_count() const { return agents * (agents - 1) / 2; }

  Index size() const {
    if (kind == Parameterization::DirectRho) return static_cast<Index>(steps) * pair_count();
    return RelevanceHeadParams::zeros(width).parameter_count();
  }
};

inline ParamSpec param_spec(const FitConfig& cfg, const FitDataset& data) {
  ParamSpec spec{cfg.parameterization, data.agent_count(), data.step_count(), cfg.feature_width};
  if (spec.kind == Parameterization::RelevanceHead) {
    if (!data.has_latent()) throw Error(ErrorKind::Config, "relevance head needs latent features");
    const Index width = data.groups().front().latent.front().width();
    if (width != cfg.feature_width) {
      throw Error(ErrorKind::Config, "latent width " + std::to_string(width) +
                                         " does not match feature_width");
    }
  }
  return spec;
}

/// Correlations from direct parameters at one step.
inline IpccMatrix direct_correlation(const Vector& params, const ParamSpec& spec, std::size_t step) {
  const Index n = spec.agents;
  Matrix rho = Matrix::Identity(n, n);
  Index k = static_cast<Index>(step) * spec.pair_count();
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double r = std::tanh(params(k++));
      rho(i, j) = r;
      rho(j, i) = r;
    }
  }
  return IpccMatrix(std::move(rho));
}

/// Inverse of the tanh map, for initializing from known correlations.
inline Vector direct_params_from(std::span<const IpccMatrix> per_step) {
  if (per_step.empty()) throw Error(ErrorKind::Dimension, "no correlation matrices");
  const Index n = per_step.front().size();
  Vector out(static_cast<Index>(per_step.size()) * n * (n - 1) / 2);
  Index k = 0;
  for (const IpccMatrix& p : per_step) {
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) out(k++) = std::atanh(std::clamp(p(i, j), -1.0 + 1e-15, 1.0 - 1e-15));
  }
  return out;
}

/// Failure to factor a regularized covariance during fitting.
class FactorizationFailure : public Error {
 public:
  FactorizationFailure(std::size_t scene, std::size_t step, const NotPositiveDefinite& cause)
      : Error(ErrorKind::NotPositiveDefinite,
              "factorization failed at scene " + std::to_string(scene) + ", step " +
                  std::to_string(step) + ", pivot " + std::to_string(cause.pivot())),
        scene_(scene), step_(step) {}

  std::size_t scene() const noexcept { return scene_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t scene_;
  std::size_t step_;
};

struct Evaluation {
  double value = 0.0;
  Vector grad;
};

/// Mean over scenes of the summed per-step scene NLL, optionally with its
/// gradient. dNLL/dSigma = 0.5 (Sigma^-1 - Sigma^-1 r r^T Sigma^-1) is pushed
/// through the cross blocks to the correlations, then to the parameters.
inline Evaluation evaluate_nll(const Vector& params, const ParamSpec& spec, const FitDataset& data,
                               double delta_reg, bool with_grad) {
  if (params.size() != spec.size()) throw Error(ErrorKind::Dimension, "parameter vector has the wrong length");
  if (spec.agents != data.agent_count() || spec.steps != data.step_count()) {
    throw Error(ErrorKind::Dimension, "parameter layout does not match dataset");
  }
  const Index n = spec.agents;
  const double dim = static_cast<double>(2 * n);
  std::optional<RelevanceHeadParams> head;
  if (spec.kind == Parameterization::RelevanceHead) head = RelevanceHeadParams::unflatten(params, spec.width);

  Evaluation out;
  if (with_grad) out.grad = Vector::Zero(params.size());
  for (const FitGroup& g : data.groups()) {
    const double count = static_cast<double>(g.count);
    for (std::size_t t = 0; t < spec.steps; ++t) {
      std::optional<AttentionCache> cache;
      std::optional<IpccMatrix> rho;
      if (head) {
        cache = attention_forward_cached(g.latent[t], *head);
        rho = cosine_relevance(LatentFeatures(cache->out));
      } else {
        rho = direct_correlation(params, spec, t);
      }
      const JointGaussian joint = assemble_joint(g.marginals[t], *rho, g.theta[t]);
      CholeskyFactor factor;
      try {
        factor = cholesky_factor(tikhonov_regularize(joint.cov(), delta_reg));
      } catch (const NotPositiveDefinite& e) {
        throw FactorizationFailure(g.first_scene, t, e);
      }
      // tr(Sigma^-1 S) = ||L^-1 W||_F^2 keeps the quadratic term as accurate
      // as a per-scene triangular solve.
      const Matrix white = factor.lower.triangularView<Eigen::Lower>().solve(g.root[t]);
      out.value += 0.5 * (count * factor.log_det + white.squaredNorm() + count * dim * log_two_pi());
      if (!with_grad || n < 2) continue;

      const Matrix solved = factor.lower.transpose().triangularView<Eigen::Upper>().solve(white);
      const Matrix d_cov = 0.5 * (count * factor.inverse() - solved * solved.transpose());
      Matrix pair_grad = Matrix::Zero(n, n);
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          const Eigen::Matrix2d k = cross_block_sensitivity(
              g.marginals[t][static_cast<std::size_t>(i)], g.marginals[t][static_cast<std::size_t>(j)],
              g.theta[t](i), g.theta[t](j));
          pair_grad(i, j) = 2.0 * d_cov.block<2, 2>(2 * i, 2 * j).cwiseProduct(k).sum();
        }
      }
      if (head) {
        const LatentFeatures rel(cache->out);
        const Matrix d_out = cosine_relevance_backward(rel, pair_grad);
        out.grad += attention_backward(*cache, *head, d_out).flatten();
      } else {
        Index k = static_cast<Index>(t) * spec.pair_count();
        for (Index i = 0; i < n; ++i) {
          for (Index j = i + 1; j < n; ++j, ++k) {
            const double r = (*rho)(i, j);
            out.grad(k) += pair_grad(i, j) * (1.0 - r * r);
          }
        }
      }
    }
  }
  const double scenes = static_cast<double>(data.scene_count());
  out.value /= scenes;
  if (with_grad) out.grad /= scenes;
  return out;
}

inline double nll_objective(const Vector& params, const ParamSpec& spec, const FitDataset& data,
                            double delta_reg) {
  return evaluate_nll(params, spec, data, delta_reg, false).value;
}

inline Vector grad_nll(const Vector& params, const ParamSpec& spec, const FitDataset& data,
                       double delta_reg) {
  return evaluate_nll(params, spec, data, delta_reg, true).grad;
}

/// Per-step correlations implied by the parameters. For the relevance head
/// these are count-weighted means over the dataset's distinct conditionings.
inline std::vector<IpccMatrix> recovered_correlations(const Vector& params, const ParamSpec& spec,
                                                      const FitDataset& data) {
  std::vector<IpccMatrix> out;
  if (spec.kind == Parameterization::DirectRho) {
    for (std::size_t t = 0; t < spec.steps; ++t) out.push_back(direct_correlation(params, spec, t));
    return out;
  }
  const RelevanceHeadParams head = RelevanceHeadParams::unflatten(params, spec.width);
  for (std::size_t t = 0; t < spec.steps; ++t) {
    Matrix acc = Matrix::Zero(spec.agents, spec.agents);
    for (const FitGroup& g : data.groups()) {
      acc += static_cast<double>(g.count) * cosine_relevance(attention_forward(g.latent[t], head)).matrix();
    }
    acc /= static_cast<double>(data.scene_count());
    acc.diagonal().setOnes();
    out.emplace_back(symmetrized(acc));
  }
  return out;
}

struct GradientCheckResult {
  double max_rel_error = 0.0;
  Index worst = -1;
  Vector numeric;
};

/// Central differences against `analytic`. The per-component error is
/// |a - f| / max(|a|, |f|, scale_floor); the floor keeps near-zero
/// components from reporting cancellation noise as relative error.
template <typename Objective>
GradientCheckResult gradient_check(Objective&& objective, const Vector& params, const Vector& analytic,
                                   double step, double scale_floor = 1.0) {
  if (!(step > 0.0)) throw Error(ErrorKind::Domain, "finite-difference step must be > 0");
  if (analytic.size() != params.size()) throw Error(ErrorKind::Dimension, "gradient length mismatch");
  GradientCheckResult out;
  out.numeric.resize(params.size());
  Vector probe = params;
  for (Index k = 0; k < params.size(); ++k) {
    probe(k) = params(k) + step;
    const double up = objective(probe);
    probe(k) = params(k) - step;
    const double down = objective(probe);
    probe(k) = params(k);
    const double fd = (up - down) / (2.0 * step);
    out.numeric(k) = fd;
    const double denom = std::max({std::abs(fd), std::abs(analytic(k)), scale_floor});
    const double err = std::abs(fd - analytic(k)) / denom;
    if (err > out.max_rel_error || out.worst < 0) {
      out.max_rel_error = std::max(out.max_rel_error, err);
      out.worst = k;
    }
  }
  return out;
}

inline GradientCheckResult gradient_check(const Vector& params, const ParamSpec& spec,
                                          const FitDataset& data, double delta_reg, double step) {
  const Vector analytic = grad_nll(params, spec, data, delta_reg);
  return gradient_check([&](const Vector& p) { return nll_objective(p, spec, data, delta_reg); },
                        params, analytic, step);
}

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
class Adam {
 public:
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  Adam(Index size, double learning_rate)
      : lr_(learning_rate), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = beta1 * m_ + (1.0 - beta1) * grad;
    v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

 private:
  double lr_;
  Vector m_, v_;
  long t_ = 0;
};

struct FitReport {
  Parameterization parameterization = Parameterization::DirectRho;
  double final_nll = 0.0;
  std::vector<double> nll_trace;
  std::vector<IpccMatrix> recovered;
  std::size_t iterations_run = 0;
  bool failed = false;
  std::string failure_reason;
  double delta_reg_used = 0.0;
  Vector params;
  ParamSpec spec;
};

inline Vector initial_params(const FitConfig& cfg, const ParamSpec& spec) {
  if (spec.kind == Parameterization::DirectRho) return Vector::Zero(spec.size());
  return init_relevance_head(spec.width, cfg.seed).flatten();
}

/// Adam on nll_objective until max_iters or |dNLL| < convergence_tol. A
/// factorization failure raises delta_reg tenfold once; a second failure
/// ends the fit with failed set.
inline FitReport fit_parameters(const FitConfig& cfg, const FitDataset& data,
                                std::optional<Vector> start = std::nullopt) {
  cfg.validate();
  FitReport report;
  report.parameterization = cfg.parameterization;
  report.spec = param_spec(cfg, data);
  report.delta_reg_used = cfg.delta_reg;
  Vector params = start.value_or(initial_params(cfg, report.spec));
  if (params.size() != report.spec.size()) throw Error(ErrorKind::Dimension, "start vector has the wrong length");
  Adam adam(params.size(), cfg.learning_rate);
  bool escalated = false;
  std::optional<double> previous;

  auto evaluate = [&](bool with_grad) -> std::optional<Evaluation> {
    while (true) {
      try {
        return evaluate_nll(params, report.spec, data, report.delta_reg_used, with_grad);
      } catch (const FactorizationFailure& e) {
        if (escalated) {
          report.failed = true;
          report.failure_reason = std::string(e.what()) + " (delta_reg " +
                                  std::to_string(report.delta_reg_used) + ", iteration " +
                                  std::to_string(report.iterations_run) + ")";
          return std::nullopt;
        }
        escalated = true;
        report.delta_reg_used *= 10.0;
      }
    }
  };

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    const auto eval = evaluate(true);
    if (!eval) break;
    if (!std::isfinite(eval->value) || !eval->grad.allFinite()) {
      report.failed = true;
      report.failure_reason = "non-finite objective at iteration " + std::to_string(iter);
      break;
    }
    report.nll_trace.push_back(eval->value);
    if (previous && std::abs(*previous - eval->value) < cfg.convergence_tol) break;
    previous = eval->value;
    adam.step(params, eval->grad);
    ++report.iterations_run;
  }
  report.params = params;
  if (!report.failed) {
    if (const auto final_eval = evaluate(false)) {
      report.final_nll = final_eval->value;
      report.recovered = recovered_correlations(params, report.spec, data);
    }
  }
  if (report.failed) report.final_nll = std::numeric_limits<double>::quiet_NaN();
  return report;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string nll_trace_csv(const FitReport& report) {
  std::string out = "iteration,nll\n";
  for (std::size_t k = 0; k < report.nll_trace.size(); ++k) {
    out += std::to_string(k) + "," + format_double(report.nll_trace[k]) + "\n";
  }
  return out;
}

inline json_io::Json correlations_to_json(const std::vector<IpccMatrix>& per_step) {
  json_io::Json out = json_io::Json::array();
  for (const IpccMatrix& p : per_step) out.push_back(detail::matrix_to_json(p.matrix()));
  return out;
}

inline json_io::Json fit_report_to_json(const FitReport& r) {
  json_io::Json doc{{"parameterization", std::string(to_string(r.parameterization))},
                    {"final_nll", std::isfinite(r.final_nll) ? json_io::Json(r.final_nll) : json_io::Json()},
                    {"nll_trace", r.nll_trace},
                    {"recovered_rho", correlations_to_json(r.recovered)},
                    {"iterations_run", r.iterations_run},
                    {"failure", {{"flag", r.failed}, {"reason", r.failure_reason}}},
                    {"delta_reg_used", r.delta_reg_used}};
  if (r.parameterization == Parameterization::RelevanceHead && r.params.size() > 0) {
    doc["head"] = head_to_json(RelevanceHeadParams::unflatten(r.params, r.spec.width));
  } else {
    doc["params"] = detail::vector_to_json(r.params);
  }
  return doc;
}

inline json_io::Json fit_config_to_json(const FitConfig& c) {
  return json_io::Json{{"learning_rate", c.learning_rate},
                       {"max_iters", c.max_iters},
                       {"delta_reg", c.delta_reg},
                       {"parameterization", std::string(to_string(c.parameterization))},
                       {"seed", c.seed},
                       {"convergence_tol", c.convergence_tol},
                       {"feature_width", c.feature_width},
                       {"embed_seed", c.embed_seed}};
}

inline FitConfig fit_config_from_json(const json_io::Json& doc) {
  FitConfig c;
  try {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "fit config must be an object");
    auto real = [&](const char* key, double& out) {
      if (auto it = doc.find(key); it != doc.end()) out = json_io::number(*it, key);
    };
    auto unsigned_int = [&](const char* key, auto& out) {
      if (auto it = doc.find(key); it != doc.end()) {
        const long long v = json_io::integer(*it, key);
        if (v < 0) throw Error(ErrorKind::Config, std::string(key) + " must be nonnegative");
        out = static_cast<std::remove_reference_t<decltype(out)>>(v);
      }
    };
    real("learning_rate", c.learning_rate);
    real("delta_reg", c.delta_reg);
    real("convergence_tol", c.convergence_tol);
    unsigned_int("max_iters", c.max_iters);
    unsigned_int("seed", c.seed);
    unsigned_int("feature_width", c.feature_width);
    unsigned_int("embed_seed", c.embed_seed);
    if (auto it = doc.find("parameterization"); it != doc.end()) {
      if (!it->is_string()) throw Error(ErrorKind::Config, "parameterization must be a string");
      c.parameterization = parse_parameterization(it->get<std::string>());
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
  c.validate();
  return c;
}

}  // namespace ipcc
