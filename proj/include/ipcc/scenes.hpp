#pragma once

// Synthetic interacting-agent scenes with known increment correlations, and
// the brute-force estimators used to check them.

#include <cmath>
#include <cstdint>
#include <numbers>
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
#include "ipcc/rng.hpp"
#include "ipcc/scene.hpp"

namespace ipcc {

enum class Pattern { Follow, Yield, Independent, Mixed };

inline std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::Follow: return "follow";
    case Pattern::Yield: return "yield";
    case Pattern::Independent: return "independent";
    case Pattern::Mixed: return "mixed";
  }
  return "independent";
}

inline Pattern parse_pattern(std::string_view name) {
  if (name == "follow") return Pattern::Follow;
  if (name == "yield") return Pattern::Yield;
  if (name == "independent") return Pattern::Independent;
  if (name == "mixed") return Pattern::Mixed;
  throw Error(ErrorKind::Config, "unknown pattern '" + std::string(name) + "'");
}

/// One step is 0.5 s, so base_speed 2.5 m/step is 5 m/s.
struct ScenarioConfig {
  Pattern pattern = Pattern::Independent;
  std::size_t n_agents = 2;
  std::size_t t_obs = 4;
  std::size_t t_fut = 6;
  /// Full N x N override of the increment correlations.
  std::optional<Matrix> target_rho;
  /// Correlation for the pattern's designated pairs (follow 0.9, yield -0.9,
  /// mixed 0.8 between agents 0 and 1).
  std::optional<double> pair_rho;
  double base_speed = 2.5;
  /// Std of the per-step speed perturbation, m/step.
  double noise_sigma = 0.5;
  /// Path curvature in 1/m; 0 gives straight lines.
  double curvature = 0.0;
  /// Std of per-step heading jitter, radians.
  double heading_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Increment correlation matrix implied by a config. Rejects matrices that
/// are not positive semidefinite.
inline IpccMatrix scenario_correlation(const ScenarioConfig& cfg) {
  const Index n = static_cast<Index>(cfg.n_agents);
  if (n < 1) throw Error(ErrorKind::Config, "n_agents must be >= 1");
  Matrix rho = Matrix::Identity(n, n);
  if (cfg.target_rho) {
    if (cfg.target_rho->rows() != n || cfg.target_rho->cols() != n) {
      throw Error(ErrorKind::Config, "target_rho must be n_agents x n_agents");
    }
    rho = *cfg.target_rho;
  } else {
    auto set = [&](Index i, Index j, double v) {
      if (i < n && j < n) rho(i, j) = rho(j, i) = v;
    };
    switch (cfg.pattern) {
      case Pattern::Follow:
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j) set(i, j, cfg.pair_rho.value_or(0.9));
        break;
      case Pattern::Yield:
        for (Index i = 0; i + 1 < n; i += 2) set(i, i + 1, cfg.pair_rho.value_or(-0.9));
        break;
      case Pattern::Independent:
        break;
      case Pattern::Mixed:
        set(0, 1, cfg.pair_rho.value_or(0.8));
        set(0, 2, -0.5);
        set(1, 2, -0.4);
        break;
    }
  }
  std::optional<IpccMatrix> checked;
  try {
    checked.emplace(rho);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, std::string("target_rho: ") + e.what());
  }
  if (const double lo = checked->min_eigenvalue(); lo < -1e-12) {
    throw Error(ErrorKind::Config,
                "target_rho is not positive semidefinite (min eigenvalue " + std::to_string(lo) + ")");
  }
  return *checked;
}

inline void validate(const ScenarioConfig& cfg) {
  if (cfg.n_agents < 1) throw Error(ErrorKind::Config, "n_agents must be >= 1");
  if (cfg.t_obs < 1 || cfg.t_fut < 1) throw Error(ErrorKind::Config, "t_obs and t_fut must be >= 1");
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(cfg.base_speed)) throw Error(ErrorKind::Config, "base_speed must be >= 0");
  if (!(std::isfinite(cfg.noise_sigma) && cfg.noise_sigma > 0.0)) {
    throw Error(ErrorKind::Config, "noise_sigma must be > 0");
  }
  if (!std::isfinite(cfg.curvature)) throw Error(ErrorKind::Config, "curvature must be finite");
  if (!finite_nonneg(cfg.heading_noise)) throw Error(ErrorKind::Config, "heading_noise must be >= 0");
  if (cfg.pair_rho && !(*cfg.pair_rho >= -1.0 && *cfg.pair_rho <= 1.0)) {
    throw Error(ErrorKind::Config, "pair rho outside [-1, 1]");
  }
  scenario_correlation(cfg);
}

struct GeneratedScene {
  SceneSpec scene;
  IpccMatrix rho;
  std::vector<IncrementParams> increments;  ///< one per future step
  Vector initial_heading;                   ///< heading at the current position
};

namespace detail {

struct Layout {
  Matrix start;    // N x 2, position at the current step
  Vector heading;  // N, heading at the current step
};

inline Layout scenario_layout(const ScenarioConfig& cfg) {
  const Index n = static_cast<Index>(cfg.n_agents);
  Rng rng(cfg.seed, 0);
  const double primary = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
  const double crossing = wrap_angle(primary + 0.5 * std::numbers::pi);
  const double gap = 12.0;
  Layout out{Matrix::Zero(n, 2), Vector::Zero(n)};
  auto place = [&](Index i, double heading, double along, double lateral) {
    const Eigen::Vector2d u = heading_vec(heading);
    const Eigen::Vector2d v(-u.y(), u.x());
    out.heading(i) = heading;
    out.start.row(i) = (along * u + lateral * v).transpose();
  };
  for (Index i = 0; i < n; ++i) {
    const double rx = rng.uniform(-50.0, 50.0);
    const double ry = rng.uniform(-50.0, 50.0);
    const double rh = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    switch (cfg.pattern) {
      case Pattern::Follow:
        place(i, primary, -gap * static_cast<double>(i), 0.0);
        break;
      case Pattern::Yield: {
        const double offset = 40.0 * static_cast<double>(i / 2);
        if (i % 2 == 0) {
          place(i, primary, -gap, offset);
        } else {
          place(i, crossing, -gap, -offset);
        }
        break;
      }
      case Pattern::Mixed:
        if (i < 2) {
          place(i, primary, -gap * static_cast<double>(i), 0.0);
        } else if (i == 2) {
          place(i, crossing, -2.0 * gap, 0.0);
        } else {
          out.heading(i) = rh;
          out.start.row(i) << rx, ry;
        }
        break;
      case Pattern::Independent:
        out.heading(i) = rh;
        out.start.row(i) << rx, ry;
        break;
    }
  }
  return out;
}

/// Position and tangent heading after arc length s along a path of constant
/// curvature starting at `start` with heading `h0`.
inline std::pair<Eigen::Vector2d, double> travel(const Eigen::Vector2d& start, double h0,
                                                 double curvature, double s) {
  if (curvature == 0.0) return {start + s * heading_vec(h0), h0};
  const double h = h0 + curvature * s;
  const Eigen::Vector2d delta((std::sin(h) - std::sin(h0)) / curvature,
                              (std::cos(h0) - std::cos(h)) / curvature);
  return {start + delta, h};
}

/// Symmetric square root of a PSD matrix.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// One sampled future for the config's layout. Different `future_index`
/// values give independent futures of the same layout.
///
/// Per-step speeds are base_speed + noise_sigma * e_k with e_k ~ N(0, P),
/// independent over steps, so the increment (cumulative distance) at step t
/// has mean t * base_speed, spread sqrt(t) * noise_sigma and correlation P.
inline GeneratedScene generate_scene(const ScenarioConfig& cfg, std::uint64_t future_index = 0) {
  validate(cfg);
  const IpccMatrix rho = scenario_correlation(cfg);
  const detail::Layout layout = detail::scenario_layout(cfg);
  const Index n = static_cast<Index>(cfg.n_agents);
  const std::size_t t_obs = cfg.t_obs;
  const std::size_t t_fut = cfg.t_fut;
  const Matrix root = detail::psd_sqrt(rho.matrix());
  Rng rng(cfg.seed, 1 + future_index);

  AgentPaths past(static_cast<std::size_t>(n));
  AgentPaths future(static_cast<std::size_t>(n));
  Matrix yaw(n, static_cast<Index>(t_fut));
  for (Index i = 0; i < n; ++i) {
    auto& p = past[static_cast<std::size_t>(i)].positions;
    for (std::size_t k = 0; k < t_obs; ++k) {
      const double s = -static_cast<double>(t_obs - 1 - k) * cfg.base_speed;
      p.push_back(detail::travel(layout.start.row(i).transpose(), layout.heading(i), cfg.curvature, s).first);
    }
    p.back() = layout.start.row(i).transpose();
    future[static_cast<std::size_t>(i)].positions.resize(t_fut);
  }

  Vector distance = Vector::Zero(n);
  Matrix jittered = layout.start;  // polyline state, only used with heading noise
  Vector z(n);
  for (std::size_t t = 0; t < t_fut; ++t) {
    for (Index i = 0; i < n; ++i) z(i) = rng.normal();
    const Vector speed = Vector::Constant(n, cfg.base_speed) + cfg.noise_sigma * (root * z);
    for (Index i = 0; i < n; ++i) {
      distance(i) += speed(i);
      Eigen::Vector2d pos;
      double heading = 0.0;
      if (cfg.heading_noise > 0.0) {
        const double jitter = cfg.heading_noise * rng.normal();
        heading = layout.heading(i) + cfg.curvature * distance(i) + jitter;
        pos = jittered.row(i).transpose() + speed(i) * detail::heading_vec(heading);
        jittered.row(i) = pos.transpose();
      } else {
        std::tie(pos, heading) =
            detail::travel(layout.start.row(i).transpose(), layout.heading(i), cfg.curvature, distance(i));
      }
      future[static_cast<std::size_t>(i)][t] = pos;
      yaw(i, static_cast<Index>(t)) = wrap_angle(heading);
    }
  }

  std::vector<IncrementParams> increments;
  for (std::size_t t = 0; t < t_fut; ++t) {
    const double steps = static_cast<double>(t + 1);
    increments.push_back({Vector::Constant(n, steps * cfg.base_speed),
                          Vector::Constant(n, std::sqrt(steps) * cfg.noise_sigma)});
  }
  return {SceneSpec(std::move(past), std::move(future), std::move(yaw)), rho, std::move(increments),
          layout.heading};
}

inline std::vector<GeneratedScene> generate_dataset(const ScenarioConfig& cfg, std::size_t count) {
  std::vector<GeneratedScene> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(generate_scene(cfg, k));
  return out;
}

/// Signed 1-D increments at step t: displacement from the current position
/// projected on the true heading. Exact for straight, jitter-free scenes.
inline Vector realized_increments(const SceneSpec& scene, std::size_t step) {
  const std::size_t n = scene.agent_count();
  Vector out(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double h = scene.true_yaw()(static_cast<Index>(i), static_cast<Index>(step));
    out(static_cast<Index>(i)) = (scene.future()[i][step] - scene.current(i)).dot(detail::heading_vec(h));
  }
  return out;
}

/// Sample Pearson correlation of the columns of a K x N sample matrix.
inline IpccMatrix empirical_increment_pcc(const Matrix& samples) {
  if (samples.rows() < 2) throw Error(ErrorKind::Domain, "need at least two samples");
  if (!samples.allFinite()) throw Error(ErrorKind::NonFinite, "increment samples");
  const Index n = samples.cols();
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean;
  const Matrix scatter = centered.transpose() * centered;
  for (Index i = 0; i < n; ++i) {
    if (!(scatter(i, i) > 0.0)) {
      throw Error(ErrorKind::ZeroVariance, "column " + std::to_string(i) + " has zero variance");
    }
  }
  Matrix rho = Matrix::Identity(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double r = std::clamp(scatter(i, j) / std::sqrt(scatter(i, i) * scatter(j, j)), -1.0, 1.0);
      rho(i, j) = r;
      rho(j, i) = r;
    }
  }
  return IpccMatrix(std::move(rho));
}

struct YawErrorStats {
  double mean_deg = 0.0;
  double std_deg = 0.0;
  static constexpr double bin_width_deg = 5.0;
  static constexpr double range_deg = 90.0;
  std::vector<std::size_t> histogram = std::vector<std::size_t>(36, 0);  ///< [-90, 90) in 5 deg bins
  std::size_t below = 0;    ///< errors < -90 deg
  std::size_t above = 0;    ///< errors >= 90 deg
  std::size_t skipped = 0;  ///< stationary agent steps
  std::vector<double> errors_deg;  ///< scene, agent, step order
};

/// Distribution of wrap(true yaw - estimated yaw) over every agent and future
/// step, with the estimate taken from the displacement since the current step.
inline YawErrorStats yaw_error_distribution(std::span<const SceneSpec> scenes) {
  YawErrorStats stats;
  for (const SceneSpec& scene : scenes) {
    for (std::size_t i = 0; i < scene.agent_count(); ++i) {
      for (std::size_t t = 0; t < scene.future_len(); ++t) {
        const Point d = scene.future()[i][t] - scene.current(i);
        double theta = 0.0;
        try {
          theta = estimate_yaw(d.x(), d.y());
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::DegenerateHeading) throw;
          ++stats.skipped;
          continue;
        }
        const double phi = scene.true_yaw()(static_cast<Index>(i), static_cast<Index>(t));
        stats.errors_deg.push_back(wrap_angle(phi - theta) * 180.0 / std::numbers::pi);
      }
    }
  }
  const auto& e = stats.errors_deg;
  if (!e.empty()) {
    double sum = 0.0;
    for (double x : e) sum += x;
    stats.mean_deg = sum / static_cast<double>(e.size());
    double sq = 0.0;
    for (double x : e) sq += (x - stats.mean_deg) * (x - stats.mean_deg);
    stats.std_deg = std::sqrt(sq / static_cast<double>(e.size()));
  }
  for (double x : e) {
    if (x < -YawErrorStats::range_deg) {
      ++stats.below;
    } else if (x >= YawErrorStats::range_deg) {
      ++stats.above;
    } else {
      const auto bin = static_cast<std::size_t>((x + YawErrorStats::range_deg) / YawErrorStats::bin_width_deg);
      ++stats.histogram[std::min<std::size_t>(bin, stats.histogram.size() - 1)];
    }
  }
  return stats;
}

/// Stand-in for backbone latents on synthetic scenes: the last observed
/// heading (cos, sin), a squashed speed, the step fraction, then a seeded
/// per-agent embedding filling the remaining channels.
inline LatentFeatures synthetic_latent(const SceneSpec& scene, std::size_t step, Index width,
                                       std::uint64_t embed_seed) {
  if (width <= 0) throw Error(ErrorKind::Dimension, "latent width must be positive");
  const Index n = static_cast<Index>(scene.agent_count());
  Matrix features(n, width);
  for (Index i = 0; i < n; ++i) {
    Vector row(std::max<Index>(width, 4));
    Point v = Point::Zero();
    if (scene.past_len() >= 2) {
      const auto& p = scene.past()[static_cast<std::size_t>(i)].positions;
      v = p[p.size() - 1] - p[p.size() - 2];
    }
    const double speed = v.norm();
    row(0) = speed > 0.0 ? v.x() / speed : 0.0;
    row(1) = speed > 0.0 ? v.y() / speed : 0.0;
    row(2) = speed / (1.0 + speed);
    row(3) = static_cast<double>(step + 1) / static_cast<double>(scene.future_len());
    Rng rng(embed_seed, static_cast<std::uint64_t>(i));
    for (Index c = 4; c < row.size(); ++c) row(c) = rng.normal();
    features.row(i) = row.head(width).transpose();
  }
  return LatentFeatures(std::move(features));
}

inline json_io::Json scenario_to_json(const ScenarioConfig& cfg) {
  json_io::Json doc{{"pattern", std::string(to_string(cfg.pattern))},
                    {"n_agents", cfg.n_agents},
                    {"t_obs", cfg.t_obs},
                    {"t_fut", cfg.t_fut},
                    {"base_speed", cfg.base_speed},
                    {"noise_sigma", cfg.noise_sigma},
                    {"curvature", cfg.curvature},
                    {"heading_noise", cfg.heading_noise},
                    {"seed", cfg.seed}};
  if (cfg.target_rho) {
    doc["target_rho"] = detail::matrix_to_json(*cfg.target_rho);
  } else if (cfg.pair_rho) {
    doc["target_rho"] = *cfg.pair_rho;
  }
  return doc;
}

/// Unknown keys are ignored; `target_rho` may be a scalar (designated pairs)
/// or a full matrix.
inline ScenarioConfig scenario_from_json(const json_io::Json& doc) {
  ScenarioConfig cfg;
  auto count = [&](const char* key, std::size_t& out) {
    if (auto it = doc.find(key); it != doc.end()) {
      const long long v = json_io::integer(*it, key);
      if (v < 1) throw Error(ErrorKind::Config, std::string(key) + " must be >= 1");
      out = static_cast<std::size_t>(v);
    }
  };
  auto real = [&](const char* key, double& out) {
    if (auto it = doc.find(key); it != doc.end()) out = json_io::number(*it, key);
  };
  try {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "scenario config must be an object");
    if (auto it = doc.find("pattern"); it != doc.end()) {
      if (!it->is_string()) throw Error(ErrorKind::Config, "pattern must be a string");
      cfg.pattern = parse_pattern(it->get<std::string>());
    }
    count("n_agents", cfg.n_agents);
    count("t_obs", cfg.t_obs);
    count("t_fut", cfg.t_fut);
    real("base_speed", cfg.base_speed);
    real("noise_sigma", cfg.noise_sigma);
    real("curvature", cfg.curvature);
    real("heading_noise", cfg.heading_noise);
    if (auto it = doc.find("seed"); it != doc.end()) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
        throw Error(ErrorKind::Config, "seed must be a nonnegative integer");
      }
      cfg.seed = it->get<std::uint64_t>();
    }
    if (auto it = doc.find("target_rho"); it != doc.end()) {
      if (it->is_number()) {
        cfg.pair_rho = json_io::number(*it, "target_rho");
      } else {
        const Index n = static_cast<Index>(cfg.n_agents);
        cfg.target_rho = detail::matrix_from_json(*it, n, n, "target_rho");
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
  validate(cfg);
  return cfg;
}

/// Ground-truth sidecar written next to each generated scene.
inline json_io::Json truth_to_json(const GeneratedScene& g) {
  json_io::Json mu = json_io::Json::array();
  json_io::Json sigma = json_io::Json::array();
  for (const IncrementParams& inc : g.increments) {
    mu.push_back(detail::vector_to_json(inc.mu_delta));
    sigma.push_back(detail::vector_to_json(inc.sigma_delta));
  }
  return json_io::Json{{"rho", detail::matrix_to_json(g.rho.matrix())},
                       {"mu_delta", std::move(mu)},
                       {"sigma_delta", std::move(sigma)},
                       {"initial_heading", detail::vector_to_json(g.initial_heading)}};
}

inline GeneratedScene truth_from_json(SceneSpec scene, const json_io::Json& doc) {
  const Index n = static_cast<Index>(scene.agent_count());
  const std::size_t t_fut = scene.future_len();
  IpccMatrix rho(detail::matrix_from_json(json_io::field(doc, "rho"), n, n, "rho"));
  const auto& mu = json_io::array(json_io::field(doc, "mu_delta"), t_fut, "mu_delta");
  const auto& sigma = json_io::array(json_io::field(doc, "sigma_delta"), t_fut, "sigma_delta");
  std::vector<IncrementParams> increments;
  for (std::size_t t = 0; t < t_fut; ++t) {
    IncrementParams inc{detail::vector_from_json(mu[t], n, "mu_delta"),
                        detail::vector_from_json(sigma[t], n, "sigma_delta")};
    inc.validate();
    increments.push_back(std::move(inc));
  }
  Vector heading = detail::vector_from_json(json_io::field(doc, "initial_heading"), n, "initial_heading");
  return {std::move(scene), std::move(rho), std::move(increments), std::move(heading)};
}

}  // namespace ipcc
