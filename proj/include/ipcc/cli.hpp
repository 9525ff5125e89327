#pragma once

// Command implementations behind the `ipcc` executable. Each returns a
// process exit code and writes diagnostics to `err`.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ipcc/error.hpp"
#include "ipcc/fit.hpp"
#include "ipcc/json_io.hpp"
#include "ipcc/metrics.hpp"
#include "ipcc/scene.hpp"
#include "ipcc/scenes.hpp"
#include "ipcc/version.hpp"

namespace ipcc::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kIoError = 2,
  kFitFailure = 3,
  kGradcheckFailure = 4,
};

inline int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::Io ? kIoError : kConfigError;
}

/// Written once per run as manifest.json in the output directory.
struct RunManifest {
  std::string command;
  json_io::Json config;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  double wall_clock_seconds = 0.0;

  json_io::Json to_json() const {
    return json_io::Json{{"command", command},       {"config", config},
                         {"seed", seed},             {"artifacts", artifacts},
                         {"wall_clock_seconds", wall_clock_seconds}, {"version", kVersion}};
  }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

inline std::string scene_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", k);
  return buf;
}

inline bool is_scene_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return p.extension() == ".json" && name.rfind("scene_", 0) == 0 &&
         name.find(".truth.") == std::string::npos;
}

inline std::vector<fs::path> list_json(const fs::path& dir, bool scenes_only) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const fs::path& p = entry.path();
    if (!entry.is_regular_file()) continue;
    if (scenes_only ? is_scene_file(p) : p.extension() == ".json") out.push_back(p);
  }
  if (ec) throw Error(ErrorKind::Io, "cannot list " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

inline fs::path truth_path(const fs::path& scene) {
  return scene.parent_path() / (scene.stem().string() + ".truth.json");
}

inline void write_manifest(const fs::path& out_dir, RunManifest manifest, const Stopwatch& clock) {
  manifest.wall_clock_seconds = clock.seconds();
  json_io::write_file(out_dir / "manifest.json", manifest.to_json());
}

}  // namespace detail

struct GenerateOptions {
  fs::path config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
};

/// Writes scene_NNNNN.json and scene_NNNNN.truth.json for each of the
/// config's `count` futures (default 1), plus manifest.json.
inline int cmd_generate(const GenerateOptions& opt, std::ostream& err) {
  detail::Stopwatch clock;
  json_io::Json doc;
  ScenarioConfig cfg;
  std::size_t count = 1;
  try {
    doc = json_io::read_file(opt.config);
    if (opt.seed && doc.is_object()) doc["seed"] = *opt.seed;
    cfg = scenario_from_json(doc);
    if (auto it = doc.find("count"); it != doc.end()) {
      const long long c = json_io::integer(*it, "count");
      if (c < 1) throw Error(ErrorKind::Config, "count must be >= 1");
      count = static_cast<std::size_t>(c);
    }
  } catch (const Error& e) {
    err << "generate: " << e.what() << '\n';
    return exit_code_for(e);
  }
  try {
    detail::ensure_dir(opt.out_dir);
    RunManifest manifest{"generate", doc, cfg.seed, {}, 0.0};
    for (std::size_t k = 0; k < count; ++k) {
      const GeneratedScene g = generate_scene(cfg, k);
      const std::string name = detail::scene_name(k);
      save_scene(g.scene, opt.out_dir / (name + ".json"));
      json_io::write_file(opt.out_dir / (name + ".truth.json"), truth_to_json(g));
      manifest.artifacts.push_back(name + ".json");
      manifest.artifacts.push_back(name + ".truth.json");
    }
    detail::write_manifest(opt.out_dir, std::move(manifest), clock);
  } catch (const Error& e) {
    err << "generate: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

/// Loads every scene_*.json with its truth sidecar from `dir`, in name order.
inline std::vector<GeneratedScene> load_dataset(const fs::path& dir) {
  std::vector<GeneratedScene> out;
  for (const fs::path& p : detail::list_json(dir, true)) {
    SceneSpec scene = load_scene(p);
    out.push_back(truth_from_json(std::move(scene), json_io::read_file(detail::truth_path(p))));
  }
  return out;
}

struct FitOptions {
  fs::path dataset_dir;
  fs::path config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta_reg;
};

/// Writes fit_report.json, nll_trace.csv, recovered_rho.json, manifest.json.
inline int cmd_fit(const FitOptions& opt, std::ostream& err) {
  detail::Stopwatch clock;
  FitConfig cfg;
  std::vector<FitScene> scenes;
  try {
    json_io::Json doc = json_io::read_file(opt.config);
    if (doc.is_object()) {
      if (opt.seed) doc["seed"] = *opt.seed;
      if (opt.delta_reg) doc["delta_reg"] = *opt.delta_reg;
    }
    cfg = fit_config_from_json(doc);
    const std::vector<GeneratedScene> data = load_dataset(opt.dataset_dir);
    if (data.empty()) throw Error(ErrorKind::Config, "no scene_*.json files in " + opt.dataset_dir.string());
    const Index width = cfg.parameterization == Parameterization::RelevanceHead ? cfg.feature_width : 0;
    for (const GeneratedScene& g : data) scenes.push_back(make_fit_scene(g, width, cfg.embed_seed));
  } catch (const Error& e) {
    err << "fit: " << e.what() << '\n';
    return exit_code_for(e);
  }

  FitReport report;
  try {
    const FitDataset dataset(scenes);
    report = fit_parameters(cfg, dataset);
  } catch (const Error& e) {
    err << "fit: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    detail::ensure_dir(opt.out_dir);
    json_io::write_file(opt.out_dir / "fit_report.json", fit_report_to_json(report));
    json_io::write_text(opt.out_dir / "nll_trace.csv", nll_trace_csv(report));
    json_io::write_file(opt.out_dir / "recovered_rho.json", correlations_to_json(report.recovered));
    RunManifest manifest{"fit",
                         {{"fit", fit_config_to_json(cfg)}, {"dataset", opt.dataset_dir.string()}},
                         cfg.seed,
                         {"fit_report.json", "nll_trace.csv", "recovered_rho.json"},
                         0.0};
    detail::write_manifest(opt.out_dir, std::move(manifest), clock);
  } catch (const Error& e) {
    err << "fit: " << e.what() << '\n';
    return kIoError;
  }
  if (report.failed) {
    err << "fit: optimization failed: " << report.failure_reason << '\n';
    return kFitFailure;
  }
  return kOk;
}

struct EvalOptions {
  fs::path pred;
  fs::path gt;
  fs::path out_csv;
};

struct EvalRow {
  std::string scene_id;
  MetricResult ade;
  MetricResult fde;
};

/// CSV rows `scene_id,metric,value,argmin_mode`, then per-metric means
/// under scene_id "mean" with an empty argmin_mode.
inline std::string metrics_csv(const std::vector<EvalRow>& rows) {
  std::string out = "scene_id,metric,value,argmin_mode\n";
  double ade = 0.0;
  double fde = 0.0;
  for (const EvalRow& r : rows) {
    out += r.scene_id + ",minJointADE," + format_double(r.ade.value) + "," + std::to_string(r.ade.argmin_mode) + "\n";
    out += r.scene_id + ",minJointFDE," + format_double(r.fde.value) + "," + std::to_string(r.fde.argmin_mode) + "\n";
    ade += r.ade.value;
    fde += r.fde.value;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    out += "mean,minJointADE," + format_double(ade / n) + ",\n";
    out += "mean,minJointFDE," + format_double(fde / n) + ",\n";
  }
  return out;
}

/// `pred` and `gt` are either a ModeSet file and a scene file, or two
/// directories whose files are paired by name.
inline int cmd_eval(const EvalOptions& opt, std::ostream& err) {
  std::vector<EvalRow> rows;
  try {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    std::error_code ec;
    if (!fs::exists(opt.pred, ec)) throw Error(ErrorKind::Io, "missing " + opt.pred.string());
    if (!fs::exists(opt.gt, ec)) throw Error(ErrorKind::Io, "missing " + opt.gt.string());
    if (fs::is_directory(opt.gt)) {
      for (const fs::path& g : detail::list_json(opt.gt, true)) {
        const fs::path p = opt.pred / g.filename();
        if (!fs::exists(p, ec)) throw Error(ErrorKind::Io, "no prediction for " + g.filename().string());
        pairs.emplace_back(p, g);
      }
      if (pairs.empty()) throw Error(ErrorKind::Config, "no scenes in " + opt.gt.string());
    } else {
      pairs.emplace_back(opt.pred, opt.gt);
    }
    for (const auto& [p, g] : pairs) {
      const SceneSpec scene = load_scene(g);
      const ModeSet modes = load_modes(p);
      rows.push_back({g.stem().string(), min_joint_ade(modes, scene.future()),
                      min_joint_fde(modes, scene.future())});
    }
  } catch (const Error& e) {
    err << "eval: " << e.what() << '\n';
    return exit_code_for(e);
  }
  try {
    json_io::write_text(opt.out_csv, metrics_csv(rows));
  } catch (const Error& e) {
    err << "eval: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t agents = 3;
  std::size_t steps = 4;
  std::size_t futures = 8;
  double step = 1e-6;
  /// Larger than the fitting default: marginal blocks are rank one, so at
  /// 1e-4 the smallest eigenvalues of the joint equal the regularizer and a
  /// 1e-6 central difference is dominated by roundoff, not by the gradient.
  double delta_reg = 1e-2;
  double threshold = 1e-5;
  /// Test hook: perturbs one analytic gradient component.
  bool inject_bug = false;
};

struct GradcheckOutcome {
  double direct_error = 0.0;
  double head_error = 0.0;
  double max_error() const { return std::max(direct_error, head_error); }
};

/// Synthetic mixed-pattern problem with random parameters for both
/// parameterizations.
inline GradcheckOutcome run_gradcheck(const GradcheckOptions& opt) {
  ScenarioConfig sc;
  sc.pattern = Pattern::Mixed;
  sc.n_agents = opt.agents;
  sc.t_fut = opt.steps;
  sc.seed = opt.seed;
  constexpr Index width = 8;
  std::vector<FitScene> scenes;
  for (const GeneratedScene& g : generate_dataset(sc, opt.futures)) scenes.push_back(make_fit_scene(g, width));
  const FitDataset data(scenes);

  GradcheckOutcome out;
  for (const Parameterization kind : {Parameterization::DirectRho, Parameterization::RelevanceHead}) {
    const ParamSpec spec{kind, data.agent_count(), data.step_count(), width};
    Vector params;
    if (kind == Parameterization::DirectRho) {
      Rng rng(opt.seed, 99);
      params.resize(spec.size());
      for (Index k = 0; k < params.size(); ++k) params(k) = rng.uniform(-0.5, 0.5);
    } else {
      params = init_relevance_head(width, opt.seed).flatten();
    }
    Vector analytic = grad_nll(params, spec, data, opt.delta_reg);
    if (opt.inject_bug && analytic.size() > 0) analytic(0) += 1e-3 * std::max(1.0, std::abs(analytic(0)));
    const double e =
        gradient_check([&](const Vector& p) { return nll_objective(p, spec, data, opt.delta_reg); }, params,
                       analytic, opt.step)
            .max_rel_error;
    (kind == Parameterization::DirectRho ? out.direct_error : out.head_error) = e;
  }
  return out;
}

inline int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
  GradcheckOutcome result;
  try {
    result = run_gradcheck(opt);
  } catch (const Error& e) {
    err << "gradcheck: " << e.what() << '\n';
    return exit_code_for(e);
  }
  out << "direct-rho max relative error: " << format_double(result.direct_error) << '\n'
      << "relevance-head max relative error: " << format_double(result.head_error) << '\n'
      << "max relative gradient error: " << format_double(result.max_error()) << '\n';
  if (!(result.max_error() < opt.threshold)) {
    err << "gradcheck: error exceeds " << format_double(opt.threshold) << '\n';
    return kGradcheckFailure;
  }
  return kOk;
}

}  // namespace ipcc::cli
