#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ipcc/cli.hpp"

int main(int argc, char** argv) {
  using namespace ipcc::cli;

  CLI::App app{"Joint Gaussian multi-agent prediction tools"};
  app.set_version_flag("--version", std::string(ipcc::kVersion));
  app.require_subcommand(1);

  GenerateOptions gen;
  std::optional<std::uint64_t> gen_seed;
  auto* generate = app.add_subcommand("generate", "Generate synthetic scenes with ground truth");
  generate->add_option("config", gen.config, "Scenario config JSON")->required();
  generate->add_option("out,--out", gen.out_dir, "Output directory");
  generate->add_option("--seed", gen_seed, "Override the config seed");

  FitOptions fit;
  std::optional<std::uint64_t> fit_seed;
  std::optional<double> fit_delta;
  auto* fitcmd = app.add_subcommand("fit", "Fit increment correlations by maximum likelihood");
  fitcmd->add_option("dataset", fit.dataset_dir, "Directory of generated scenes")->required();
  fitcmd->add_option("config", fit.config, "Fit config JSON")->required();
  fitcmd->add_option("out,--out", fit.out_dir, "Output directory");
  fitcmd->add_option("--seed", fit_seed, "Override the config seed");
  fitcmd->add_option("--delta-reg", fit_delta, "Override the Tikhonov regularization");

  EvalOptions eval;
  auto* evalcmd = app.add_subcommand("eval", "Compute minJointADE / minJointFDE");
  evalcmd->add_option("pred", eval.pred, "ModeSet JSON file or directory")->required();
  evalcmd->add_option("gt", eval.gt, "Scene JSON file or directory")->required();
  evalcmd->add_option("out,--out", eval.out_csv, "Output CSV");

  GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck->add_option("--seed", gc.seed, "Problem seed");
  gradcheck->add_option("--agents", gc.agents, "Number of agents")->check(CLI::PositiveNumber);
  gradcheck->add_option("--steps", gc.steps, "Number of future steps")->check(CLI::PositiveNumber);
  gradcheck->add_option("--futures", gc.futures, "Sampled futures in the dataset")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gc.step, "Finite-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--delta-reg", gc.delta_reg, "Tikhonov regularization");
  gradcheck->add_flag("--inject-bug", gc.inject_bug, "Perturb one analytic gradient term")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (generate->parsed()) {
    if (gen.out_dir.empty()) gen.out_dir = ".";
    gen.seed = gen_seed;
    return cmd_generate(gen, std::cerr);
  }
  if (fitcmd->parsed()) {
    if (fit.out_dir.empty()) fit.out_dir = ".";
    fit.seed = fit_seed;
    fit.delta_reg = fit_delta;
    return cmd_fit(fit, std::cerr);
  }
  if (evalcmd->parsed()) {
    if (eval.out_csv.empty()) eval.out_csv = "metrics.csv";
    return cmd_eval(eval, std::cerr);
  }
  return cmd_gradcheck(gc, std::cout, std::cerr);
}
