// Command-line front end: spectrum, flow, simulate, density, rate, pipeline, verify.
#include <iostream>

#include <CLI11.hpp>

#include "peano/experiment.hpp"

namespace {

int run(const std::string& config, const peano::RunOptions& opt) {
  try {
    return peano::run_pipeline(peano::load_experiment(config), opt, std::cout);
  } catch (const peano::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == peano::ErrorKind::Config ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peano_lab: small-noise experiments for gradient systems with a Peano point"};
  app.require_subcommand(1);

  std::string config, out, stage = "rate";
  std::uint64_t seed = 0;
  int workers = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "master seed (overrides sde.master_seed)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  };

  const std::vector<std::pair<std::string, std::string>> stages{
      {"spectrum", "bottom of the Schrodinger spectrum"},
      {"flow", "extremal flows and the function g (runs spectrum first)"},
      {"simulate", "Euler-Maruyama ensembles along the epsilon ladder"},
      {"density", "density estimates and rate extrapolation"},
      {"rate", "rate functionals and selection weights"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : stages) {
    subs.push_back(app.add_subcommand(name, help));
    common(subs.back());
  }
  CLI::App* pipeline = app.add_subcommand("pipeline", "all stages, or up to --stage");
  common(pipeline);
  pipeline->add_option("--stage", stage, "last stage to run")
      ->check(CLI::IsMember({"spectrum", "flow", "simulate", "density", "rate"}));
  CLI::App* verify = app.add_subcommand("verify", "invariant checks");
  verify->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (verify->parsed()) return peano::run_verify(std::cout, workers) == 0 ? 0 : 2;

  peano::RunOptions opt;
  opt.out_dir = out;
  opt.workers = workers;
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) opt.last_stage = stages[i].first;
  if (pipeline->parsed()) opt.last_stage = stage;
  for (CLI::App* sub : subs)
    if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
  if (pipeline->count("--seed")) opt.seed = seed;
  return run(config, opt);
}
