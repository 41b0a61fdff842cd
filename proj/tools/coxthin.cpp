// coxthin: batch front end for simulating, fitting and comparing thinned
// log-Gaussian Cox process models. See README.md for the config schema.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coxthin/commands.hpp"
#include "coxthin/config.hpp"
#include "coxthin/errors.hpp"

namespace {

int exit_code_for(const coxthin::Error& e) {
  switch (e.kind()) {
    case coxthin::ErrorKind::config: return 2;
    case coxthin::ErrorKind::data: return 3;
    case coxthin::ErrorKind::convergence: return 4;
    case coxthin::ErrorKind::numeric: return 5;
    case coxthin::ErrorKind::internal: return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thinned log-Gaussian Cox process toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string model_name;
  std::vector<std::string> model_names;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool no_timestamp = false;
  int n_trials = 20;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
      seed_given = true;
    });
    cmd->add_flag("--no-timestamp", no_timestamp, "omit timestamp lines from reports");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate a scenario to files");
  add_common(sim);
  CLI::App* fit = app.add_subcommand("fit", "fit one model and write its report");
  add_common(fit);
  fit->add_option("--model", model_name, "model name from config")->required();
  CLI::App* cmp = app.add_subcommand("compare", "fit models and rank by residual CRPS");
  add_common(cmp);
  cmp->add_option("--model", model_names, "model names (repeatable; default: all)");
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  add_common(grad);
  grad->add_option("--model", model_name, "model name from config")->required();
  grad->add_option("--trials", n_trials, "number of random parameter points");

  CLI11_PARSE(app, argc, argv);

  try {
    coxthin::RunConfig cfg = coxthin::load_config(config_path);
    coxthin::CommandOptions opt;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    if (seed_given) opt.seed = seed;
    opt.no_timestamp = no_timestamp;

    if (sim->parsed()) {
      auto result = coxthin::cmd_simulate(cfg, opt);
      std::cout << "wrote " << result.artifacts.size() << " artifacts; manifest: "
                << result.manifest_path.string() << "\n";
    } else if (fit->parsed()) {
      auto result = coxthin::cmd_fit(cfg, model_name, opt);
      std::cout << "fit report: " << result.report_path.string() << "\n";
    } else if (cmp->parsed()) {
      std::vector<std::string> names = model_names;
      if (names.empty())
        for (const auto& m : cfg.models) names.push_back(m.spec.name);
      auto result = coxthin::cmd_compare(cfg, names, opt);
      std::cout << "comparison: " << result.table_path.string() << "\n";
    } else if (grad->parsed()) {
      auto result = coxthin::cmd_gradcheck(cfg, model_name, n_trials, opt);
      std::cout << "gradcheck report: " << result.report_path.string() << "\n";
      if (!result.passed) {
        std::cerr << "gradcheck FAILED: max relative error "
                  << result.report.max_rel_error << " at "
                  << result.report.worst_coord << "\n";
        return 1;
      }
    }
    return 0;
  } catch (const coxthin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
