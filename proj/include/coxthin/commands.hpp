#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coxthin/config.hpp"
#include "coxthin/diagnostics.hpp"
#include "coxthin/inference.hpp"
#include "coxthin/pattern_io.hpp"
#include "coxthin/raster_io.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

// Command-layer options shared by the CLI and the test harness.
struct CommandOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  bool no_timestamp = false;
};

namespace detail {

inline std::string timestamp_line(bool suppressed) {
  if (suppressed) return "";
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << "# timestamp: " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
  return os.str();
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

struct LoadedData {
  std::vector<MarkedPointPattern> patterns;
  std::map<std::string, RasterLayer> rasters;
  RasterGrid grid;
};

inline LoadedData load_model_data(const RunConfig& cfg, const ModelConfig& mc) {
  LoadedData data;
  std::string ppath = mc.patterns_path ? *mc.patterns_path
                      : cfg.patterns_path ? *cfg.patterns_path
                                          : "";
  if (ppath.empty())
    throw ConfigError("model '" + mc.spec.name + "': no point-pattern file configured");
  auto resolved = cfg.resolve(ppath);
  if (!std::filesystem::exists(resolved))
    throw ConfigError("model '" + mc.spec.name + "': pattern file does not exist: " +
                      resolved.string());
  data.patterns = load_point_pattern(resolved);

  for (const auto& [name, path] : cfg.raster_paths) {
    auto rpath = cfg.resolve(path);
    if (!std::filesystem::exists(rpath))
      throw ConfigError("raster '" + name + "' does not exist: " + rpath.string());
    data.rasters.emplace(name, load_raster(rpath));
  }
  if (cfg.grid)
    data.grid = *cfg.grid;
  else if (!data.rasters.empty())
    data.grid = data.rasters.begin()->second.grid;
  else
    throw ConfigError("config needs either data.grid or at least one raster");
  return data;
}

struct FitOutcome {
  std::unique_ptr<ThinnedLgcpEngine> engine;  // holds a mutex; heap keeps it movable
  HyperProfile profile;
  std::vector<Eigen::VectorXd> draws;
  std::vector<ParamSummary> summaries;
};

inline FitOutcome run_fit(const RunConfig& cfg, const ModelConfig& mc,
                          std::uint64_t seed, int n_draws) {
  LoadedData loaded = load_model_data(cfg, mc);
  AssembledData data = assemble_data(loaded.patterns, loaded.rasters, loaded.grid,
                                     mc.spec, cfg.run.radius_candidates,
                                     cfg.run.coverage_target);
  FitOutcome out;
  out.engine = std::make_unique<ThinnedLgcpEngine>(std::move(data), mc.spec);
  auto grid = build_hyper_grid(mc.spec);
  out.profile = out.engine->profile_hyperparams(grid, cfg.run.tolerances);
  out.draws = out.engine->sample_posterior(out.profile, n_draws, seed);
  out.summaries =
      summarize_posterior(*out.engine, out.draws, mc.spec.intensity_covariates);
  return out;
}

inline std::string fit_report_text(const ModelConfig& mc, const FitOutcome& fit,
                                   std::uint64_t seed, bool no_timestamp) {
  std::ostringstream os;
  const auto& eng = *fit.engine;
  const auto& d = eng.data();
  os << "# coxthin fit report\n";
  os << timestamp_line(no_timestamp);
  os << "# model: " << mc.spec.name << "\n";
  os << "# kind: " << (mc.spec.detection.empty() ? "unthinned" : "thinned") << "\n";
  os << "# seed: " << seed << "\n";
  os << "# campaigns: " << eng.layout().T << "\n";
  os << "# active_cells: " << eng.layout().n << "\n";
  os << "# intensity_covariates: " << eng.layout().P << "\n";
  os << "# detection_components: " << eng.layout().K << "\n";
  os << "# gp_groups: " << eng.layout().L << "\n";
  if (d.used_local_frequency) {
    os << "# local_frequency_radius: " << format_double(d.radius.radius)
       << " (coverage " << fmt(d.radius.coverage)
       << (d.radius.fallback ? ", fallback to largest candidate" : "") << ")\n";
  }
  os << "# posterior_samples: " << fit.draws.size() << "\n";
  os << "# profile_points: " << fit.profile.points.size() << "\n";
  int converged = 0, total_iter = 0;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (const auto& pt : fit.profile.points) {
    if (!pt.ok) continue;
    ++converged;
    total_iter += pt.iterations;
    best_obj = std::max(best_obj, pt.objective);
  }
  os << "# profile_points_converged: " << converged << "\n";
  os << "# newton_iterations_total: " << total_iter << "\n";
  os << "# best_log_joint: " << fmt(best_obj) << "\n";
  os << "# profile_weights:";
  for (const auto& pt : fit.profile.points) os << ' ' << fmt(pt.weight);
  os << "\n";
  os << "parameter,mean,sd,q025,q975\n";
  for (const auto& s : fit.summaries)
    os << s.name << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ',' << fmt(s.q025)
       << ',' << fmt(s.q975) << "\n";
  return os.str();
}

}  // namespace detail

struct SimulateResult {
  std::filesystem::path manifest_path;
  std::vector<std::pair<std::string, std::uint64_t>> artifacts;  // name, checksum
};

inline SimulateResult cmd_simulate(const RunConfig& cfg, const CommandOptions& opt = {}) {
  if (!cfg.scenario) throw ConfigError("config has no scenario block");
  SimScenario scenario = *cfg.scenario;
  if (opt.seed) scenario.seed = *opt.seed;
  std::filesystem::path out = opt.out_dir ? *opt.out_dir : cfg.output_dir;
  std::filesystem::create_directories(out);

  SimResult sim = simulate_campaigns(scenario);
  SimulateResult result;
  auto emit = [&](const std::string& name, const std::string& content) {
    atomic_write(out / name, content);
    result.artifacts.emplace_back(name, fnv1a64(content));
  };

  for (std::size_t j = 0; j < scenario.covariate_names.size(); ++j)
    emit("cov_" + scenario.covariate_names[j] + ".asc", raster_ascii(sim.covariates[j]));
  for (int t = 0; t < scenario.n_campaigns; ++t) {
    std::string suffix = "_c" + std::to_string(t + 1) + ".asc";
    emit("lambda_pot" + suffix, raster_ascii(sim.lambda_pot[static_cast<std::size_t>(t)]));
    emit("p" + suffix, raster_ascii(sim.p_fields[static_cast<std::size_t>(t)]));
    for (std::size_t k = 0; k < scenario.detection.size(); ++k) {
      const auto& comp = scenario.detection[k];
      emit("det_" + comp.name + suffix,
           raster_ascii(sim.mark_layers[static_cast<std::size_t>(t)][k]));
    }
  }
  emit("true_patterns.csv", point_pattern_csv(sim.true_patterns));
  emit("observed_patterns.csv", point_pattern_csv(sim.observed_patterns));

  std::ostringstream manifest;
  manifest << "# coxthin simulate manifest\n";
  manifest << detail::timestamp_line(opt.no_timestamp);
  manifest << "# seed: " << scenario.seed << "\n";
  for (const auto& [name, sum] : result.artifacts)
    manifest << checksum_hex(sum) << "  " << name << "\n";
  result.manifest_path = out / "manifest.txt";
  atomic_write(result.manifest_path, manifest.str());
  return result;
}

struct FitResult {
  std::filesystem::path report_path;
  std::vector<ParamSummary> summaries;
};

inline FitResult cmd_fit(const RunConfig& cfg, const std::string& model_name,
                         const CommandOptions& opt = {}) {
  const ModelConfig& mc = cfg.model(model_name);
  std::uint64_t seed = opt.seed ? *opt.seed : cfg.seed;
  std::filesystem::path out = opt.out_dir ? *opt.out_dir : cfg.output_dir;
  auto fit = detail::run_fit(cfg, mc, seed, cfg.run.posterior_samples);
  FitResult result;
  result.summaries = fit.summaries;
  result.report_path = out / ("fit_" + model_name + ".txt");
  atomic_write(result.report_path,
               detail::fit_report_text(mc, fit, seed, opt.no_timestamp));
  return result;
}

struct CompareResult {
  std::filesystem::path csv_path;
  std::filesystem::path table_path;
  ResidualReport report;
};

inline CompareResult cmd_compare(const RunConfig& cfg,
                                 const std::vector<std::string>& model_names,
                                 const CommandOptions& opt = {}) {
  if (model_names.empty()) throw ConfigError("compare: no models named");
  std::uint64_t seed = opt.seed ? *opt.seed : cfg.seed;
  std::filesystem::path out = opt.out_dir ? *opt.out_dir : cfg.output_dir;
  std::filesystem::create_directories(out);

  // Fit every model, then score each against its own data.
  std::vector<detail::FitOutcome> fits;
  std::vector<std::vector<MarkedPointPattern>> datasets;
  fits.reserve(model_names.size());
  for (const auto& name : model_names) {
    const ModelConfig& mc = cfg.model(name);
    fits.push_back(detail::run_fit(cfg, mc, seed, cfg.run.posterior_samples));
    auto loaded = detail::load_model_data(cfg, mc);
    datasets.push_back(std::move(loaded.patterns));
    atomic_write(out / ("fit_" + name + ".txt"),
                 detail::fit_report_text(mc, fits.back(), seed, opt.no_timestamp));
  }

  BlockPartition blocks = make_blocks(fits.front().engine->data().grid,
                                      cfg.run.block_rows, cfg.run.block_cols);
  std::vector<ModelResidualInput> inputs;
  for (std::size_t i = 0; i < model_names.size(); ++i) {
    ModelResidualInput in;
    in.name = model_names[i];
    in.patterns = &datasets[i];
    const ThinnedLgcpEngine* eng = fits[i].engine.get();
    const std::vector<Eigen::VectorXd>* draws = &fits[i].draws;
    in.lambda_sample = [eng, draws](int t, int m) {
      return eng->lambda_star_field((*draws)[static_cast<std::size_t>(m)], t);
    };
    inputs.push_back(std::move(in));
  }
  CompareResult result;
  result.report =
      residual_crps_table(inputs, blocks, cfg.run.posterior_samples);

  // CSV: per residual type, models sorted by average ascending, then
  // per-campaign rows and the model average.
  std::ostringstream csv;
  csv << "model,campaign,residual_type,mean_crps\n";
  auto emit_rows = [&](const std::string& type,
                       const std::vector<ModelAverage>& order) {
    for (const auto& avg : order) {
      for (const auto& row : result.report.scores) {
        if (row.model != avg.model) continue;
        csv << row.model << ',' << row.campaign << ',' << type << ','
            << detail::fmt(type == "raw" ? row.raw : row.pearson) << "\n";
      }
      csv << avg.model << ",average," << type << ','
          << detail::fmt(type == "raw" ? avg.raw : avg.pearson) << "\n";
    }
  };
  emit_rows("raw", result.report.sorted_by_raw());
  emit_rows("pearson", result.report.sorted_by_pearson());
  result.csv_path = out / "compare.csv";
  atomic_write(result.csv_path, csv.str());

  // Plain-text table: two stacked sub-tables, campaigns across, average last.
  std::ostringstream txt;
  txt << "# coxthin model comparison (mean residual CRPS per block)\n";
  txt << detail::timestamp_line(opt.no_timestamp);
  txt << "# samples per residual distribution: " << result.report.n_samples << "\n";
  txt << "# blocks used: " << result.report.blocks_used << "\n\n";
  int T = 0;
  for (const auto& row : result.report.scores)
    T = std::max(T, row.campaign);
  auto emit_table = [&](const std::string& label,
                        const std::vector<ModelAverage>& order, bool pearson) {
    txt << label << "\n";
    txt << std::left << std::setw(24) << "Method";
    for (int t = 1; t <= T; ++t)
      txt << std::right << std::setw(10) << ("t=" + std::to_string(t));
    txt << std::right << std::setw(10) << "Average" << "\n";
    for (const auto& avg : order) {
      txt << std::left << std::setw(24) << avg.model;
      for (int t = 1; t <= T; ++t) {
        double v = 0.0;
        for (const auto& row : result.report.scores)
          if (row.model == avg.model && row.campaign == t)
            v = pearson ? row.pearson : row.raw;
        txt << std::right << std::setw(10) << detail::fmt(v);
      }
      txt << std::right << std::setw(10)
          << detail::fmt(pearson ? avg.pearson : avg.raw) << "\n";
    }
    txt << "\n";
  };
  emit_table("Raw residuals", result.report.sorted_by_raw(), false);
  emit_table("Pearson residuals", result.report.sorted_by_pearson(), true);
  result.table_path = out / "compare.txt";
  atomic_write(result.table_path, txt.str());
  return result;
}

struct GradcheckResult {
  std::filesystem::path report_path;
  GradCheckReport report;
  bool passed = false;
};

inline GradcheckResult cmd_gradcheck(const RunConfig& cfg, const std::string& model_name,
                                     int n_trials, const CommandOptions& opt = {}) {
  const ModelConfig& mc = cfg.model(model_name);
  std::uint64_t seed = opt.seed ? *opt.seed : cfg.seed;
  std::filesystem::path out = opt.out_dir ? *opt.out_dir : cfg.output_dir;

  auto loaded = detail::load_model_data(cfg, mc);
  AssembledData data = assemble_data(loaded.patterns, loaded.rasters, loaded.grid,
                                     mc.spec, cfg.run.radius_candidates,
                                     cfg.run.coverage_target);
  ThinnedLgcpEngine engine(std::move(data), mc.spec);
  GradcheckResult result;
  result.report = gradcheck(engine, n_trials, seed);
  result.passed = result.report.vacuous || result.report.max_rel_error < 1e-4;

  std::ostringstream os;
  os << "# coxthin gradcheck report\n";
  os << detail::timestamp_line(opt.no_timestamp);
  os << "# model: " << model_name << "\n";
  os << "# seed: " << seed << "\n";
  os << "# trials: " << n_trials << "\n";
  if (result.report.vacuous) {
    os << "# warning: zero trials requested; vacuous pass\n";
    os << "result: PASS (vacuous)\n";
  } else {
    os << "# max_rel_error: " << format_double(result.report.max_rel_error) << "\n";
    os << "# worst_coordinate: " << result.report.worst_coord << " (trial "
       << result.report.worst_trial << ", analytic "
       << format_double(result.report.analytic_at_worst) << ", fd "
       << format_double(result.report.fd_at_worst) << ")\n";
    os << "result: " << (result.passed ? "PASS" : "FAIL") << "\n";
  }
  result.report_path = out / ("gradcheck_" + model_name + ".txt");
  atomic_write(result.report_path, os.str());
  return result;
}

}  // namespace coxthin
