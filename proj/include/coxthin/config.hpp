#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coxthin/errors.hpp"
#include "coxthin/inference.hpp"
#include "coxthin/model.hpp"
#include "coxthin/simulate.hpp"

namespace coxthin {

// Declarative run configuration (JSON). Model blocks make the paper-style
// comparison a sweep over config entries rather than code paths; see README
// for the schema.
struct RunParams {
  int posterior_samples = 1000;
  int block_rows = 18;
  int block_cols = 18;
  Tolerances tolerances;
  std::vector<double> radius_candidates = default_radius_candidates();
  double coverage_target = 0.85;
};

struct ModelConfig {
  ModelSpec spec;
  std::optional<std::string> patterns_path;  // overrides data.patterns
};

struct RunConfig {
  std::filesystem::path base_dir;  // directory of the config file
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::optional<std::string> patterns_path;
  std::map<std::string, std::string> raster_paths;  // name -> path
  std::optional<RasterGrid> grid;                   // explicit grid, optional
  RunParams run;
  std::optional<SimScenario> scenario;
  std::vector<ModelConfig> models;

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  const ModelConfig& model(const std::string& name) const {
    for (const auto& m : models)
      if (m.spec.name == name) return m;
    throw ConfigError("no model named '" + name + "' in config");
  }
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("config: missing '" + key + "' in " + ctx);
  return *it;
}

inline RasterGrid parse_grid(const json& j) {
  return RasterGrid(require(j, "origin_x", "grid").get<double>(),
                    require(j, "origin_y", "grid").get<double>(),
                    require(j, "n_cols", "grid").get<int>(),
                    require(j, "n_rows", "grid").get<int>(),
                    require(j, "cell_size", "grid").get<double>());
}

inline LayerGenerator parse_generator(const json& j) {
  LayerGenerator g;
  std::string kind = require(j, "kind", "generator").get<std::string>();
  if (kind == "constant") {
    g.kind = LayerGenerator::Kind::constant;
    g.value = require(j, "value", "constant generator").get<double>();
  } else if (kind == "linear") {
    g.kind = LayerGenerator::Kind::linear;
    g.c0 = j.value("c0", 0.0);
    g.cx = j.value("cx", 0.0);
    g.cy = j.value("cy", 0.0);
  } else if (kind == "gp") {
    g.kind = LayerGenerator::Kind::gp;
    g.gp.sigma = require(j, "sigma", "gp generator").get<double>();
    g.gp.rho = require(j, "rho", "gp generator").get<double>();
  } else if (kind == "gp_logistic") {
    g.kind = LayerGenerator::Kind::gp_logistic;
    g.c0 = j.value("c0", 0.0);
    g.gp.sigma = require(j, "sigma", "gp_logistic generator").get<double>();
    g.gp.rho = require(j, "rho", "gp_logistic generator").get<double>();
  } else {
    throw ConfigError("config: unknown generator kind '" + kind + "'");
  }
  return g;
}

inline SimScenario parse_scenario(const json& j) {
  SimScenario sc;
  sc.grid = parse_grid(require(j, "grid", "scenario"));
  sc.mu = require(j, "mu", "scenario").get<std::vector<double>>();
  sc.n_campaigns = static_cast<int>(sc.mu.size());
  if (j.contains("covariates")) {
    for (const auto& c : j.at("covariates")) {
      sc.covariate_names.push_back(require(c, "name", "scenario covariate").get<std::string>());
      sc.beta.push_back(require(c, "beta", "scenario covariate").get<double>());
      sc.covariate_generators.push_back(
          parse_generator(require(c, "generator", "scenario covariate")));
    }
  }
  sc.grouping = require(j, "grouping", "scenario").get<std::vector<int>>();
  for (const auto& g : require(j, "gp", "scenario")) {
    GpHyper h;
    h.sigma = require(g, "sigma", "scenario gp").get<double>();
    h.rho = require(g, "rho", "scenario gp").get<double>();
    h.group_index = static_cast<int>(sc.gp_hypers.size()) + 1;
    sc.gp_hypers.push_back(h);
  }
  if (j.contains("detection")) {
    for (const auto& d : j.at("detection")) {
      ScenarioDetectionComponent comp;
      comp.name = require(d, "name", "scenario detection").get<std::string>();
      comp.from_mark = d.value("source", std::string("mark")) == "mark";
      comp.transform = transform_from_string(
          d.value("transform", std::string("identity")));
      comp.tau = require(d, "tau", "scenario detection").get<double>();
      comp.generator = parse_generator(require(d, "generator", "scenario detection"));
      sc.detection.push_back(comp);
    }
  }
  sc.validate();
  return sc;
}

inline ModelConfig parse_model(const json& j) {
  ModelConfig mc;
  mc.spec.name = require(j, "name", "model").get<std::string>();
  if (j.contains("patterns")) mc.patterns_path = j.at("patterns").get<std::string>();
  if (j.contains("intensity_covariates"))
    mc.spec.intensity_covariates =
        j.at("intensity_covariates").get<std::vector<std::string>>();
  if (j.contains("detection")) {
    for (const auto& d : j.at("detection")) {
      DetectionComponentSpec comp;
      std::string src = d.value("source", std::string("mark"));
      if (src == "mark")
        comp.source = CovariateSource::mark;
      else if (src == "raster")
        comp.source = CovariateSource::raster;
      else
        throw ConfigError("config: detection source must be 'mark' or 'raster'");
      comp.name = require(d, "name", "model detection").get<std::string>();
      comp.transform =
          transform_from_string(require(d, "transform", "model detection").get<std::string>());
      mc.spec.detection.push_back(comp);
    }
  }
  mc.spec.grouping = require(j, "grouping", "model '" + mc.spec.name + "'")
                         .get<std::vector<int>>();
  if (j.contains("priors")) {
    const auto& p = j.at("priors");
    mc.spec.priors.mu_precision = p.value("mu_precision", 1e-3);
    mc.spec.priors.beta_precision = p.value("beta_precision", 1e-3);
    mc.spec.priors.logtau_mean = p.value("logtau_mean", 0.0);
    mc.spec.priors.logtau_sd = p.value("logtau_sd", 2.0);
    if (p.contains("pc")) {
      const auto& pc = p.at("pc");
      mc.spec.priors.pc.rho0 = pc.value("rho0", 50.0);
      mc.spec.priors.pc.alpha_rho = pc.value("alpha_rho", 0.5);
      mc.spec.priors.pc.sigma0 = pc.value("sigma0", 0.5);
      mc.spec.priors.pc.alpha_sigma = pc.value("alpha_sigma", 0.01);
    }
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    if (h.contains("sigma")) mc.spec.hyper_grid.sigma = h.at("sigma").get<std::vector<double>>();
    if (h.contains("rho")) mc.spec.hyper_grid.rho = h.at("rho").get<std::vector<double>>();
    if (h.contains("tau")) mc.spec.hyper_grid.tau = h.at("tau").get<std::vector<double>>();
  }
  mc.spec.validate();
  return mc;
}

}  // namespace detail

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  try {
    RunConfig cfg;
    cfg.base_dir = path.has_parent_path() ? path.parent_path() : ".";
    if (!j.contains("seed"))
      throw ConfigError("config: 'seed' is mandatory (no wall-clock default)");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.output_dir = cfg.resolve(j.value("output_dir", std::string("out")));

    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("patterns")) cfg.patterns_path = d.at("patterns").get<std::string>();
      if (d.contains("grid")) cfg.grid = detail::parse_grid(d.at("grid"));
      if (d.contains("rasters"))
        for (const auto& [name, p] : d.at("rasters").items())
          cfg.raster_paths[name] = p.get<std::string>();
    }
    if (j.contains("run")) {
      const auto& r = j.at("run");
      cfg.run.posterior_samples = r.value("posterior_samples", 1000);
      if (r.contains("blocks")) {
        auto b = r.at("blocks").get<std::vector<int>>();
        if (b.size() != 2) throw ConfigError("config: run.blocks must be [rows, cols]");
        cfg.run.block_rows = b[0];
        cfg.run.block_cols = b[1];
      }
      cfg.run.tolerances.max_iter = r.value("max_iter", 2000);
      cfg.run.tolerances.grad_tol = r.value("grad_tol", 1e-5);
      cfg.run.tolerances.obj_tol = r.value("obj_tol", 1e-9);
      if (r.contains("radius_candidates"))
        cfg.run.radius_candidates = r.at("radius_candidates").get<std::vector<double>>();
      cfg.run.coverage_target = r.value("coverage_target", 0.85);
    }
    if (j.contains("scenario")) {
      auto sc = detail::parse_scenario(j.at("scenario"));
      sc.seed = cfg.seed;
      cfg.scenario = sc;
    }
    if (j.contains("models"))
      for (const auto& m : j.at("models")) cfg.models.push_back(detail::parse_model(m));

    for (std::size_t i = 0; i < cfg.models.size(); ++i)
      for (std::size_t k = i + 1; k < cfg.models.size(); ++k)
        if (cfg.models[i].spec.name == cfg.models[k].spec.name)
          throw ConfigError("config: duplicate model name '" + cfg.models[i].spec.name + "'");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config error in " + path.string() + ": " + e.what());
  }
}

}  // namespace coxthin
