#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "coxthin/detection.hpp"
#include "coxthin/errors.hpp"
#include "coxthin/gp.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/point_pattern.hpp"
#include "coxthin/rng.hpp"

namespace coxthin {

// Deterministic covariate/mark field generators for synthetic scenarios.
// gp_logistic squashes c0 + w(s) through the logistic so marks like the
// detector confidence stay inside (0,1).
struct LayerGenerator {
  enum class Kind { constant, linear, gp, gp_logistic } kind = Kind::constant;
  double value = 0.0;                 // constant
  double c0 = 0.0, cx = 0.0, cy = 0.0;  // linear: c0 + cx*x + cy*y (cell centers)
  GpHyper gp;                         // gp, gp_logistic

  RasterLayer generate(const RasterGrid& grid, std::uint64_t seed) const {
    switch (kind) {
      case Kind::constant: {
        return RasterLayer(grid, value);
      }
      case Kind::linear: {
        RasterLayer layer(grid, 0.0);
        for (int c = 0; c < grid.n_cells(); ++c)
          layer[c] = c0 + cx * grid.center_x(c) + cy * grid.center_y(c);
        return layer;
      }
      case Kind::gp:
        return sample_gp(grid, gp, seed);
      case Kind::gp_logistic: {
        RasterLayer layer = sample_gp(grid, gp, seed);
        for (auto& v : layer.values) v = 1.0 / (1.0 + std::exp(-(c0 + v)));
        return layer;
      }
    }
    throw ConfigError("unknown layer generator kind");
  }
};

struct ScenarioDetectionComponent {
  std::string name;              // mark name ("confidence"/"diag") or z-raster name
  bool from_mark = true;         // true: generator yields the raw mark layer
  TransformKind transform = TransformKind::identity;
  double tau = 1.0;
  LayerGenerator generator;
};

struct SimScenario {
  RasterGrid grid;
  int n_campaigns = 1;
  std::vector<double> mu;                  // per campaign
  std::vector<double> beta;                // per intensity covariate
  std::vector<std::string> covariate_names;
  std::vector<LayerGenerator> covariate_generators;
  std::vector<int> grouping;               // campaign -> group, 1-based
  std::vector<GpHyper> gp_hypers;          // per group; sigma == 0 disables the field
  std::vector<ScenarioDetectionComponent> detection;
  std::uint64_t seed = 0;

  int n_groups() const {
    int g = 0;
    for (int l : grouping) g = std::max(g, l);
    return g;
  }

  void validate() const {
    if (n_campaigns < 1) throw ConfigError("scenario needs at least one campaign");
    if (static_cast<int>(mu.size()) != n_campaigns)
      throw ConfigError("scenario: mu must have one entry per campaign");
    if (beta.size() != covariate_generators.size() ||
        beta.size() != covariate_names.size())
      throw ConfigError("scenario: beta length must match covariate count");
    if (static_cast<int>(grouping.size()) != n_campaigns)
      throw ConfigError("scenario: grouping map must cover every campaign");
    for (int l : grouping)
      if (l < 1 || l > static_cast<int>(gp_hypers.size()))
        throw ConfigError("scenario: grouping index outside declared GP groups");
    for (const auto& d : detection)
      if (d.from_mark && d.name != "confidence" && d.name != "diag")
        throw ConfigError("scenario: simulated mark components must be named "
                          "'confidence' or 'diag', got '" + d.name + "'");
  }
};

// lambda_t^pot(c) = exp(mu_t + x(c)'beta + w_l(t)(c)) on cell centers.
inline RasterLayer potential_intensity(const SimScenario& scenario, int t,
                                       const std::vector<RasterLayer>& covariates,
                                       const std::vector<RasterLayer>& w_fields) {
  const RasterGrid& grid = scenario.grid;
  RasterLayer lambda(grid, 0.0);
  const RasterLayer& w = w_fields[static_cast<std::size_t>(scenario.grouping[t] - 1)];
  for (int c = 0; c < grid.n_cells(); ++c) {
    double eta = scenario.mu[static_cast<std::size_t>(t)];
    for (std::size_t j = 0; j < scenario.beta.size(); ++j)
      eta += scenario.beta[j] * covariates[j][c];
    eta += w[c];
    double v = std::exp(eta);
    if (!std::isfinite(v))
      throw NumericError("potential intensity overflowed at cell " + std::to_string(c));
    lambda[c] = v;
  }
  return lambda;
}

// Poisson count per cell with mean lambda(c) * cell_area, locations uniform
// within the cell. Nodata cells produce no points.
inline MarkedPointPattern simulate_pattern(const RasterLayer& lambda,
                                           std::uint64_t seed, int campaign_id = 1) {
  const RasterGrid& grid = lambda.grid;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MarkedPointPattern pattern;
  pattern.campaign_id = campaign_id;
  double area = grid.cell_area();
  for (int c = 0; c < grid.n_cells(); ++c) {
    if (lambda.is_nodata(c)) continue;
    double rate = lambda[c] * area;
    if (rate < 0.0) throw DataError("negative intensity at cell " + std::to_string(c));
    if (!std::isfinite(rate))
      throw NumericError("non-finite Poisson mean at cell " + std::to_string(c));
    int count = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng) : 0;
    double x0 = grid.origin_x + (c % grid.n_cols) * grid.cell_size;
    double y0 = grid.origin_y + (c / grid.n_cols) * grid.cell_size;
    for (int k = 0; k < count; ++k) {
      double x = x0 + grid.cell_size * unit(rng);
      double y = y0 + grid.cell_size * unit(rng);
      // guard against the sum rounding up onto the next cell's edge
      if (x >= x0 + grid.cell_size) x = std::nextafter(x0 + grid.cell_size, x0);
      if (y >= y0 + grid.cell_size) y = std::nextafter(y0 + grid.cell_size, y0);
      pattern.points.push_back({x, y});
    }
  }
  return pattern;
}

// Independent thinning: each point kept with probability p(cell of point).
// Retained points keep their marks.
inline MarkedPointPattern thin_pattern(const MarkedPointPattern& pattern,
                                       const RasterLayer& p_field, std::uint64_t seed) {
  for (int c = 0; c < p_field.grid.n_cells(); ++c)
    if (!p_field.is_nodata(c) && !(p_field[c] >= 0.0 && p_field[c] <= 1.0))
      throw DataError("thinning field outside [0,1] at cell " + std::to_string(c));
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MarkedPointPattern kept;
  kept.campaign_id = pattern.campaign_id;
  std::vector<std::size_t> kept_idx;
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    const auto& p = pattern.points[i];
    double prob = p_field[p_field.grid.cell_of(p.x, p.y)];
    if (unit(rng) < prob) {
      kept.points.push_back(p);
      kept_idx.push_back(i);
    }
  }
  for (const auto& [name, vals] : pattern.marks) {
    std::vector<double> sub;
    sub.reserve(kept_idx.size());
    for (std::size_t i : kept_idx) sub.push_back(vals[i]);
    kept.marks[name] = std::move(sub);
  }
  return kept;
}

// Everything one simulated survey produces.
struct SimResult {
  std::vector<RasterLayer> covariates;              // per intensity covariate
  std::vector<RasterLayer> w_fields;                // per group
  std::vector<RasterLayer> lambda_pot;              // per campaign
  std::vector<std::vector<RasterLayer>> mark_layers;  // [campaign][component], raw
  std::vector<std::vector<RasterLayer>> z_layers;     // [campaign][component]
  std::vector<RasterLayer> p_fields;                // per campaign
  std::vector<MarkedPointPattern> true_patterns;    // per campaign
  std::vector<MarkedPointPattern> observed_patterns;
};

inline SimResult simulate_campaigns(const SimScenario& scenario) {
  scenario.validate();
  const RasterGrid& grid = scenario.grid;
  const int T = scenario.n_campaigns;
  SimResult out;

  for (std::size_t j = 0; j < scenario.covariate_generators.size(); ++j)
    out.covariates.push_back(scenario.covariate_generators[j].generate(
        grid, derive_seed(scenario.seed, kSeedCovariate, j)));

  for (std::size_t l = 0; l < scenario.gp_hypers.size(); ++l) {
    const GpHyper& h = scenario.gp_hypers[l];
    if (h.sigma == 0.0)
      out.w_fields.emplace_back(grid, 0.0);
    else
      out.w_fields.push_back(sample_gp(grid, h, derive_seed(scenario.seed, kSeedGpField, l)));
  }

  const std::size_t K = scenario.detection.size();
  out.mark_layers.resize(static_cast<std::size_t>(T));
  out.z_layers.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto& comp = scenario.detection[k];
      RasterLayer raw = comp.generator.generate(
          grid, derive_seed(scenario.seed, kSeedMarkLayer, k * static_cast<std::size_t>(T) + t));
      RasterLayer z = raw;
      z.values = transform_covariate(raw.values, comp.transform);
      out.mark_layers[static_cast<std::size_t>(t)].push_back(std::move(raw));
      out.z_layers[static_cast<std::size_t>(t)].push_back(std::move(z));
    }

    out.lambda_pot.push_back(potential_intensity(scenario, t, out.covariates, out.w_fields));

    std::vector<double> taus;
    for (const auto& comp : scenario.detection) taus.push_back(comp.tau);
    RasterLayer p = K == 0 ? RasterLayer(grid, 1.0)
                           : detection_field(out.z_layers[static_cast<std::size_t>(t)], taus);
    out.p_fields.push_back(std::move(p));

    MarkedPointPattern truth = simulate_pattern(
        out.lambda_pot.back(), derive_seed(scenario.seed, kSeedPoisson, t), t + 1);
    // Marks come from the raw layers by cell lookup, so a fitted model sees
    // the same covariate structure the simulator used.
    for (std::size_t k = 0; k < K; ++k) {
      const auto& comp = scenario.detection[k];
      if (!comp.from_mark) continue;
      const RasterLayer& raw = out.mark_layers[static_cast<std::size_t>(t)][k];
      std::vector<double> vals;
      vals.reserve(truth.points.size());
      for (const auto& p : truth.points) vals.push_back(raw[grid.cell_of(p.x, p.y)]);
      truth.set_mark(comp.name, std::move(vals));
    }
    out.observed_patterns.push_back(
        thin_pattern(truth, out.p_fields.back(), derive_seed(scenario.seed, kSeedThin, t)));
    out.true_patterns.push_back(std::move(truth));
  }
  return out;
}

}  // namespace coxthin
