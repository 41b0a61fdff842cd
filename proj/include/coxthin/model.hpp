#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxthin/detection.hpp"
#include "coxthin/errors.hpp"
#include "coxthin/gp.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/point_pattern.hpp"

namespace coxthin {

// Where a detection covariate comes from: a per-point mark (rasterized over
// the domain) or a raster supplied directly (resolved per campaign as
// "<name>_c<t>" when present, else "<name>").
enum class CovariateSource { mark, raster };

struct DetectionComponentSpec {
  CovariateSource source = CovariateSource::mark;
  std::string name;
  TransformKind transform = TransformKind::identity;
};

struct PriorSpec {
  double mu_precision = 1e-3;
  double beta_precision = 1e-3;
  PcPriorSpec pc;  // shared by all GP groups
  double logtau_mean = 0.0;
  double logtau_sd = 2.0;  // spans about three orders of magnitude of tau
};

// 1-D hyperparameter grids; the profile takes their cartesian product over
// groups and detection components. Empty lists fall back to 5 log-spaced
// values around the prior medians.
struct HyperGridSpec {
  std::vector<double> sigma;
  std::vector<double> rho;
  std::vector<double> tau;
};

struct ModelSpec {
  std::string name;
  std::vector<std::string> intensity_covariates;
  std::vector<DetectionComponentSpec> detection;
  std::vector<int> grouping;  // campaign t (0-based) -> group index, 1-based
  PriorSpec priors;
  HyperGridSpec hyper_grid;

  int n_campaigns() const { return static_cast<int>(grouping.size()); }
  int n_covariates() const { return static_cast<int>(intensity_covariates.size()); }
  int n_components() const { return static_cast<int>(detection.size()); }
  int n_groups() const {
    int g = 0;
    for (int l : grouping) g = std::max(g, l);
    return g;
  }

  void validate() const {
    if (grouping.empty()) throw ConfigError("model '" + name + "': empty grouping map");
    int L = n_groups();
    std::vector<bool> seen(static_cast<std::size_t>(L), false);
    for (int l : grouping) {
      if (l < 1) throw ConfigError("model '" + name + "': group indices are 1-based");
      seen[static_cast<std::size_t>(l - 1)] = true;
    }
    for (bool s : seen)
      if (!s) throw ConfigError("model '" + name + "': grouping map skips a group index");
    priors.pc.validate();
    if (!(priors.logtau_sd > 0.0))
      throw ConfigError("model '" + name + "': log tau prior sd must be > 0");
  }
};

// Index map for the unconstrained parameter vector:
//   [ mu (T) | beta (P) | w group 1 (n) | ... | w group L (n) |
//     log sigma (L) | log rho (L) | log tau (K) ]
struct ParamLayout {
  int T = 0, P = 0, L = 0, K = 0, n = 0;

  int mu(int t) const { return t; }
  int beta(int p) const { return T + p; }
  int w(int l, int i) const { return T + P + l * n + i; }
  int w_start(int l) const { return T + P + l * n; }
  int log_sigma(int l) const { return T + P + L * n + l; }
  int log_rho(int l) const { return T + P + L * n + L + l; }
  int log_tau(int k) const { return T + P + L * n + 2 * L + k; }
  int latent_dim() const { return T + P + L * n; }
  int total_dim() const { return T + P + L * n + 2 * L + K; }

  std::string coord_name(int idx) const {
    if (idx < T) return "mu[t=" + std::to_string(idx + 1) + "]";
    if (idx < T + P) return "beta[" + std::to_string(idx - T + 1) + "]";
    if (idx < latent_dim()) {
      int off = idx - T - P;
      return "w[l=" + std::to_string(off / n + 1) + "][i=" + std::to_string(off % n) + "]";
    }
    int off = idx - latent_dim();
    if (off < L) return "log_sigma[l=" + std::to_string(off + 1) + "]";
    if (off < 2 * L) return "log_rho[l=" + std::to_string(off - L + 1) + "]";
    return "log_tau[k=" + std::to_string(off - 2 * L + 1) + "]";
  }
};

// One profiled hyperparameter configuration.
struct HyperPoint {
  std::vector<GpHyper> gp;   // per group
  std::vector<double> tau;   // per detection component
};

// Everything the likelihood needs, on the active cells of the grid.
struct AssembledData {
  RasterGrid grid;
  std::vector<int> active;            // active cell ids, ascending
  std::vector<int> active_index;      // cell id -> active index, -1 if inactive
  double cell_area = 1.0;
  Eigen::MatrixX2d centers;           // active cell centers
  std::vector<Eigen::VectorXd> counts;  // per campaign, n_active
  Eigen::MatrixXd X;                  // n_active x P
  std::vector<std::vector<Eigen::VectorXd>> z;         // [T][K] covariate values
  std::vector<std::vector<Eigen::VectorXd>> zsq_half;  // [T][K] z^2 / 2
  std::vector<int> group_of;          // per campaign, 0-based
  std::vector<double> n_points;       // per campaign
  RadiusSelection radius;             // set when local_frequency was computed
  bool used_local_frequency = false;

  int n_active() const { return static_cast<int>(active.size()); }
  double domain_area() const { return cell_area * n_active(); }
};

namespace detail {

inline const RasterLayer& resolve_raster(
    const std::map<std::string, RasterLayer>& rasters, const std::string& name,
    int campaign_1based) {
  auto it = rasters.find(name + "_c" + std::to_string(campaign_1based));
  if (it != rasters.end()) return it->second;
  it = rasters.find(name);
  if (it == rasters.end())
    throw ConfigError("missing covariate raster '" + name + "'");
  return it->second;
}

}  // namespace detail

// Build the per-cell data the likelihood consumes. Detection covariates with
// mark sources are transformed per point and then rasterized (mean per cell,
// nearest-neighbour fill); raster sources are transformed cell-wise.
inline AssembledData assemble_data(
    const std::vector<MarkedPointPattern>& patterns,
    const std::map<std::string, RasterLayer>& rasters, const RasterGrid& grid,
    const ModelSpec& spec,
    const std::vector<double>& radius_candidates = default_radius_candidates(),
    double coverage_target = 0.85) {
  spec.validate();
  const int T = spec.n_campaigns();
  const int P = spec.n_covariates();
  const int K = spec.n_components();

  if (static_cast<int>(patterns.size()) != T)
    throw DataError("model '" + spec.name + "' declares " + std::to_string(T) +
                    " campaigns but data has " + std::to_string(patterns.size()));
  for (int t = 0; t < T; ++t)
    if (patterns[static_cast<std::size_t>(t)].campaign_id != t + 1)
      throw DataError("campaign ids must be consecutive 1..T");

  for (const auto& [name, layer] : rasters)
    require_same_grid(grid, layer.grid, "raster '" + name + "'");

  AssembledData d;
  d.grid = grid;
  d.cell_area = grid.cell_area();

  // Active domain: cells where every referenced raster has data.
  std::vector<std::uint8_t> inactive(static_cast<std::size_t>(grid.n_cells()), 0);
  auto mask_from = [&](const RasterLayer& layer) {
    for (int c = 0; c < grid.n_cells(); ++c)
      if (layer.is_nodata(c)) inactive[static_cast<std::size_t>(c)] = 1;
  };
  for (const auto& name : spec.intensity_covariates) {
    if (!rasters.count(name)) throw ConfigError("missing covariate raster '" + name + "'");
    mask_from(rasters.at(name));
  }
  for (const auto& comp : spec.detection)
    if (comp.source == CovariateSource::raster)
      for (int t = 1; t <= T; ++t) mask_from(detail::resolve_raster(rasters, comp.name, t));

  d.active_index.assign(static_cast<std::size_t>(grid.n_cells()), -1);
  for (int c = 0; c < grid.n_cells(); ++c)
    if (!inactive[static_cast<std::size_t>(c)]) {
      d.active_index[static_cast<std::size_t>(c)] = static_cast<int>(d.active.size());
      d.active.push_back(c);
    }
  if (d.active.empty()) throw DataError("no active cells: domain is all nodata");
  const int n = d.n_active();
  d.centers = grid_centers(grid, d.active);

  for (int t = 0; t < T; ++t) {
    const auto& pat = patterns[static_cast<std::size_t>(t)];
    auto counts_full = cell_counts(pat, grid);
    Eigen::VectorXd cnt(n);
    for (int i = 0; i < n; ++i) cnt(i) = counts_full[static_cast<std::size_t>(d.active[i])];
    for (int c = 0; c < grid.n_cells(); ++c)
      if (inactive[static_cast<std::size_t>(c)] && counts_full[static_cast<std::size_t>(c)] > 0)
        throw DataError("campaign " + std::to_string(t + 1) + " has a point in nodata cell " +
                        std::to_string(c));
    d.counts.push_back(std::move(cnt));
    d.n_points.push_back(static_cast<double>(pat.size()));
  }

  d.X.resize(n, P);
  for (int p = 0; p < P; ++p) {
    const auto& layer = rasters.at(spec.intensity_covariates[static_cast<std::size_t>(p)]);
    for (int i = 0; i < n; ++i) {
      double v = layer[d.active[i]];
      if (!std::isfinite(v))
        throw DataError("non-finite covariate '" + spec.intensity_covariates[p] + "'");
      d.X(i, p) = v;
    }
  }

  // Local frequency, when any component needs it: one radius pooled over all
  // campaigns, then per-point counts attached as a derived mark.
  std::vector<MarkedPointPattern> working = patterns;
  bool needs_freq = false;
  for (const auto& comp : spec.detection)
    if (comp.source == CovariateSource::mark && comp.name == "local_frequency")
      needs_freq = true;
  if (needs_freq) {
    d.radius = select_radius(working, radius_candidates, coverage_target);
    d.used_local_frequency = true;
    for (auto& pat : working)
      pat.set_mark("local_frequency", local_frequency(pat, d.radius.radius));
  }

  d.z.resize(static_cast<std::size_t>(T));
  d.zsq_half.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      const auto& comp = spec.detection[static_cast<std::size_t>(k)];
      Eigen::VectorXd z(n);
      if (comp.source == CovariateSource::raster) {
        const RasterLayer& layer = detail::resolve_raster(rasters, comp.name, t + 1);
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = layer[d.active[i]];
        auto zt = transform_covariate(vals, comp.transform);
        for (int i = 0; i < n; ++i) z(i) = zt[static_cast<std::size_t>(i)];
      } else {
        auto& pat = working[static_cast<std::size_t>(t)];
        auto zvals = transform_covariate(pat.mark(comp.name), comp.transform);
        MarkedPointPattern tmp = pat;
        tmp.set_mark("__z", std::move(zvals));
        RasterLayer layer = rasterize_marks(tmp, "__z", grid);
        for (int i = 0; i < n; ++i) z(i) = layer[d.active[i]];
      }
      d.zsq_half[static_cast<std::size_t>(t)].push_back(0.5 * z.array().square().matrix());
      d.z[static_cast<std::size_t>(t)].push_back(std::move(z));
    }
    d.group_of.push_back(spec.grouping[static_cast<std::size_t>(t)] - 1);
  }
  return d;
}

// Default 1-D hyper grid: 5 log-spaced values spanning [m/4, 4m] around the
// prior median m.
inline std::vector<double> default_hyper_ladder(double median) {
  return {median / 4.0, median / 2.0, median, median * 2.0, median * 4.0};
}

inline std::vector<HyperPoint> build_hyper_grid(const ModelSpec& spec) {
  const int L = spec.n_groups();
  const int K = spec.n_components();
  const auto& pr = spec.priors;

  std::vector<double> sig = spec.hyper_grid.sigma;
  std::vector<double> rho = spec.hyper_grid.rho;
  std::vector<double> tau = spec.hyper_grid.tau;
  if (sig.empty()) sig = default_hyper_ladder(std::log(2.0) / pr.pc.lambda2());
  if (rho.empty()) rho = default_hyper_ladder(pr.pc.lambda1() / std::log(2.0));
  if (tau.empty()) tau = default_hyper_ladder(std::exp(pr.logtau_mean));
  for (double v : sig)
    if (!(v > 0.0)) throw ConfigError("hyper grid sigma values must be positive");
  for (double v : rho)
    if (!(v > 0.0)) throw ConfigError("hyper grid rho values must be positive");
  for (double v : tau)
    if (!(v > 0.0)) throw ConfigError("hyper grid tau values must be positive");

  double total = 1.0;
  for (int l = 0; l < L; ++l) total *= static_cast<double>(sig.size()) * rho.size();
  for (int k = 0; k < K; ++k) total *= static_cast<double>(tau.size());
  if (total > 1000.0)
    throw ConfigError("hyperparameter grid has " + std::to_string(static_cast<long>(total)) +
                      " points; give smaller explicit grids for model '" + spec.name + "'");

  std::vector<HyperPoint> grid;
  HyperPoint cur;
  cur.gp.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) cur.gp[static_cast<std::size_t>(l)].group_index = l + 1;
  cur.tau.resize(static_cast<std::size_t>(K), 1.0);

  // odometer over 2L + K dimensions
  std::vector<std::size_t> idx(static_cast<std::size_t>(2 * L + K), 0);
  auto dim_size = [&](int dcoord) -> std::size_t {
    if (dcoord < L) return sig.size();
    if (dcoord < 2 * L) return rho.size();
    return tau.size();
  };
  for (;;) {
    for (int l = 0; l < L; ++l) {
      cur.gp[static_cast<std::size_t>(l)].sigma = sig[idx[static_cast<std::size_t>(l)]];
      cur.gp[static_cast<std::size_t>(l)].rho = rho[idx[static_cast<std::size_t>(L + l)]];
    }
    for (int k = 0; k < K; ++k)
      cur.tau[static_cast<std::size_t>(k)] = tau[idx[static_cast<std::size_t>(2 * L + k)]];
    grid.push_back(cur);
    int d = 0;
    for (; d < 2 * L + K; ++d) {
      if (++idx[static_cast<std::size_t>(d)] < dim_size(d)) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
    if (d == 2 * L + K) break;
  }
  return grid;
}

}  // namespace coxthin
