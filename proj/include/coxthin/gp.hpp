#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "coxthin/errors.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/rng.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

struct GpHyper {
  double sigma = 1.0;  // marginal standard deviation, > 0
  double rho = 1.0;    // range in meters, > 0
  int group_index = 1;

  void validate() const {
    if (!(sigma > 0.0) || !(rho > 0.0))
      throw DataError("GP hyperparameters must be positive (sigma=" +
                      format_double(sigma) + ", rho=" + format_double(rho) + ")");
  }
};

// Penalised-complexity prior on (rho, sigma), pinned by the two tail
// statements P(rho < rho0) = alpha_rho and P(sigma > sigma0) = alpha_sigma.
struct PcPriorSpec {
  double rho0 = 50.0;
  double alpha_rho = 0.5;
  double sigma0 = 0.5;
  double alpha_sigma = 0.01;

  void validate() const {
    if (!(rho0 > 0.0) || !(sigma0 > 0.0))
      throw DataError("PC prior thresholds must be positive");
    if (!(alpha_rho > 0.0 && alpha_rho < 1.0) ||
        !(alpha_sigma > 0.0 && alpha_sigma < 1.0))
      throw DataError("PC prior tail probabilities must lie in (0,1)");
  }

  // rho marginal: lambda1 * rho^-2 * exp(-lambda1/rho), spatial dimension 2.
  double lambda1() const { return -std::log(alpha_rho) * rho0; }
  // sigma marginal: lambda2 * exp(-lambda2 * sigma).
  double lambda2() const { return -std::log(alpha_sigma) / sigma0; }
};

// Matern covariance with smoothness 1 and the range convention rho = sqrt(8)/kappa,
// i.e. correlation ~= 0.14 at distance rho:  C(d) = sigma^2 * (kappa d) K1(kappa d).
inline double matern_cov(double d, const GpHyper& hyper) {
  hyper.validate();
  if (d < 0.0) throw DataError("matern_cov requires d >= 0");
  double s2 = hyper.sigma * hyper.sigma;
  if (d == 0.0) return s2;
  double u = std::sqrt(8.0) * d / hyper.rho;
  if (u > 700.0) return 0.0;  // u*K1(u) underflows well before this
  return s2 * u * std::cyl_bessel_k(1.0, u);
}

// d C(d) / d log(rho) = sigma^2 * u^2 * K0(u); needed by the range gradient.
inline double matern_cov_dlogrho(double d, const GpHyper& hyper) {
  if (d <= 0.0) return 0.0;
  double u = std::sqrt(8.0) * d / hyper.rho;
  if (u > 700.0) return 0.0;
  return hyper.sigma * hyper.sigma * u * u * std::cyl_bessel_k(0.0, u);
}

// Dense covariance over a list of cell centers: entry (i,j) = matern_cov(d_ij)
// plus jitter on the diagonal.
inline Eigen::MatrixXd build_cov_matrix(const Eigen::MatrixX2d& centers,
                                        const GpHyper& hyper, double jitter) {
  hyper.validate();
  const Eigen::Index n = centers.rows();
  if (n < 1) throw DataError("covariance matrix needs at least one active cell");
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = hyper.sigma * hyper.sigma + jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      double dx = centers(i, 0) - centers(j, 0);
      double dy = centers(i, 1) - centers(j, 1);
      double c = matern_cov(std::sqrt(dx * dx + dy * dy), hyper);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

inline Eigen::MatrixX2d grid_centers(const RasterGrid& grid,
                                     const std::vector<int>& cells) {
  Eigen::MatrixX2d centers(static_cast<Eigen::Index>(cells.size()), 2);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    centers(static_cast<Eigen::Index>(i), 0) = grid.center_x(cells[i]);
    centers(static_cast<Eigen::Index>(i), 1) = grid.center_y(cells[i]);
  }
  return centers;
}

inline std::vector<int> all_cells(const RasterGrid& grid) {
  std::vector<int> cells(static_cast<std::size_t>(grid.n_cells()));
  for (int c = 0; c < grid.n_cells(); ++c) cells[static_cast<std::size_t>(c)] = c;
  return cells;
}

// Cholesky factorization of the Matern covariance with jitter escalation:
// starting from jitter0 (default 1e-8 * sigma^2), multiply by 10 on failure,
// at most 3 escalations.
struct CovFactor {
  Eigen::MatrixXd cov;           // jittered covariance actually factorized
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  int escalations = 0;

  double log_det() const {
    const auto& L = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
    return 2.0 * s;
  }
};

inline CovFactor factor_cov_matrix(const Eigen::MatrixX2d& centers,
                                   const GpHyper& hyper, double jitter0 = -1.0) {
  double s2 = hyper.sigma * hyper.sigma;
  double jitter = jitter0 > 0.0 ? jitter0 : 1e-8 * s2;
  Eigen::MatrixXd base = build_cov_matrix(centers, hyper, 0.0);
  CovFactor f;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    f.cov = base;
    f.cov.diagonal().array() += jitter;
    f.llt.compute(f.cov);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      f.escalations = attempt;
      return f;
    }
    jitter *= 10.0;
  }
  throw NumericError("covariance factorization failed after jitter escalation to " +
                     format_double(jitter / 10.0));
}

// Zero-mean GP sample on the given cells: field = L * eps with eps standard
// normal driven by `seed`. Cells not listed stay at zero.
inline RasterLayer sample_gp(const RasterGrid& grid, const std::vector<int>& cells,
                             const GpHyper& hyper, std::uint64_t seed,
                             double jitter0 = -1.0) {
  CovFactor f = factor_cov_matrix(grid_centers(grid, cells), hyper, jitter0);
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd eps(static_cast<Eigen::Index>(cells.size()));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = gauss(rng);
  Eigen::VectorXd field = f.llt.matrixL() * eps;
  RasterLayer layer(grid, 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i)
    layer[cells[i]] = field(static_cast<Eigen::Index>(i));
  return layer;
}

inline RasterLayer sample_gp(const RasterGrid& grid, const GpHyper& hyper,
                             std::uint64_t seed, double jitter0 = -1.0) {
  return sample_gp(grid, all_cells(grid), hyper, seed, jitter0);
}

// log pi(rho, sigma) of the PC prior (density in the (rho, sigma) plane).
inline double pc_prior_logdensity(const GpHyper& hyper, const PcPriorSpec& spec) {
  spec.validate();
  if (!(hyper.sigma > 0.0) || !(hyper.rho > 0.0))
    throw DataError("PC prior density requires positive sigma and rho");
  double l1 = spec.lambda1(), l2 = spec.lambda2();
  return std::log(l1) - 2.0 * std::log(hyper.rho) - l1 / hyper.rho +
         std::log(l2) - l2 * hyper.sigma;
}

}  // namespace coxthin
