#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "coxthin/errors.hpp"
#include "coxthin/model.hpp"
#include "coxthin/rng.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

struct Tolerances {
  double grad_tol = 1e-5;  // scaled gradient infinity norm
  double obj_tol = 1e-9;   // relative objective change
  int max_iter = 2000;
};

struct MapFit {
  Eigen::VectorXd params;  // full vector, hyper coordinates included
  double objective = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;  // scaled, at the returned point
  bool converged = false;
};

struct ProfilePoint {
  HyperPoint theta;
  Eigen::VectorXd mode;       // full parameter vector at the conditional MAP
  double objective = 0.0;     // log joint at the mode
  double logdet_neg_hess = 0.0;
  double log_marginal = 0.0;  // Laplace-approximate evidence contribution
  double weight = 0.0;
  int iterations = 0;
  bool ok = false;
  std::string error;
};

struct HyperProfile {
  std::vector<ProfilePoint> points;
  int latent_dim = 0;
};

struct GradCheckReport {
  int n_trials = 0;
  double max_rel_error = 0.0;
  std::string worst_coord;
  int worst_trial = -1;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;
  bool vacuous = false;  // n_trials == 0
};

// Joint log-posterior of the thinned LGCP on the grid, its analytic gradient,
// Newton MAP over the latent block, Laplace covariance, discrete
// hyperparameter profiling and posterior sampling. The cell-count Poisson
// likelihood makes quadrature exact on the model's own discretization:
//   sum_t sum_i [ n_ti (eta_ti + log a) - a exp(eta_ti) ],
//   eta_ti = mu_t + x_i' beta + w_{l(t),i} - sum_k z_tki^2 / (2 tau_k^2).
class ThinnedLgcpEngine {
 public:
  ThinnedLgcpEngine(AssembledData data, ModelSpec spec)
      : data_(std::move(data)), spec_(std::move(spec)) {
    layout_.T = static_cast<int>(data_.counts.size());
    layout_.P = static_cast<int>(data_.X.cols());
    layout_.L = spec_.n_groups();
    layout_.K = spec_.n_components();
    layout_.n = data_.n_active();
    log_area_ = std::log(data_.cell_area);
  }

  const ParamLayout& layout() const { return layout_; }
  const AssembledData& data() const { return data_; }
  const ModelSpec& spec() const { return spec_; }

  // ---- parameter vector helpers -------------------------------------------

  Eigen::VectorXd init_params(const HyperPoint& theta) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(layout_.total_dim());
    for (int t = 0; t < layout_.T; ++t) {
      double rate = std::max(data_.n_points[static_cast<std::size_t>(t)], 0.5) /
                    data_.domain_area();
      v(layout_.mu(t)) = std::log(rate);
    }
    set_hyper(v, theta);
    return v;
  }

  void set_hyper(Eigen::VectorXd& v, const HyperPoint& theta) const {
    if (static_cast<int>(theta.gp.size()) != layout_.L ||
        static_cast<int>(theta.tau.size()) != layout_.K)
      throw ConfigError("hyperparameter point does not match model dimensions");
    for (int l = 0; l < layout_.L; ++l) {
      theta.gp[static_cast<std::size_t>(l)].validate();
      v(layout_.log_sigma(l)) = std::log(theta.gp[static_cast<std::size_t>(l)].sigma);
      v(layout_.log_rho(l)) = std::log(theta.gp[static_cast<std::size_t>(l)].rho);
    }
    for (int k = 0; k < layout_.K; ++k) {
      if (!(theta.tau[static_cast<std::size_t>(k)] > 0.0))
        throw ConfigError("tau must be positive");
      v(layout_.log_tau(k)) = std::log(theta.tau[static_cast<std::size_t>(k)]);
    }
  }

  HyperPoint hyper_of(const Eigen::VectorXd& v) const {
    HyperPoint theta;
    for (int l = 0; l < layout_.L; ++l) {
      GpHyper h;
      h.sigma = std::exp(v(layout_.log_sigma(l)));
      h.rho = std::exp(v(layout_.log_rho(l)));
      h.group_index = l + 1;
      theta.gp.push_back(h);
    }
    for (int k = 0; k < layout_.K; ++k)
      theta.tau.push_back(std::exp(v(layout_.log_tau(k))));
    return theta;
  }

  // ---- joint density and derivatives --------------------------------------

  // Poisson likelihood only (priors excluded); -inf when the intensity
  // overflows, so line searches retreat instead of stepping into garbage.
  double log_likelihood(const Eigen::VectorXd& v) const {
    double ll = 0.0;
    for (int t = 0; t < layout_.T; ++t) {
      Eigen::VectorXd eta = linear_predictor(v, t);
      Eigen::VectorXd lam = (eta.array().exp() * data_.cell_area).matrix();
      if (!lam.allFinite()) return -std::numeric_limits<double>::infinity();
      ll += data_.counts[static_cast<std::size_t>(t)].dot(eta) +
            data_.n_points[static_cast<std::size_t>(t)] * log_area_ - lam.sum();
    }
    return ll;
  }

  double log_joint(const Eigen::VectorXd& v) const {
    validate_params(v);
    double lp = log_likelihood(v);
    if (!std::isfinite(lp)) return lp;

    const auto& pr = spec_.priors;
    for (int t = 0; t < layout_.T; ++t)
      lp += gauss_logpdf(v(layout_.mu(t)), pr.mu_precision);
    for (int p = 0; p < layout_.P; ++p)
      lp += gauss_logpdf(v(layout_.beta(p)), pr.beta_precision);

    for (int l = 0; l < layout_.L; ++l) {
      double sigma = std::exp(v(layout_.log_sigma(l)));
      double rho = std::exp(v(layout_.log_rho(l)));
      auto gp = gp_block(l, sigma, rho);
      Eigen::VectorXd w = v.segment(layout_.w_start(l), layout_.n);
      lp += -0.5 * w.dot(gp->inv * w) - 0.5 * gp->logdet -
            0.5 * layout_.n * std::log(2.0 * M_PI);
      // PC prior on (rho, sigma) plus the log-scale Jacobian
      double l1 = pr.pc.lambda1(), l2 = pr.pc.lambda2();
      lp += std::log(l1) - std::log(rho) - l1 / rho;
      lp += std::log(l2) - l2 * sigma + std::log(sigma);
    }
    for (int k = 0; k < layout_.K; ++k) {
      double g = v(layout_.log_tau(k));
      double zscore = (g - pr.logtau_mean) / pr.logtau_sd;
      lp += -0.5 * zscore * zscore - std::log(pr.logtau_sd) - 0.5 * std::log(2.0 * M_PI);
    }
    return lp;
  }

  Eigen::VectorXd grad_log_joint(const Eigen::VectorXd& v) const {
    validate_params(v);
    const auto& pr = spec_.priors;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(layout_.total_dim());

    for (int t = 0; t < layout_.T; ++t) {
      Eigen::VectorXd eta = linear_predictor(v, t);
      Eigen::VectorXd lam = (eta.array().exp() * data_.cell_area).matrix();
      if (!lam.allFinite())
        throw NumericError("gradient requested where the intensity overflows");
      Eigen::VectorXd resid = data_.counts[static_cast<std::size_t>(t)] - lam;
      g(layout_.mu(t)) += resid.sum();
      g.segment(layout_.beta(0), layout_.P).noalias() += data_.X.transpose() * resid;
      int l = data_.group_of[static_cast<std::size_t>(t)];
      g.segment(layout_.w_start(l), layout_.n) += resid;
      for (int k = 0; k < layout_.K; ++k) {
        double tau2 = std::exp(2.0 * v(layout_.log_tau(k)));
        // d eta / d log tau_k = z^2 / tau^2
        g(layout_.log_tau(k)) +=
            resid.dot(data_.zsq_half[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]) *
            2.0 / tau2;
      }
    }

    for (int t = 0; t < layout_.T; ++t)
      g(layout_.mu(t)) -= pr.mu_precision * v(layout_.mu(t));
    for (int p = 0; p < layout_.P; ++p)
      g(layout_.beta(p)) -= pr.beta_precision * v(layout_.beta(p));

    for (int l = 0; l < layout_.L; ++l) {
      double sigma = std::exp(v(layout_.log_sigma(l)));
      double rho = std::exp(v(layout_.log_rho(l)));
      auto gp = gp_block(l, sigma, rho);
      Eigen::VectorXd w = v.segment(layout_.w_start(l), layout_.n);
      Eigen::VectorXd y = gp->inv * w;
      g.segment(layout_.w_start(l), layout_.n) -= y;
      // Sigma scales as sigma^2 (jitter included), so the log-sigma direction
      // has the closed form  w' Sigma^-1 w - n.
      g(layout_.log_sigma(l)) += w.dot(y) - static_cast<double>(layout_.n);
      double quad = y.dot(gp->dcov_dlogrho * y);
      double trace = (gp->inv.array() * gp->dcov_dlogrho.array()).sum();
      g(layout_.log_rho(l)) += 0.5 * quad - 0.5 * trace;

      double l1 = pr.pc.lambda1(), l2 = pr.pc.lambda2();
      g(layout_.log_rho(l)) += -1.0 + l1 / rho;
      g(layout_.log_sigma(l)) += 1.0 - l2 * sigma;
    }
    for (int k = 0; k < layout_.K; ++k) {
      double gk = v(layout_.log_tau(k));
      g(layout_.log_tau(k)) -= (gk - pr.logtau_mean) / (pr.logtau_sd * pr.logtau_sd);
    }
    return g;
  }

  // Negative Hessian of log_joint over (mu, beta, w) at fixed hyperparameters.
  // Positive definite: Poisson curvature is PSD and every prior adds a PD block.
  Eigen::MatrixXd neg_hessian_latent(const Eigen::VectorXd& v) const {
    const int dim = layout_.latent_dim();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    const auto& pr = spec_.priors;

    for (int t = 0; t < layout_.T; ++t) {
      Eigen::VectorXd eta = linear_predictor(v, t);
      Eigen::VectorXd lam = (eta.array().exp() * data_.cell_area).matrix();
      if (!lam.allFinite())
        throw NumericError("Hessian requested where the intensity overflows");
      const int mu = layout_.mu(t);
      const int b0 = layout_.beta(0);
      const int l = data_.group_of[static_cast<std::size_t>(t)];
      const int w0 = layout_.w_start(l);

      double s = lam.sum();
      H(mu, mu) += s;
      Eigen::VectorXd Xl = data_.X.transpose() * lam;  // P
      H.block(mu, b0, 1, layout_.P) += Xl.transpose();
      H.block(b0, mu, layout_.P, 1) += Xl;
      H.block(mu, w0, 1, layout_.n) += lam.transpose();
      H.block(w0, mu, layout_.n, 1) += lam;
      H.block(b0, b0, layout_.P, layout_.P).noalias() +=
          data_.X.transpose() * lam.asDiagonal() * data_.X;
      Eigen::MatrixXd XtL = data_.X.transpose() * lam.asDiagonal();  // P x n
      H.block(b0, w0, layout_.P, layout_.n) += XtL;
      H.block(w0, b0, layout_.n, layout_.P) += XtL.transpose();
      H.block(w0, w0, layout_.n, layout_.n).diagonal() += lam;
    }

    for (int t = 0; t < layout_.T; ++t) H(layout_.mu(t), layout_.mu(t)) += pr.mu_precision;
    for (int p = 0; p < layout_.P; ++p)
      H(layout_.beta(p), layout_.beta(p)) += pr.beta_precision;
    for (int l = 0; l < layout_.L; ++l) {
      double sigma = std::exp(v(layout_.log_sigma(l)));
      double rho = std::exp(v(layout_.log_rho(l)));
      auto gp = gp_block(l, sigma, rho);
      H.block(layout_.w_start(l), layout_.w_start(l), layout_.n, layout_.n) += gp->inv;
    }
    return H;
  }

  // ---- MAP, Laplace, profile, sampling -------------------------------------

  MapFit fit_map(const Eigen::VectorXd& init, const Tolerances& tol = {}) const {
    Eigen::VectorXd v = init;
    double f = log_joint(v);
    if (!std::isfinite(f))
      throw NumericError("log joint is not finite at the initial point");

    MapFit best;
    best.params = v;
    best.objective = f;

    const int dim = layout_.latent_dim();
    for (int iter = 1; iter <= tol.max_iter; ++iter) {
      Eigen::VectorXd g = grad_log_joint(v).head(dim);
      double scaled = g.lpNorm<Eigen::Infinity>() / std::max(1.0, std::abs(f));
      best.grad_norm = scaled;
      if (scaled < tol.grad_tol) {
        best.converged = true;
        best.iterations = iter - 1;
        return best;
      }

      Eigen::MatrixXd H = neg_hessian_latent(v);
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      double ridge = 1e-10 * H.diagonal().maxCoeff();
      while (llt.info() != Eigen::Success) {
        H.diagonal().array() += ridge;
        ridge *= 10.0;
        llt.compute(H);
        if (ridge > 1e6 * H.diagonal().maxCoeff())
          throw NumericError("Newton step: Hessian factorization failed");
      }
      Eigen::VectorXd step = llt.solve(g);
      double slope = g.dot(step);

      double alpha = 1.0;
      double f_new = f;
      Eigen::VectorXd v_new = v;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        v_new = v;
        v_new.head(dim) += alpha * step;
        f_new = log_joint(v_new);
        if (std::isfinite(f_new) && f_new >= f + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // no ascent possible along the Newton direction; report best-so-far
        best.iterations = iter;
        best.converged = best.grad_norm < tol.grad_tol;
        if (!best.converged)
          throw ConvergenceError("line search stalled at iteration " +
                                     std::to_string(iter) + " (scaled gradient " +
                                     format_double(best.grad_norm) + ")",
                                 best.objective);
        return best;
      }

      double rel_change = std::abs(f_new - f) / std::max(1.0, std::abs(f_new));
      v = v_new;
      f = f_new;
      if (f > best.objective) {
        best.objective = f;
        best.params = v;
      }
      best.iterations = iter;
      if (rel_change < tol.obj_tol) {
        Eigen::VectorXd g2 = grad_log_joint(v).head(dim);
        best.grad_norm = g2.lpNorm<Eigen::Infinity>() / std::max(1.0, std::abs(f));
        best.converged = true;
        return best;
      }
    }
    Eigen::VectorXd g = grad_log_joint(best.params).head(dim);
    best.grad_norm = g.lpNorm<Eigen::Infinity>() / std::max(1.0, std::abs(best.objective));
    throw ConvergenceError("MAP did not converge within " + std::to_string(tol.max_iter) +
                               " iterations (scaled gradient " +
                               format_double(best.grad_norm) + ")",
                           best.objective);
  }

  MapFit fit_map(const HyperPoint& theta, const Tolerances& tol = {}) const {
    return fit_map(init_params(theta), tol);
  }

  // Inverse of the negative Hessian at the MAP, symmetrized.
  Eigen::MatrixXd laplace_cov(const Eigen::VectorXd& map_params) const {
    Eigen::MatrixXd H = neg_hessian_latent(map_params);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success)
      throw NumericError("negative Hessian is not positive definite at the MAP; "
                         "inspect the hyperparameter profile");
    Eigen::MatrixXd cov =
        llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    return 0.5 * (cov + cov.transpose());
  }

  // Laplace-approximate log marginal for each hyper grid point, max-shifted
  // softmax weights. Individual failures are tolerated; all failing is an error.
  HyperProfile profile_hyperparams(const std::vector<HyperPoint>& grid,
                                   const Tolerances& tol = {}) const {
    if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
    HyperProfile profile;
    profile.latent_dim = layout_.latent_dim();
    profile.points.resize(grid.size());

    parallel_for(grid.size(), [&](std::size_t i) {
      ProfilePoint& pt = profile.points[i];
      pt.theta = grid[i];
      try {
        MapFit fit = fit_map(grid[i], tol);
        Eigen::MatrixXd H = neg_hessian_latent(fit.params);
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() != Eigen::Success)
          throw NumericError("negative Hessian not positive definite");
        double logdet = 0.0;
        for (Eigen::Index r = 0; r < H.rows(); ++r)
          logdet += 2.0 * std::log(llt.matrixLLT()(r, r));
        pt.mode = fit.params;
        pt.objective = fit.objective;
        pt.iterations = fit.iterations;
        pt.logdet_neg_hess = logdet;
        pt.log_marginal = fit.objective +
                          0.5 * profile.latent_dim * std::log(2.0 * M_PI) -
                          0.5 * logdet;
        pt.ok = true;
      } catch (const Error& e) {
        pt.ok = false;
        pt.error = e.what();
      }
    });

    double best = -std::numeric_limits<double>::infinity();
    for (const auto& pt : profile.points)
      if (pt.ok) best = std::max(best, pt.log_marginal);
    if (!std::isfinite(best)) {
      std::string msg = "every hyperparameter grid point failed:";
      for (const auto& pt : profile.points) msg += "\n  " + pt.error;
      throw NumericError(msg);
    }
    double total = 0.0;
    for (auto& pt : profile.points)
      total += pt.ok ? std::exp(pt.log_marginal - best) : 0.0;
    for (auto& pt : profile.points)
      pt.weight = pt.ok ? std::exp(pt.log_marginal - best) / total : 0.0;
    return profile;
  }

  // Mixture draws: theta from the profile weights, then (mu, beta, w) from
  // the Gaussian Laplace approximation at that theta. Per-draw seeds make the
  // result independent of worker scheduling.
  std::vector<Eigen::VectorXd> sample_posterior(const HyperProfile& profile, int M,
                                                std::uint64_t seed) const {
    if (M < 1) throw ConfigError("posterior sample count must be >= 1");
    std::vector<double> cumw;
    double acc = 0.0;
    for (const auto& pt : profile.points) {
      acc += pt.weight;
      cumw.push_back(acc);
    }
    if (!(acc > 0.0)) throw NumericError("profile weights sum to zero");

    struct Factor {
      std::once_flag once;
      Eigen::MatrixXd chol;  // lower factor of the negative Hessian
    };
    std::vector<Factor> factors(profile.points.size());
    auto chol_at = [&](std::size_t i) -> const Eigen::MatrixXd& {
      std::call_once(factors[i].once, [&] {
        Eigen::MatrixXd H = neg_hessian_latent(profile.points[i].mode);
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() != Eigen::Success)
          throw NumericError("negative Hessian not positive definite while sampling");
        factors[i].chol = llt.matrixL();
      });
      return factors[i].chol;
    };

    std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(M));
    parallel_for(static_cast<std::size_t>(M), [&](std::size_t m) {
      auto rng = make_rng(derive_seed(seed, kSeedPosterior, m));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double u = unit(rng) * acc;
      std::size_t idx = static_cast<std::size_t>(
          std::lower_bound(cumw.begin(), cumw.end(), u) - cumw.begin());
      if (idx >= profile.points.size()) idx = profile.points.size() - 1;
      while (profile.points[idx].weight <= 0.0 && idx + 1 < profile.points.size()) ++idx;

      const Eigen::MatrixXd& L = chol_at(idx);
      Eigen::VectorXd eps(profile.latent_dim);
      for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = gauss(rng);
      Eigen::VectorXd x = L.transpose()
                              .triangularView<Eigen::Upper>()
                              .solve(eps);
      Eigen::VectorXd v = profile.points[idx].mode;
      v.head(profile.latent_dim) += x;
      draws[m] = std::move(v);
    });
    return draws;
  }

  // Intensity field lambda*_t implied by one parameter vector (nodata on
  // inactive cells).
  RasterLayer lambda_star_field(const Eigen::VectorXd& v, int t) const {
    Eigen::VectorXd eta = linear_predictor(v, t);
    RasterLayer layer(data_.grid, 0.0);
    for (auto& m : layer.nodata_mask) m = 1;
    for (int i = 0; i < layout_.n; ++i) {
      layer.values[static_cast<std::size_t>(data_.active[static_cast<std::size_t>(i)])] =
          std::exp(eta(i));
      layer.nodata_mask[static_cast<std::size_t>(data_.active[static_cast<std::size_t>(i)])] = 0;
    }
    return layer;
  }

 private:
  struct GpBlock {
    Eigen::MatrixXd inv;
    Eigen::MatrixXd dcov_dlogrho;
    double logdet = 0.0;
    double jitter = 0.0;
    int escalations = 0;
  };

  Eigen::VectorXd linear_predictor(const Eigen::VectorXd& v, int t) const {
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(layout_.n, v(layout_.mu(t)));
    if (layout_.P > 0)
      eta.noalias() += data_.X * v.segment(layout_.beta(0), layout_.P);
    eta += v.segment(layout_.w_start(data_.group_of[static_cast<std::size_t>(t)]), layout_.n);
    for (int k = 0; k < layout_.K; ++k) {
      double inv_tau2 = std::exp(-2.0 * v(layout_.log_tau(k)));
      eta -= inv_tau2 *
             data_.zsq_half[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)];
    }
    return eta;
  }

  void validate_params(const Eigen::VectorXd& v) const {
    if (v.size() != layout_.total_dim())
      throw DataError("parameter vector has wrong length");
    if (!v.allFinite()) throw DataError("parameter vector contains non-finite values");
  }

  static double gauss_logpdf(double x, double precision) {
    return -0.5 * precision * x * x + 0.5 * std::log(precision / (2.0 * M_PI));
  }

  std::shared_ptr<const GpBlock> gp_block(int l, double sigma, double rho) const {
    std::tuple<int, double, double> key{l, sigma, rho};
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      auto it = gp_cache_.find(key);
      if (it != gp_cache_.end()) return it->second;
    }
    GpHyper hyper{sigma, rho, l + 1};
    CovFactor f = factor_cov_matrix(data_.centers, hyper);
    auto block = std::make_shared<GpBlock>();
    block->inv = f.llt.solve(Eigen::MatrixXd::Identity(layout_.n, layout_.n));
    block->logdet = f.log_det();
    block->jitter = f.jitter;
    block->escalations = f.escalations;
    block->dcov_dlogrho.resize(layout_.n, layout_.n);
    for (int i = 0; i < layout_.n; ++i) {
      block->dcov_dlogrho(i, i) = 0.0;
      for (int j = 0; j < i; ++j) {
        double dx = data_.centers(i, 0) - data_.centers(j, 0);
        double dy = data_.centers(i, 1) - data_.centers(j, 1);
        double d = matern_cov_dlogrho(std::sqrt(dx * dx + dy * dy), hyper);
        block->dcov_dlogrho(i, j) = d;
        block->dcov_dlogrho(j, i) = d;
      }
    }
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto [it, inserted] = gp_cache_.emplace(key, std::move(block));
    if (gp_cache_.size() > 64) {  // profile grids are small; keep memory bounded
      auto victim = gp_cache_.begin();
      if (victim->first == key) ++victim;
      if (victim != gp_cache_.end()) gp_cache_.erase(victim);
    }
    return it->second;
  }

  AssembledData data_;
  ModelSpec spec_;
  ParamLayout layout_;
  double log_area_ = 0.0;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::tuple<int, double, double>, std::shared_ptr<const GpBlock>> gp_cache_;
};

// Central finite-difference audit of the analytic gradient. `grad_override`
// lets tests inject a broken gradient to prove the check catches it.
inline GradCheckReport gradcheck(
    const ThinnedLgcpEngine& engine, int n_trials, std::uint64_t seed,
    double fd_step = 1e-5,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_override = nullptr) {
  GradCheckReport report;
  report.n_trials = n_trials;
  if (n_trials == 0) {
    report.vacuous = true;
    return report;
  }
  const auto& layout = engine.layout();

  for (int trial = 0; trial < n_trials; ++trial) {
    auto rng = make_rng(derive_seed(seed, kSeedGradcheck, static_cast<std::uint64_t>(trial)));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd v(layout.total_dim());
    for (int t = 0; t < layout.T; ++t) v(layout.mu(t)) = unit(rng);
    for (int p = 0; p < layout.P; ++p) v(layout.beta(p)) = 0.5 * unit(rng);
    for (int l = 0; l < layout.L; ++l)
      for (int i = 0; i < layout.n; ++i) v(layout.w(l, i)) = 0.3 * unit(rng);
    for (int l = 0; l < layout.L; ++l) {
      v(layout.log_sigma(l)) = std::log(0.5) + 0.5 * unit(rng);
      double extent = std::max(engine.data().grid.max_x() - engine.data().grid.origin_x,
                               engine.data().grid.max_y() - engine.data().grid.origin_y);
      v(layout.log_rho(l)) = std::log(0.25 * extent) + 0.5 * unit(rng);
    }
    for (int k = 0; k < layout.K; ++k) v(layout.log_tau(k)) = 0.6 * unit(rng);

    Eigen::VectorXd analytic =
        grad_override ? grad_override(v) : engine.grad_log_joint(v);
    for (int c = 0; c < layout.total_dim(); ++c) {
      Eigen::VectorXd vp = v, vm = v;
      vp(c) += fd_step;
      vm(c) -= fd_step;
      double fd = (engine.log_joint(vp) - engine.log_joint(vm)) / (2.0 * fd_step);
      double rel = std::abs(analytic(c) - fd) /
                   std::max({1.0, std::abs(analytic(c)), std::abs(fd)});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_coord = layout.coord_name(c);
        report.worst_trial = trial;
        report.analytic_at_worst = analytic(c);
        report.fd_at_worst = fd;
      }
    }
  }
  return report;
}

// Posterior summaries for the named scalar parameters (latent mu/beta plus
// the profiled hyperparameters carried on each draw).
struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0;
};

inline double quantile_type7(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  if (x.size() == 1) return x[0];
  double h = (static_cast<double>(x.size()) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline ParamSummary summarize(const std::string& name, const std::vector<double>& draws) {
  ParamSummary s;
  s.name = name;
  double n = static_cast<double>(draws.size());
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : draws) var += (v - mean) * (v - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  s.mean = mean;
  s.sd = std::sqrt(var);
  s.q025 = quantile_type7(draws, 0.025);
  s.q975 = quantile_type7(draws, 0.975);
  return s;
}

inline std::vector<ParamSummary> summarize_posterior(
    const ThinnedLgcpEngine& engine, const std::vector<Eigen::VectorXd>& draws,
    const std::vector<std::string>& covariate_names) {
  const auto& layout = engine.layout();
  std::vector<ParamSummary> out;
  auto collect = [&](const std::string& name, int coord, bool expo) {
    std::vector<double> vals;
    vals.reserve(draws.size());
    for (const auto& d : draws) vals.push_back(expo ? std::exp(d(coord)) : d(coord));
    out.push_back(summarize(name, vals));
  };
  for (int t = 0; t < layout.T; ++t)
    collect("mu[" + std::to_string(t + 1) + "]", layout.mu(t), false);
  for (int p = 0; p < layout.P; ++p) {
    std::string nm = p < static_cast<int>(covariate_names.size())
                         ? "beta[" + covariate_names[static_cast<std::size_t>(p)] + "]"
                         : "beta[" + std::to_string(p + 1) + "]";
    collect(nm, layout.beta(p), false);
  }
  for (int l = 0; l < layout.L; ++l) {
    collect("sigma[" + std::to_string(l + 1) + "]", layout.log_sigma(l), true);
    collect("rho[" + std::to_string(l + 1) + "]", layout.log_rho(l), true);
  }
  for (int k = 0; k < layout.K; ++k)
    collect("tau[" + std::to_string(k + 1) + "]", layout.log_tau(k), true);
  return out;
}

}  // namespace coxthin
