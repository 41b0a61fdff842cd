// Test-only oracles, deliberately independent of the library implementation
// paths they audit.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n = 2000) {
  if (n % 2) ++n;
  double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Modified Bessel function of the second kind via the integral representation
// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.
inline double bessel_k(double nu, double x) {
  double tmax = std::acosh(720.0 / x);
  return simpson([&](double t) { return std::exp(-x * std::cosh(t)) * std::cosh(nu * t); },
                 0.0, tmax, 4000);
}

// Exact integral of (F(x) - 1{x >= 0})^2 dx for the empirical CDF F: the
// integrand is piecewise constant between the sorted breakpoints.
inline double crps_at_zero_integral(std::vector<double> samples) {
  const double m = static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  std::vector<double> breaks = samples;
  breaks.push_back(0.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    double lo = breaks[j], hi = breaks[j + 1];
    double cdf = static_cast<double>(
                     std::upper_bound(samples.begin(), samples.end(), lo) -
                     samples.begin()) /
                 m;
    double ind = lo >= 0.0 ? 1.0 : 0.0;
    total += (cdf - ind) * (cdf - ind) * (hi - lo);
  }
  return total;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace oracles
