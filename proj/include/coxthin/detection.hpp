#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "coxthin/errors.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/point_pattern.hpp"

namespace coxthin {

// Transforms turning a raw detection mark into a detectability covariate z:
// maximum detection sits at z = 0, so confidence and diagonal enter as their
// complement to one and local frequency as its reciprocal.
enum class TransformKind { complement_to_one, reciprocal, identity };

inline TransformKind transform_from_string(const std::string& s) {
  if (s == "complement_to_one") return TransformKind::complement_to_one;
  if (s == "reciprocal") return TransformKind::reciprocal;
  if (s == "identity") return TransformKind::identity;
  throw ConfigError("unknown transform kind: '" + s + "'");
}

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::complement_to_one: return "complement_to_one";
    case TransformKind::reciprocal: return "reciprocal";
    case TransformKind::identity: return "identity";
  }
  return "?";
}

inline std::vector<double> transform_covariate(const std::vector<double>& values,
                                               TransformKind kind) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    switch (kind) {
      case TransformKind::complement_to_one:
        if (!(v >= 0.0 && v <= 1.0))
          throw DataError("complement_to_one input outside [0,1] at index " +
                          std::to_string(i));
        out[i] = 1.0 - v;
        break;
      case TransformKind::reciprocal:
        if (!(v >= 1.0))
          throw DataError("reciprocal input < 1 at index " + std::to_string(i));
        out[i] = 1.0 / v;
        break;
      case TransformKind::identity:
        out[i] = v;
        break;
    }
  }
  return out;
}

// f_r(i) = number of points within distance r of point i, self-inclusive so
// the reciprocal transform stays defined. Brute force; fine at desk scale.
inline std::vector<double> local_frequency(const MarkedPointPattern& pattern, double r) {
  if (!(r > 0.0)) throw DataError("local_frequency requires r > 0");
  const auto& pts = pattern.points;
  std::vector<double> counts(pts.size(), 0.0);
  double r2 = r * r;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int c = 0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
      if (dx * dx + dy * dy <= r2) ++c;
    }
    counts[i] = static_cast<double>(c);
  }
  return counts;
}

struct RadiusSelection {
  double radius = 0.0;
  double coverage = 0.0;  // fraction of points with >= 1 other point within radius
  bool fallback = false;  // no candidate met the target; largest returned
};

// Smallest candidate radius whose neighbour coverage (self excluded) reaches
// coverage_target; falls back to the largest candidate with a warning flag.
inline RadiusSelection select_radius(const std::vector<MarkedPointPattern>& patterns,
                                     const std::vector<double>& candidates,
                                     double coverage_target) {
  if (candidates.empty()) throw ConfigError("select_radius: no candidate radii");
  for (std::size_t i = 0; i + 1 < candidates.size(); ++i)
    if (!(candidates[i] < candidates[i + 1]))
      throw ConfigError("select_radius: candidates must be strictly ascending");
  if (!(coverage_target > 0.0 && coverage_target < 1.0))
    throw ConfigError("select_radius: coverage target must lie in (0,1)");
  std::size_t total = 0;
  for (const auto& p : patterns) total += p.size();
  if (total < 2)
    throw DataError("select_radius: need at least 2 points to define coverage");

  auto coverage_at = [&](double r) {
    double r2 = r * r;
    std::size_t covered = 0;
    for (const auto& pat : patterns) {
      const auto& pts = pat.points;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
          if (i == j) continue;
          double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
          if (dx * dx + dy * dy <= r2) {
            ++covered;
            break;
          }
        }
      }
    }
    return static_cast<double>(covered) / static_cast<double>(total);
  };

  for (double r : candidates) {
    double cov = coverage_at(r);
    if (cov >= coverage_target) return {r, cov, false};
  }
  double r = candidates.back();
  return {r, coverage_at(r), true};
}

inline RadiusSelection select_radius(const MarkedPointPattern& pattern,
                                     const std::vector<double>& candidates,
                                     double coverage_target) {
  return select_radius(std::vector<MarkedPointPattern>{pattern}, candidates,
                       coverage_target);
}

// Default candidate ladder: 0.25 m steps from 0.25 to 5.
inline std::vector<double> default_radius_candidates() {
  std::vector<double> r;
  for (int i = 1; i <= 20; ++i) r.push_back(0.25 * i);
  return r;
}

// p = prod_k exp(-z_k^2 / (2 tau_k^2)); K = 0 means no thinning (p = 1).
inline double detection_prob(const std::vector<double>& z,
                             const std::vector<double>& taus) {
  if (z.size() != taus.size())
    throw DataError("detection_prob: z has " + std::to_string(z.size()) +
                    " components but " + std::to_string(taus.size()) + " taus");
  double q = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!(taus[k] > 0.0)) throw DataError("detection_prob: tau must be > 0");
    q += z[k] * z[k] / (2.0 * taus[k] * taus[k]);
  }
  return std::exp(-q);
}

inline RasterLayer detection_field(const std::vector<RasterLayer>& z_layers,
                                   const std::vector<double>& taus) {
  if (z_layers.size() != taus.size())
    throw DataError("detection_field: layer/tau count mismatch");
  if (z_layers.empty())
    throw DataError("detection_field: need a grid; use K = 0 upstream for p == 1");
  const RasterGrid& grid = z_layers.front().grid;
  for (const auto& l : z_layers) {
    require_same_grid(grid, l.grid, "detection covariate layers");
    if (l.has_nodata())
      throw DataError("detection_field: covariate layers must not contain nodata");
  }
  RasterLayer p(grid, 1.0);
  std::vector<double> z(z_layers.size());
  for (int c = 0; c < grid.n_cells(); ++c) {
    for (std::size_t k = 0; k < z_layers.size(); ++k) z[k] = z_layers[k][c];
    p[c] = detection_prob(z, taus);
  }
  return p;
}

}  // namespace coxthin
