#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "coxthin/errors.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/point_pattern.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

// Axis-aligned blocks tiling the grid extent (default 18 x 18). Cells belong
// to the block containing their center; blocks keep only active decisions at
// use time, and blocks without any active cell drop out of averages.
struct BlockPartition {
  RasterGrid grid;
  int rows = 0, cols = 0;
  std::vector<int> block_of_cell;  // per grid cell

  int n_blocks() const { return rows * cols; }
  double block_area(int) const {
    return (grid.max_x() - grid.origin_x) * (grid.max_y() - grid.origin_y) /
           static_cast<double>(n_blocks());
  }
};

inline BlockPartition make_blocks(const RasterGrid& grid, int rows, int cols) {
  if (rows < 1 || cols < 1) throw ConfigError("block partition needs rows, cols >= 1");
  BlockPartition bp;
  bp.grid = grid;
  bp.rows = rows;
  bp.cols = cols;
  double bw = (grid.max_x() - grid.origin_x) / cols;
  double bh = (grid.max_y() - grid.origin_y) / rows;
  bp.block_of_cell.resize(static_cast<std::size_t>(grid.n_cells()));
  for (int c = 0; c < grid.n_cells(); ++c) {
    int bx = static_cast<int>(std::floor((grid.center_x(c) - grid.origin_x) / bw));
    int by = static_cast<int>(std::floor((grid.center_y(c) - grid.origin_y) / bh));
    bx = std::clamp(bx, 0, cols - 1);
    by = std::clamp(by, 0, rows - 1);
    bp.block_of_cell[static_cast<std::size_t>(c)] = by * cols + bx;
  }
  return bp;
}

// Midpoint-rule integral per block: nodes are cell centers, weights are cell
// areas. Exact for the model's own piecewise-constant intensity.
inline std::vector<double> mc_quadrature(const RasterLayer& field,
                                         const BlockPartition& blocks) {
  require_same_grid(field.grid, blocks.grid, "quadrature field vs block partition");
  std::vector<double> integrals(static_cast<std::size_t>(blocks.n_blocks()), 0.0);
  double a = field.grid.cell_area();
  for (int c = 0; c < field.grid.n_cells(); ++c) {
    if (field.is_nodata(c)) continue;
    integrals[static_cast<std::size_t>(blocks.block_of_cell[static_cast<std::size_t>(c)])] +=
        a * field[c];
  }
  return integrals;
}

inline std::vector<int> block_counts(const MarkedPointPattern& pattern,
                                     const BlockPartition& blocks) {
  std::vector<int> counts(static_cast<std::size_t>(blocks.n_blocks()), 0);
  for (const auto& p : pattern.points) {
    int cell = blocks.grid.cell_of(p.x, p.y);
    ++counts[static_cast<std::size_t>(blocks.block_of_cell[static_cast<std::size_t>(cell)])];
  }
  return counts;
}

// R_raw(B_g) = N(B_g) - integral of lambda over B_g.
inline double raw_residual(const MarkedPointPattern& pattern,
                           const RasterLayer& lambda, const BlockPartition& blocks,
                           int g) {
  auto counts = block_counts(pattern, blocks);
  auto integrals = mc_quadrature(lambda, blocks);
  return static_cast<double>(counts[static_cast<std::size_t>(g)]) -
         integrals[static_cast<std::size_t>(g)];
}

// Pearson form, h = 1/sqrt(lambda): sum over points of 1/sqrt(lambda at the
// point's cell) minus the block integral of sqrt(lambda).
inline double pearson_residual(const MarkedPointPattern& pattern,
                               const RasterLayer& lambda, const BlockPartition& blocks,
                               int g) {
  double point_sum = 0.0;
  for (const auto& p : pattern.points) {
    int cell = blocks.grid.cell_of(p.x, p.y);
    if (blocks.block_of_cell[static_cast<std::size_t>(cell)] != g) continue;
    double lam = lambda[cell];
    if (!(lam > 0.0))
      throw NumericError("Pearson residual: intensity is zero at an occupied cell");
    point_sum += 1.0 / std::sqrt(lam);
  }
  double integral = 0.0;
  double a = lambda.grid.cell_area();
  for (int c = 0; c < lambda.grid.n_cells(); ++c) {
    if (lambda.is_nodata(c)) continue;
    if (blocks.block_of_cell[static_cast<std::size_t>(c)] != g) continue;
    integral += a * std::sqrt(lambda[c]);
  }
  return point_sum - integral;
}

// CRPS of the empirical distribution against the point observation 0, via the
// pairwise identity (1/M) sum |x_i| - (1/2M^2) sum |x_i - x_j|. The cross sum
// uses the sorted O(M log M) form.
inline double crps_at_zero(std::vector<double> samples) {
  if (samples.empty()) throw DataError("crps_at_zero needs at least one sample");
  const double m = static_cast<double>(samples.size());
  double abs_sum = 0.0;
  for (double v : samples) {
    if (!std::isfinite(v)) throw DataError("crps_at_zero: non-finite sample");
    abs_sum += std::abs(v);
  }
  std::sort(samples.begin(), samples.end());
  double cross = 0.0;  // sum_{i<j} (x_j - x_i)
  double prefix = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    cross += static_cast<double>(i) * samples[i] - prefix;
    prefix += samples[i];
  }
  return abs_sum / m - cross / (m * m);
}

// One fitted model's ingredients for the comparison table. lambda_sample
// must return the posterior draw m of lambda*_t on the data grid.
struct ModelResidualInput {
  std::string name;
  const std::vector<MarkedPointPattern>* patterns = nullptr;
  std::function<RasterLayer(int t, int m)> lambda_sample;
};

struct CampaignScore {
  std::string model;
  int campaign = 0;
  double raw = 0.0;
  double pearson = 0.0;
};

struct ModelAverage {
  std::string model;
  double raw = 0.0;
  double pearson = 0.0;
};

struct ResidualReport {
  std::vector<CampaignScore> scores;    // model-major, campaign ascending
  std::vector<ModelAverage> averages;   // input order; render sorts per type
  int n_samples = 0;
  int blocks_used = 0;                  // blocks with at least one active cell

  std::vector<ModelAverage> sorted_by_raw() const {
    auto v = averages;
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.raw < b.raw; });
    return v;
  }
  std::vector<ModelAverage> sorted_by_pearson() const {
    auto v = averages;
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.pearson < b.pearson; });
    return v;
  }
};

// Residual CRPS per (model, campaign): per block, M raw and Pearson residual
// samples against the model's own data, CRPS per block, mean over blocks;
// the model average is the mean over campaigns.
inline ResidualReport residual_crps_table(const std::vector<ModelResidualInput>& models,
                                          const BlockPartition& blocks, int M) {
  if (M < 1) throw ConfigError("residual table needs at least one posterior sample");
  ResidualReport report;
  report.n_samples = M;
  const int G = blocks.n_blocks();

  for (const auto& model : models) {
    if (!model.patterns || !model.lambda_sample)
      throw ConfigError("residual table: incomplete model input '" + model.name + "'");
    const auto& patterns = *model.patterns;
    double avg_raw = 0.0, avg_pearson = 0.0;
    int T = static_cast<int>(patterns.size());

    for (int t = 0; t < T; ++t) {
      const auto& pattern = patterns[static_cast<std::size_t>(t)];
      auto counts = block_counts(pattern, blocks);
      std::vector<int> point_cell;
      point_cell.reserve(pattern.points.size());
      for (const auto& p : pattern.points)
        point_cell.push_back(blocks.grid.cell_of(p.x, p.y));

      // raw_s[g][m], pearson_s[g][m]; sample index owns its slot.
      std::vector<std::vector<double>> raw_s(static_cast<std::size_t>(G)),
          pearson_s(static_cast<std::size_t>(G));
      std::vector<std::uint8_t> block_active(static_cast<std::size_t>(G), 0);
      for (auto& v : raw_s) v.resize(static_cast<std::size_t>(M));
      for (auto& v : pearson_s) v.resize(static_cast<std::size_t>(M));

      // active blocks are a property of the field's nodata mask; probe once
      RasterLayer probe = model.lambda_sample(t, 0);
      require_same_grid(probe.grid, blocks.grid, "lambda samples vs block partition");
      for (int c = 0; c < probe.grid.n_cells(); ++c)
        if (!probe.is_nodata(c))
          block_active[static_cast<std::size_t>(
              blocks.block_of_cell[static_cast<std::size_t>(c)])] = 1;

      parallel_for(static_cast<std::size_t>(M), [&](std::size_t m) {
        RasterLayer lambda = model.lambda_sample(t, static_cast<int>(m));
        auto integrals = mc_quadrature(lambda, blocks);
        std::vector<double> point_sum(static_cast<std::size_t>(G), 0.0);
        std::vector<double> sqrt_int(static_cast<std::size_t>(G), 0.0);
        double a = lambda.grid.cell_area();
        for (int c = 0; c < lambda.grid.n_cells(); ++c) {
          if (lambda.is_nodata(c)) continue;
          sqrt_int[static_cast<std::size_t>(
              blocks.block_of_cell[static_cast<std::size_t>(c)])] +=
              a * std::sqrt(lambda[c]);
        }
        for (int cell : point_cell) {
          double lam = lambda[cell];
          if (!(lam > 0.0))
            throw NumericError("Pearson residual: zero intensity at an occupied cell");
          point_sum[static_cast<std::size_t>(
              blocks.block_of_cell[static_cast<std::size_t>(cell)])] +=
              1.0 / std::sqrt(lam);
        }
        for (int g = 0; g < G; ++g) {
          raw_s[static_cast<std::size_t>(g)][m] =
              static_cast<double>(counts[static_cast<std::size_t>(g)]) -
              integrals[static_cast<std::size_t>(g)];
          pearson_s[static_cast<std::size_t>(g)][m] =
              point_sum[static_cast<std::size_t>(g)] - sqrt_int[static_cast<std::size_t>(g)];
        }
      });

      double crps_raw = 0.0, crps_pearson = 0.0;
      int used = 0;
      for (int g = 0; g < G; ++g) {
        if (!block_active[static_cast<std::size_t>(g)]) continue;
        crps_raw += crps_at_zero(raw_s[static_cast<std::size_t>(g)]);
        crps_pearson += crps_at_zero(pearson_s[static_cast<std::size_t>(g)]);
        ++used;
      }
      if (used == 0) throw DataError("no block contains an active cell");
      report.blocks_used = used;
      CampaignScore row;
      row.model = model.name;
      row.campaign = pattern.campaign_id;
      row.raw = crps_raw / used;
      row.pearson = crps_pearson / used;
      avg_raw += row.raw;
      avg_pearson += row.pearson;
      report.scores.push_back(row);
    }
    report.averages.push_back(
        {model.name, avg_raw / std::max(T, 1), avg_pearson / std::max(T, 1)});
  }
  return report;
}

}  // namespace coxthin
