#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "coxthin/errors.hpp"
#include "coxthin/grid.hpp"

namespace coxthin {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// One campaign's detections with per-point marks. Marks are named columns of
// reals; a mark is either present for every point or absent entirely.
struct MarkedPointPattern {
  int campaign_id = 1;
  std::vector<Point> points;
  std::map<std::string, std::vector<double>> marks;

  std::size_t size() const { return points.size(); }

  bool has_mark(const std::string& name) const { return marks.count(name) != 0; }

  const std::vector<double>& mark(const std::string& name) const {
    auto it = marks.find(name);
    if (it == marks.end())
      throw DataError("campaign " + std::to_string(campaign_id) +
                      " has no mark named '" + name + "'");
    return it->second;
  }

  void set_mark(const std::string& name, std::vector<double> values) {
    if (values.size() != points.size())
      throw DataError("mark '" + name + "' length does not match point count");
    marks[name] = std::move(values);
  }

  void validate() const {
    for (const auto& [name, vals] : marks) {
      if (vals.size() != points.size())
        throw DataError("mark '" + name + "' length does not match point count");
      if (name == "confidence" || name == "diag") {
        for (std::size_t i = 0; i < vals.size(); ++i)
          if (!(vals[i] >= 0.0 && vals[i] <= 1.0))
            throw DataError("mark '" + name + "' out of [0,1] at point " +
                            std::to_string(i) + " of campaign " +
                            std::to_string(campaign_id));
      }
      if (name == "local_frequency") {
        for (std::size_t i = 0; i < vals.size(); ++i)
          if (!(vals[i] >= 1.0))
            throw DataError("local_frequency < 1 at point " + std::to_string(i));
      }
    }
  }
};

// Per-cell point counts. Points on a shared internal boundary go to the cell
// given by the half-open convention of RasterGrid::cell_of.
inline std::vector<int> cell_counts(const MarkedPointPattern& pattern,
                                    const RasterGrid& grid) {
  std::vector<int> counts(static_cast<std::size_t>(grid.n_cells()), 0);
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    const auto& p = pattern.points[i];
    if (!grid.contains(p.x, p.y))
      throw DataError("point " + std::to_string(i) + " of campaign " +
                      std::to_string(pattern.campaign_id) +
                      " lies outside the grid extent");
    ++counts[static_cast<std::size_t>(grid.cell_of(p.x, p.y))];
  }
  return counts;
}

// Cell value = mean of the named mark over points in the cell; cells without
// points copy the value of the nearest occupied cell (center-to-center
// distance, ties broken by lowest cell index). The result has no nodata, so
// downstream detection fields are defined on all of the domain.
inline RasterLayer rasterize_marks(const MarkedPointPattern& pattern,
                                   const std::string& mark_name,
                                   const RasterGrid& grid) {
  if (pattern.points.empty())
    throw DataError("cannot rasterize marks of an empty pattern");
  const auto& vals = pattern.mark(mark_name);

  RasterLayer layer(grid, 0.0);
  std::vector<double> sum(static_cast<std::size_t>(grid.n_cells()), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(grid.n_cells()), 0);
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    int c = grid.cell_of(pattern.points[i].x, pattern.points[i].y);
    sum[static_cast<std::size_t>(c)] += vals[i];
    ++cnt[static_cast<std::size_t>(c)];
  }

  std::vector<int> occupied;
  for (int c = 0; c < grid.n_cells(); ++c)
    if (cnt[c] > 0) {
      layer[c] = sum[c] / cnt[c];
      occupied.push_back(c);
    }

  for (int c = 0; c < grid.n_cells(); ++c) {
    if (cnt[c] > 0) continue;
    double cx = grid.center_x(c), cy = grid.center_y(c);
    double best = std::numeric_limits<double>::infinity();
    int best_cell = -1;
    for (int o : occupied) {
      double dx = grid.center_x(o) - cx, dy = grid.center_y(o) - cy;
      double d2 = dx * dx + dy * dy;
      if (d2 < best) {  // strict: first (lowest-index) occupied cell wins ties
        best = d2;
        best_cell = o;
      }
    }
    layer[c] = layer[best_cell];
  }
  return layer;
}

}  // namespace coxthin
