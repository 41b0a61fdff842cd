#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coxthin/errors.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

// Regular grid over the study domain. Coordinates are meters in a local
// planar frame; cell (col,row) spans the half-open square
// [origin + col*cs, origin + (col+1)*cs) x [... row ...), closed on the
// global max edge so every domain point belongs to exactly one cell.
struct RasterGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  int n_cols = 0;
  int n_rows = 0;
  double cell_size = 0.0;

  RasterGrid() = default;
  RasterGrid(double ox, double oy, int cols, int rows, double cs)
      : origin_x(ox), origin_y(oy), n_cols(cols), n_rows(rows), cell_size(cs) {
    if (cs <= 0) throw DataError("grid cell_size must be > 0");
    if (cols < 1 || rows < 1) throw DataError("grid must have at least one cell");
  }

  int n_cells() const { return n_cols * n_rows; }
  double cell_area() const { return cell_size * cell_size; }
  double max_x() const { return origin_x + n_cols * cell_size; }
  double max_y() const { return origin_y + n_rows * cell_size; }

  bool contains(double x, double y) const {
    return x >= origin_x && x <= max_x() && y >= origin_y && y <= max_y();
  }

  // Half-open cell convention: floor((coord - origin)/cell_size), with points
  // on the global max edge folded into the last cell.
  int cell_of(double x, double y) const {
    if (!contains(x, y))
      throw DataError("point (" + format_double(x) + ", " + format_double(y) +
                      ") lies outside the grid extent");
    int col = static_cast<int>(std::floor((x - origin_x) / cell_size));
    int row = static_cast<int>(std::floor((y - origin_y) / cell_size));
    if (col == n_cols) --col;
    if (row == n_rows) --row;
    return row * n_cols + col;
  }

  double center_x(int cell) const {
    return origin_x + (cell % n_cols + 0.5) * cell_size;
  }
  double center_y(int cell) const {
    return origin_y + (cell / n_cols + 0.5) * cell_size;
  }

  bool same_geometry(const RasterGrid& o) const {
    return origin_x == o.origin_x && origin_y == o.origin_y &&
           n_cols == o.n_cols && n_rows == o.n_rows && cell_size == o.cell_size;
  }
};

// Real-valued field on a RasterGrid, row 0 = south. Cells flagged in
// nodata_mask carry no value and are excluded from the model domain.
struct RasterLayer {
  RasterGrid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> nodata_mask;

  RasterLayer() = default;
  explicit RasterLayer(const RasterGrid& g, double fill = 0.0)
      : grid(g),
        values(static_cast<std::size_t>(g.n_cells()), fill),
        nodata_mask(static_cast<std::size_t>(g.n_cells()), 0) {}

  double operator[](int cell) const { return values[static_cast<std::size_t>(cell)]; }
  double& operator[](int cell) { return values[static_cast<std::size_t>(cell)]; }
  bool is_nodata(int cell) const { return nodata_mask[static_cast<std::size_t>(cell)] != 0; }
  bool has_nodata() const {
    for (auto m : nodata_mask)
      if (m) return true;
    return false;
  }

  void validate() const {
    if (values.size() != static_cast<std::size_t>(grid.n_cells()) ||
        nodata_mask.size() != values.size())
      throw DataError("raster layer size does not match its grid");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!nodata_mask[i] && !std::isfinite(values[i]))
        throw DataError("non-finite raster value at cell " + std::to_string(i));
  }
};

inline void require_same_grid(const RasterGrid& a, const RasterGrid& b,
                              const std::string& what) {
  if (!a.same_geometry(b))
    throw DataError("grid geometry mismatch: " + what);
}

}  // namespace coxthin
