#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "coxthin/errors.hpp"
#include "coxthin/grid.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

// ESRI ASCII grid: six header lines (ncols, nrows, xllcorner, yllcorner,
// cellsize, NODATA_value) then row-major values, north row first. Internal
// storage keeps row 0 at the south edge, so rows are reversed on read/write.

inline RasterLayer load_raster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open raster file: " + path.string());

  auto read_header = [&](const char* key) -> double {
    std::string k;
    double v;
    if (!(in >> k >> v))
      throw DataError("malformed raster header in " + path.string() +
                      ": expected '" + key + "'");
    std::string lower;
    for (char c : k) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower != key)
      throw DataError("malformed raster header in " + path.string() + ": got '" +
                      k + "', expected '" + key + "'");
    return v;
  };

  int ncols = static_cast<int>(read_header("ncols"));
  int nrows = static_cast<int>(read_header("nrows"));
  double xll = read_header("xllcorner");
  double yll = read_header("yllcorner");
  double cellsize = read_header("cellsize");
  double nodata = read_header("nodata_value");
  if (ncols < 1 || nrows < 1 || cellsize <= 0)
    throw DataError("invalid raster dimensions in " + path.string());

  RasterLayer layer(RasterGrid(xll, yll, ncols, nrows, cellsize));
  std::size_t expected = static_cast<std::size_t>(ncols) * nrows;
  std::size_t got = 0;
  double v;
  while (in >> v) {
    if (got >= expected) {
      ++got;  // count overflow for the error message
      continue;
    }
    // File rows run north to south; storage row 0 is the south row.
    std::size_t file_row = got / ncols, col = got % ncols;
    std::size_t row = static_cast<std::size_t>(nrows) - 1 - file_row;
    std::size_t cell = row * ncols + col;
    if (v == nodata) {
      layer.nodata_mask[cell] = 1;
      layer.values[cell] = 0.0;
    } else {
      layer.values[cell] = v;
    }
    ++got;
  }
  if (got != expected)
    throw DataError("raster " + path.string() + " has " + std::to_string(got) +
                    " values, expected " + std::to_string(expected));
  layer.validate();
  return layer;
}

inline std::string raster_ascii(const RasterLayer& layer, double nodata = -9999.0) {
  std::ostringstream out;
  const auto& g = layer.grid;
  out << "ncols " << g.n_cols << "\n";
  out << "nrows " << g.n_rows << "\n";
  out << "xllcorner " << format_double(g.origin_x) << "\n";
  out << "yllcorner " << format_double(g.origin_y) << "\n";
  out << "cellsize " << format_double(g.cell_size) << "\n";
  out << "NODATA_value " << format_double(nodata) << "\n";
  for (int row = g.n_rows - 1; row >= 0; --row) {
    for (int col = 0; col < g.n_cols; ++col) {
      std::size_t cell = static_cast<std::size_t>(row) * g.n_cols + col;
      if (col) out << ' ';
      out << (layer.nodata_mask[cell] ? format_double(nodata)
                                      : format_double(layer.values[cell]));
    }
    out << '\n';
  }
  return out.str();
}

inline void write_raster(const std::filesystem::path& path, const RasterLayer& layer,
                         double nodata = -9999.0) {
  atomic_write(path, raster_ascii(layer, nodata));
}

}  // namespace coxthin
