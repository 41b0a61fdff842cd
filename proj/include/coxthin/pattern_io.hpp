#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coxthin/errors.hpp"
#include "coxthin/point_pattern.hpp"
#include "coxthin/util.hpp"

namespace coxthin {

// Point-pattern CSV: header `campaign,x,y,confidence,diag`, one detection per
// row, decimal point, LF line endings. Manual-annotation files leave the
// confidence and diag fields empty. Within one campaign the mark columns must
// be either all filled or all empty.

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline std::vector<MarkedPointPattern> load_point_pattern(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point-pattern file: " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty point-pattern file: " + path.string());
  auto header = detail::split_csv_row(line);
  const std::vector<std::string> expected = {"campaign", "x", "y", "confidence", "diag"};
  if (header != expected)
    throw DataError("point-pattern header must be 'campaign,x,y,confidence,diag' in " +
                    path.string());

  struct Row {
    int campaign;
    Point p;
    bool has_cs, has_dl;
    double cs, dl;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_row(line);
    if (f.size() != 5)
      throw DataError("row " + std::to_string(line_no) + " has " +
                      std::to_string(f.size()) + " fields, expected 5");
    Row r;
    try {
      r.campaign = static_cast<int>(parse_long(f[0]));
      r.p.x = parse_double(f[1]);
      r.p.y = parse_double(f[2]);
      r.has_cs = !f[3].empty();
      r.has_dl = !f[4].empty();
      r.cs = r.has_cs ? parse_double(f[3]) : 0.0;
      r.dl = r.has_dl ? parse_double(f[4]) : 0.0;
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(line_no) + ": " + e.what());
    }
    if (r.campaign < 1)
      throw DataError("row " + std::to_string(line_no) + ": campaign id must be >= 1");
    if (r.has_cs && !(r.cs >= 0.0 && r.cs <= 1.0))
      throw DataError("row " + std::to_string(line_no) + ": confidence " +
                      format_double(r.cs) + " outside [0,1]");
    if (r.has_dl && !(r.dl >= 0.0 && r.dl <= 1.0))
      throw DataError("row " + std::to_string(line_no) + ": diag " +
                      format_double(r.dl) + " outside [0,1]");
    rows.push_back(r);
  }

  // Group by campaign id, ascending, preserving row order within a campaign.
  std::vector<int> ids;
  for (const auto& r : rows)
    if (std::find(ids.begin(), ids.end(), r.campaign) == ids.end())
      ids.push_back(r.campaign);
  std::sort(ids.begin(), ids.end());

  std::vector<MarkedPointPattern> patterns;
  for (int id : ids) {
    MarkedPointPattern pat;
    pat.campaign_id = id;
    std::vector<double> cs, dl;
    std::size_t n_cs = 0, n_dl = 0;
    for (const auto& r : rows) {
      if (r.campaign != id) continue;
      pat.points.push_back(r.p);
      cs.push_back(r.cs);
      dl.push_back(r.dl);
      n_cs += r.has_cs ? 1 : 0;
      n_dl += r.has_dl ? 1 : 0;
    }
    if (n_cs != 0 && n_cs != pat.points.size())
      throw DataError("campaign " + std::to_string(id) +
                      ": confidence column is partially empty");
    if (n_dl != 0 && n_dl != pat.points.size())
      throw DataError("campaign " + std::to_string(id) +
                      ": diag column is partially empty");
    if (n_cs == pat.points.size()) pat.set_mark("confidence", std::move(cs));
    if (n_dl == pat.points.size()) pat.set_mark("diag", std::move(dl));
    pat.validate();
    patterns.push_back(std::move(pat));
  }
  return patterns;
}

inline std::string point_pattern_csv(const std::vector<MarkedPointPattern>& patterns) {
  std::ostringstream out;
  out << "campaign,x,y,confidence,diag\n";
  for (const auto& pat : patterns) {
    const std::vector<double>* cs = pat.has_mark("confidence") ? &pat.mark("confidence") : nullptr;
    const std::vector<double>* dl = pat.has_mark("diag") ? &pat.mark("diag") : nullptr;
    for (std::size_t i = 0; i < pat.points.size(); ++i) {
      out << pat.campaign_id << ',' << format_double(pat.points[i].x) << ','
          << format_double(pat.points[i].y) << ',';
      if (cs) out << format_double((*cs)[i]);
      out << ',';
      if (dl) out << format_double((*dl)[i]);
      out << '\n';
    }
  }
  return out.str();
}

inline void write_point_pattern(const std::filesystem::path& path,
                                const std::vector<MarkedPointPattern>& patterns) {
  atomic_write(path, point_pattern_csv(patterns));
}

}  // namespace coxthin
