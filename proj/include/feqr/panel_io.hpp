#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "feqr/errors.hpp"
#include "feqr/panel.hpp"

namespace feqr {

// Long-format CSV schema: header `unit,time,y,x1..xp`, `,` delimiter,
// `.` decimal point. Names can be remapped but the column order is fixed.
struct CsvSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string y = "y";
  std::string x_prefix = "x";
};

namespace detail {

inline std::string trim(std::string_view s) {
  const char* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& tok, long line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc::result_out_of_range)
    throw Error(ErrorCode::NonFiniteValue,
                "value '" + tok + "' out of range at line " + std::to_string(line_no));
  if (ec != std::errc() || ptr != last)
    throw Error(ErrorCode::NonFiniteValue,
                "value '" + tok + "' is not a number at line " + std::to_string(line_no));
  if (!std::isfinite(v))
    throw Error(ErrorCode::NonFiniteValue,
                "non-finite value '" + tok + "' at line " + std::to_string(line_no));
  return v;
}

}  // namespace detail

// Loads a long-format panel CSV. Rows may arrive in any order and are
// canonicalized to lexicographically sorted (unit, time).
inline PanelData load_panel(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::SchemaMismatch, "empty input, expected a header row");
  auto header = detail::split_csv_line(line);
  if (header.size() < 4)
    throw Error(ErrorCode::SchemaMismatch,
                "expected columns " + schema.unit + "," + schema.time + "," + schema.y +
                    "," + schema.x_prefix + "1.., got " + std::to_string(header.size()) +
                    " columns");
  if (header[0] != schema.unit || header[1] != schema.time || header[2] != schema.y)
    throw Error(ErrorCode::SchemaMismatch,
                "header must start with " + schema.unit + "," + schema.time + "," +
                    schema.y + " (got '" + header[0] + "," + header[1] + "," +
                    header[2] + "')");
  const int p = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < p; ++j) {
    const std::string want = schema.x_prefix + std::to_string(j + 1);
    if (header[3 + j] != want)
      throw Error(ErrorCode::SchemaMismatch,
                  "regressor column " + std::to_string(j + 4) + " must be named '" +
                      want + "', got '" + header[3 + j] + "'");
  }

  struct Row {
    std::string unit, time;
    double y;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, std::string>, int> cell_count;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto toks = detail::split_csv_line(line);
    if (static_cast<int>(toks.size()) != p + 3)
      throw Error(ErrorCode::SchemaMismatch,
                  "line " + std::to_string(line_no) + " has " +
                      std::to_string(toks.size()) + " fields, expected " +
                      std::to_string(p + 3));
    Row r;
    r.unit = toks[0];
    r.time = toks[1];
    r.y = detail::parse_double(toks[2], line_no);
    r.x.resize(p);
    for (int j = 0; j < p; ++j) r.x[j] = detail::parse_double(toks[3 + j], line_no);
    auto key = std::make_pair(r.unit, r.time);
    if (++cell_count[key] > 1)
      throw Error(ErrorCode::DuplicateCell,
                  "(" + r.unit + "," + r.time + ") appears more than once (line " +
                      std::to_string(line_no) + ")");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(ErrorCode::SchemaMismatch, "no data rows");

  std::vector<std::string> units, times;
  for (const auto& [key, cnt] : cell_count) {
    units.push_back(key.first);
    times.push_back(key.second);
  }
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const int n = static_cast<int>(units.size());
  const int t_len = static_cast<int>(times.size());
  for (const auto& u : units)
    for (const auto& t : times)
      if (!cell_count.count({u, t}))
        throw Error(ErrorCode::MissingCell,
                    "panel is unbalanced: no row for (" + u + "," + t + ")");

  std::map<std::string, int> unit_index, time_index;
  for (int i = 0; i < n; ++i) unit_index[units[i]] = i;
  for (int t = 0; t < t_len; ++t) time_index[times[t]] = t;

  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * t_len);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n) * t_len, p);
  for (const auto& r : rows) {
    const Eigen::Index k =
        static_cast<Eigen::Index>(unit_index[r.unit]) * t_len + time_index[r.time];
    y(k) = r.y;
    for (int j = 0; j < p; ++j) x(k, j) = r.x[j];
  }
  return PanelData(std::move(y), std::move(x), n, t_len, std::move(units),
                   std::move(times));
}

inline PanelData load_panel(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::MissingFile, "cannot open '" + path + "'");
  return load_panel(in, schema);
}

// Inverse of load_panel; floats at 17 significant digits so the
// text round trip is exact.
inline void save_panel(const PanelData& panel, std::ostream& out,
                       const CsvSchema& schema = {}) {
  const int p = panel.n_regressors();
  out << schema.unit << ',' << schema.time << ',' << schema.y;
  for (int j = 0; j < p; ++j) out << ',' << schema.x_prefix << (j + 1);
  out << '\n';
  char buf[40];
  for (int i = 0; i < panel.n_units(); ++i) {
    for (int t = 0; t < panel.n_periods(); ++t) {
      out << panel.unit_ids()[i] << ',' << panel.time_ids()[t];
      std::snprintf(buf, sizeof(buf), "%.17g", panel.y(i, t));
      out << ',' << buf;
      for (int j = 0; j < p; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", panel.x(i, t)(j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

inline void save_panel(const PanelData& panel, const std::string& path,
                       const CsvSchema& schema = {}) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorCode::MissingFile, "cannot open '" + path + "' for writing");
  save_panel(panel, out, schema);
}

}  // namespace feqr
