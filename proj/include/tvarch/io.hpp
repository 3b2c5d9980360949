#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tvarch/error.hpp"
#include "tvarch/model.hpp"

namespace tvarch {

enum class IngestMode { Prices, Returns };

struct IngestSpec {
  std::string path;
  std::string column = "0";  // header name or 0-based index
  IngestMode mode = IngestMode::Returns;
  double scale = 1.0;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\"");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\"");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_index(const std::string& s) {
  std::size_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads one numeric column of a CSV stream. The first non-empty line is a
/// header when its selected cell is not numeric (or when the column is
/// given by name). Prices are turned into log returns; the scale factor is
/// applied last.
inline ReturnSeries read_series(std::istream& in, const IngestSpec& spec) {
  if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) throw InputError("scale must be positive");
  std::optional<std::size_t> index = detail::parse_index(spec.column);
  std::vector<double> raw;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (!header_seen && raw.empty()) {
      header_seen = true;
      if (!index) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
          if (cells[k] == spec.column) index = k;
        }
        if (!index) throw ParseError(lineno, "column '" + spec.column + "' not found in header");
        continue;
      }
      if (*index < cells.size() && !detail::parse_double(cells[*index])) continue;
    }
    if (*index >= cells.size()) throw ParseError(lineno, "missing column " + std::to_string(*index));
    const auto v = detail::parse_double(cells[*index]);
    if (!v) throw ParseError(lineno, "cannot parse '" + cells[*index] + "' as a finite number");
    if (spec.mode == IngestMode::Prices && !(*v > 0.0)) throw NonPositivePrice(lineno, *v);
    raw.push_back(*v);
    lines.push_back(lineno);
  }
  std::vector<double> x;
  if (spec.mode == IngestMode::Prices) {
    if (raw.size() < 2) throw InputError("prices mode needs at least two observations");
    x.reserve(raw.size() - 1);
    for (std::size_t k = 1; k < raw.size(); ++k) x.push_back(std::log(raw[k]) - std::log(raw[k - 1]));
  } else {
    x = std::move(raw);
  }
  if (x.empty()) throw InputError("no observations found");
  for (double& v : x) v *= spec.scale;
  return ReturnSeries(std::move(x));
}

inline ReturnSeries load_series(const IngestSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw InputError("cannot open " + spec.path);
  return read_series(in, spec);
}

inline void write_series_csv(std::ostream& out, const ReturnSeries& series) {
  out << "x\n";
  out.precision(17);
  for (double v : series.values()) out << v << '\n';
}

}  // namespace tvarch
