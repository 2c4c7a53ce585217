#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "uvote/common.hpp"
#include "uvote/matrix.hpp"

namespace uvote {

// Feature matrix plus scalar targets.
struct Dataset {
  Matrix features;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
  std::size_t dim() const { return features.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line_no, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value))
    throw ParseError("line " + std::to_string(line_no) + ", column " +
                     std::to_string(col + 1) + ": not a number: '" + cell + "'");
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Expects a header row; features are every column except `target_column`,
// kept in file order.
inline Dataset load_csv(const std::string& path, const std::string& target_column = "target") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_csv: cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  ++line_no;
  const auto header = detail::split_csv_line(line);
  std::size_t target_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == target_column) {
      target_col = i;
      break;
    }
  }
  if (target_col == header.size())
    throw ParseError(path + ": target column '" + target_column + "' not found");
  const std::size_t arity = header.size();
  if (arity < 2) throw ParseError(path + ": need at least one feature column");

  std::vector<double> flat;
  std::vector<double> targets;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r")
      throw ParseError(path + ": line " + std::to_string(line_no) + " is blank");
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != arity)
      throw ParseError(path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(arity));
    for (std::size_t c = 0; c < arity; ++c) {
      const double v = detail::parse_cell(cells[c], line_no, c);
      if (c == target_col)
        targets.push_back(v);
      else
        flat.push_back(v);
    }
  }
  if (targets.empty()) throw ParseError(path + ": no data rows");

  Dataset ds;
  ds.targets = std::move(targets);
  ds.features = Matrix(ds.targets.size(), arity - 1);
  std::copy(flat.begin(), flat.end(), ds.features.values().begin());
  return ds;
}

// Header f0..f{d-1},target; shortest round-trip formatting for every cell.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("save_csv: cannot open " + path);
  for (std::size_t c = 0; c < ds.dim(); ++c) out << 'f' << c << ',';
  out << "target\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.dim(); ++c)
      out << detail::format_double(ds.features(r, c)) << ',';
    out << detail::format_double(ds.targets[r]) << '\n';
  }
}

}  // namespace uvote
