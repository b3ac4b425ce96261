#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfc/types.hpp"

namespace mfc {

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<std::string>& cells) {
    require(cells.size() == header_.size(), "CsvWriter: row width mismatch");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::ostringstream out;
    write_line(out, header_);
    for (const auto& row : rows_) write_line(out, row);
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << str();
  }

 private:
  static void write_line(std::ostringstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Minimal reader for the files this tool writes (no quoting or escapes).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      table.header = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

}  // namespace mfc
