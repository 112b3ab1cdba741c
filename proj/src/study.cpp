#include "nsoc/study.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "nsoc/errors.hpp"

namespace nsoc {

void StudyTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("study row width does not match the header");
  rows.push_back(std::move(row));
}

std::vector<double> StudyTable::column(std::size_t j) const {
  if (j >= columns.size()) throw std::out_of_range("study column out of range");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

void StudyTable::write(std::ostream& out) const {
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  char buf[32];
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r[j]);
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

void StudyTable::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

double loglog_slope(const StudyTable& table, std::size_t x_col, std::size_t y_col) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (const auto& r : table.rows) {
    if (!(r.at(x_col) > 0.0) || !(r.at(y_col) > 0.0)) continue;
    const double lx = std::log(r[x_col]);
    const double ly = std::log(r[y_col]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("loglog_slope needs at least two positive rows");
  const double denom = count * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("loglog_slope: parameters are not distinct");
  return (count * sxy - sx * sy) / denom;
}

}  // namespace nsoc
