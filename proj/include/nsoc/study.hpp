#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsoc {

/// Ordered rows of numeric measurements; emitted as comma-separated text.
struct StudyTable {
  std::vector<std::string> columns{"tau", "value"};
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  [[nodiscard]] std::vector<double> column(std::size_t j) const;
  [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }

  void write(std::ostream& out) const;
  void write(const std::string& path) const;
};

/// Least-squares slope of log(value) against log(parameter) over rows with positive entries.
[[nodiscard]] double loglog_slope(const StudyTable& table, std::size_t x_col = 0, std::size_t y_col = 1);

}  // namespace nsoc
