#include "nsoc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nsoc/errors.hpp"
#include "nsoc/linsolve.hpp"

namespace nsoc {

Grid::Grid(int dim, int cells) : dim_(dim), cells_(cells), h_(0.0), size_(0) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (cells < 2) throw std::invalid_argument("grid needs at least 2 cells per axis");
  h_ = 1.0 / cells;
  const auto per_axis = static_cast<std::size_t>(cells - 1);
  size_ = dim == 1 ? per_axis : per_axis * per_axis;
}

std::array<double, 2> Grid::coord(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("grid node index out of range");
  const auto per_axis = static_cast<std::size_t>(cells_ - 1);
  if (dim_ == 1) return {static_cast<double>(i + 1) * h_, 0.0};
  return {static_cast<double>(i % per_axis + 1) * h_, static_cast<double>(i / per_axis + 1) * h_};
}

std::size_t Grid::index(int ix, int iy) const {
  const int per_axis = cells_ - 1;
  if (ix < 0 || ix >= per_axis || iy < 0 || (dim_ == 1 ? iy != 0 : iy >= per_axis)) {
    throw std::out_of_range("grid node index out of range");
  }
  return static_cast<std::size_t>(ix) + static_cast<std::size_t>(per_axis) * static_cast<std::size_t>(iy);
}

Grid make_grid(int dim, int cells) { return Grid(dim, cells); }

// ---------------------------------------------------------------------------

Field::Field(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

Field::Field(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw GridMismatch("field has " + std::to_string(values_.size()) + " values, grid has " +
                       std::to_string(grid_.size()) + " interior nodes");
  }
}

Field Field::from_function(const Grid& grid, const std::function<double(double, double)>& f) {
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto [x, y] = grid.coord(i);
    out.values_[i] = f(x, y);
  }
  return out;
}

Field Field::constant(const Grid& grid, double value) { return Field(grid, std::vector<double>(grid.size(), value)); }

double Field::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool Field::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& other) { return axpy(1.0, other); }
Field& Field::operator-=(const Field& other) { return axpy(-1.0, other); }

Field& Field::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

Field& Field::axpy(double s, const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * other.values_[i];
  return *this;
}

void require_same_grid(const Field& a, const Field& b) {
  if (!(a.grid() == b.grid())) throw GridMismatch("fields live on different grids");
}

// ---------------------------------------------------------------------------

Operator::Operator(std::size_t rows, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                   std::vector<double> vals, bool positive_definite)
    : rows_(rows),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      vals_(std::move(vals)),
      positive_definite_(positive_definite) {
  if (row_ptr_.size() != rows_ + 1 || cols_.size() != vals_.size() || row_ptr_.back() != cols_.size()) {
    throw std::invalid_argument("inconsistent compressed-row layout");
  }
}

Operator Operator::diagonal(std::vector<double> diag, bool positive_definite) {
  const std::size_t n = diag.size();
  std::vector<std::size_t> ptr(n + 1);
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i <= n; ++i) ptr[i] = i;
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return Operator(n, std::move(ptr), std::move(cols), std::move(diag), positive_definite);
}

void Operator::apply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != rows_ || y.size() != rows_) throw std::invalid_argument("operator size mismatch");
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
    y[i] = s;
  }
}

std::vector<double> Operator::apply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  apply(x, y);
  return y;
}

double Operator::quadratic_form(std::span<const double> x, std::span<const double> y) const {
  const auto ay = apply(y);
  double s = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) s += x[i] * ay[i];
  return s;
}

std::vector<double> Operator::diagonal_entries() const {
  std::vector<double> d(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) d[i] = entry(i, i);
  return d;
}

double Operator::entry(std::size_t i, std::size_t j) const {
  for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
    if (cols_[k] == j) return vals_[k];
  }
  return 0.0;
}

double Operator::gershgorin_bound() const {
  double bound = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += std::abs(vals_[k]);
    bound = std::max(bound, s);
  }
  return bound;
}

Operator Operator::restricted(std::span<const std::size_t> keep) const {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> new_index(rows_, npos);
  for (std::size_t r = 0; r < keep.size(); ++r) new_index[keep[r]] = r;

  std::vector<std::size_t> ptr{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  ptr.reserve(keep.size() + 1);
  for (std::size_t i : keep) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t j = new_index[cols_[k]];
      if (j == npos) continue;
      cols.push_back(j);
      vals.push_back(vals_[k]);
    }
    ptr.push_back(cols.size());
  }
  return Operator(keep.size(), std::move(ptr), std::move(cols), std::move(vals), positive_definite_);
}

Operator Operator::plus_diagonal(std::span<const double> d, bool positive_definite) const {
  if (d.size() != rows_) throw std::invalid_argument("diagonal size mismatch");
  Operator out = *this;
  out.positive_definite_ = positive_definite;
  for (std::size_t i = 0; i < rows_; ++i) {
    bool found = false;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (cols_[k] == i) {
        out.vals_[k] += d[i];
        found = true;
      }
    }
    if (!found && d[i] != 0.0) throw std::invalid_argument("plus_diagonal: missing diagonal entry");
  }
  return out;
}

// ---------------------------------------------------------------------------

Operator assemble_stiffness(const Grid& grid) {
  const std::size_t m = grid.size();
  const int per_axis = grid.nodes_per_axis();
  std::vector<std::size_t> ptr{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  ptr.reserve(m + 1);

  if (grid.dim() == 1) {
    const double inv_h = 1.0 / grid.spacing();
    for (int i = 0; i < per_axis; ++i) {
      if (i > 0) {
        cols.push_back(static_cast<std::size_t>(i - 1));
        vals.push_back(-inv_h);
      }
      cols.push_back(static_cast<std::size_t>(i));
      vals.push_back(2.0 * inv_h);
      if (i + 1 < per_axis) {
        cols.push_back(static_cast<std::size_t>(i + 1));
        vals.push_back(-inv_h);
      }
      ptr.push_back(cols.size());
    }
  } else {
    // P1 on the right-triangle mesh reproduces the 5-point stencil without an h factor.
    for (int iy = 0; iy < per_axis; ++iy) {
      for (int ix = 0; ix < per_axis; ++ix) {
        if (iy > 0) {
          cols.push_back(grid.index(ix, iy - 1));
          vals.push_back(-1.0);
        }
        if (ix > 0) {
          cols.push_back(grid.index(ix - 1, iy));
          vals.push_back(-1.0);
        }
        cols.push_back(grid.index(ix, iy));
        vals.push_back(4.0);
        if (ix + 1 < per_axis) {
          cols.push_back(grid.index(ix + 1, iy));
          vals.push_back(-1.0);
        }
        if (iy + 1 < per_axis) {
          cols.push_back(grid.index(ix, iy + 1));
          vals.push_back(-1.0);
        }
        ptr.push_back(cols.size());
      }
    }
  }
  return Operator(m, std::move(ptr), std::move(cols), std::move(vals), true);
}

Operator assemble_lumped_mass(const Grid& grid) {
  const double h = grid.spacing();
  const double w = grid.dim() == 1 ? h : h * h;
  return Operator::diagonal(std::vector<double>(grid.size(), w), true);
}

SpectrumBounds stiffness_spectrum(const Grid& grid) {
  const double h = grid.spacing();
  const double lo = 2.0 - 2.0 * std::cos(std::numbers::pi * h);
  const double hi = 2.0 - 2.0 * std::cos(std::numbers::pi * (1.0 - h));
  if (grid.dim() == 1) return {lo / h, hi / h};
  return {2.0 * lo, 2.0 * hi};
}

// ---------------------------------------------------------------------------

Discretization::Discretization(Grid grid)
    : grid_(grid),
      stiffness_(assemble_stiffness(grid_)),
      mass_op_(assemble_lumped_mass(grid_)),
      mass_(mass_op_.diagonal_entries()),
      spectrum_(stiffness_spectrum(grid_)) {}

std::shared_ptr<const Discretization> Discretization::make(int dim, int cells) {
  return std::make_shared<const Discretization>(Grid(dim, cells));
}

void Discretization::check(const Field& f) const {
  if (!(f.grid() == grid_)) throw GridMismatch("field grid does not match the discretization");
}

std::vector<double> Discretization::mass_times(const Field& u) const {
  check(u);
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mass_[i] * u[i];
  return out;
}

double Discretization::l2_inner(const Field& v, const Field& w) const {
  check(v);
  check(w);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += mass_[i] * v[i] * w[i];
  return s;
}

double Discretization::h01_inner(const Field& v, const Field& w) const {
  check(v);
  check(w);
  return stiffness_.quadratic_form(v.values(), w.values());
}

double Discretization::h01_norm(const Field& v) const { return std::sqrt(std::max(0.0, h01_inner(v, v))); }

double Discretization::hminus1_norm(const Field& u) const { return dual_norm(mass_times(u)); }

double Discretization::dual_norm(std::span<const double> r) const {
  if (r.size() != grid_.size()) throw GridMismatch("functional size does not match the grid");
  double scale = 0.0;
  for (double v : r) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  // Solve on the normalized right-hand side so the CG tolerance is relative.
  std::vector<double> b(r.begin(), r.end());
  for (double& v : b) v /= scale;
  const auto sol = conjugate_gradient(stiffness_, b, 1e-12);
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * sol.x[i];
  return scale * std::sqrt(std::max(0.0, s));
}

double Discretization::lq_norm(const Field& v, double q) const {
  check(v);
  if (!(q >= 1.0)) throw std::invalid_argument("lq_norm: q must be >= 1");
  if (std::isinf(q)) return v.max_abs();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += mass_[i] * std::pow(std::abs(v[i]), q);
  return std::pow(s, 1.0 / q);
}

// ---------------------------------------------------------------------------

bool Interval::contains(double q) const noexcept {
  const bool above = lower_closed ? q >= lower : q > lower;
  const bool below = upper_closed ? q <= upper : q < upper;
  return above && below;
}

std::string Interval::to_string() const {
  const auto fmt = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return std::string(lower_closed ? "[" : "(") + fmt(lower) + ", " + fmt(upper) + (upper_closed ? "]" : ")");
}

EmbeddingExponents embedding_exponents(int d) {
  if (d < 1) throw std::invalid_argument("embedding_exponents: dimension must be >= 1");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dd = d;
  EmbeddingExponents e;
  if (d == 1) {
    e.primal = {1.0, true, inf, true};
    e.dual = {1.0, true, inf, true};
  } else if (d == 2) {
    e.primal = {1.0, true, inf, false};
    e.dual = {1.0, false, inf, true};
  } else {
    e.primal = {1.0, true, 2.0 * dd / (dd - 2.0), true};
    e.dual = {2.0 * dd / (dd + 2.0), true, inf, true};
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("field dump line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

struct RawDump {
  int dim = 1;
  std::vector<std::array<double, 2>> coords;
  std::vector<double> values;
};

RawDump read_raw(std::istream& in) {
  RawDump dump;
  std::string line;
  if (!std::getline(in, line)) throw IoError("field dump is empty");
  const auto header = split_csv(line);
  if (header == std::vector<std::string>{"index", "x", "value"}) {
    dump.dim = 1;
  } else if (header == std::vector<std::string>{"index", "x", "y", "value"}) {
    dump.dim = 2;
  } else {
    throw IoError("field dump header must be 'index,x,value' or 'index,x,y,value'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw IoError("field dump line " + std::to_string(line_no) + ": wrong column count");
    const double idx = parse_double(cells[0], line_no);
    if (idx != static_cast<double>(dump.values.size())) {
      throw IoError("field dump line " + std::to_string(line_no) + ": rows must follow interior node order");
    }
    const double x = parse_double(cells[1], line_no);
    const double y = dump.dim == 2 ? parse_double(cells[2], line_no) : 0.0;
    const double v = parse_double(cells.back(), line_no);
    if (!std::isfinite(v)) throw IoError("field dump line " + std::to_string(line_no) + ": non-finite value");
    dump.coords.push_back({x, y});
    dump.values.push_back(v);
  }
  return dump;
}

Field validate(const RawDump& dump, const Grid& grid) {
  if (dump.dim != grid.dim()) throw IoError("field dump dimension does not match the grid");
  if (dump.values.size() != grid.size()) {
    throw IoError("field dump has " + std::to_string(dump.values.size()) + " rows, grid has " +
                  std::to_string(grid.size()) + " interior nodes");
  }
  const double tol = 1e-9 * grid.spacing();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto c = grid.coord(i);
    if (std::abs(c[0] - dump.coords[i][0]) > tol || std::abs(c[1] - dump.coords[i][1]) > tol) {
      throw IoError("field dump coordinates of row " + std::to_string(i) + " do not match the grid");
    }
  }
  return Field(grid, dump.values);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

void write_field(std::ostream& out, const Field& field) {
  const Grid& g = field.grid();
  out << (g.dim() == 1 ? "index,x,value\n" : "index,x,y,value\n");
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto c = g.coord(i);
    out << i << ',' << format_double(c[0]);
    if (g.dim() == 2) out << ',' << format_double(c[1]);
    out << ',' << format_double(field[i]) << '\n';
  }
}

void write_field(const std::string& path, const Field& field) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_field(out, field);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Field read_field(std::istream& in, const Grid& grid) { return validate(read_raw(in), grid); }

Field read_field(const std::string& path, const Grid& grid) {
  auto in = open_in(path);
  return read_field(in, grid);
}

Field read_field(std::istream& in) {
  const RawDump dump = read_raw(in);
  const double m = static_cast<double>(dump.values.size());
  const double per_axis = dump.dim == 1 ? m : std::round(std::sqrt(m));
  if (per_axis < 1.0 || (dump.dim == 2 && per_axis * per_axis != m)) {
    throw IoError("field dump row count does not describe a uniform grid");
  }
  return validate(dump, Grid(dump.dim, static_cast<int>(per_axis) + 1));
}

Field read_field(const std::string& path) {
  auto in = open_in(path);
  return read_field(in);
}

}  // namespace nsoc
