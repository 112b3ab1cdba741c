#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nsoc {

/// Uniform grid on (0,1) or (0,1)² with homogeneous Dirichlet boundary.
/// Only interior nodes carry unknowns; they are numbered x-fastest.
class Grid {
 public:
  Grid(int dim, int cells);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] int cells() const noexcept { return cells_; }
  [[nodiscard]] double spacing() const noexcept { return h_; }
  /// Number of interior nodes.
  [[nodiscard]] std::size_t size() const noexcept { return size_; }
  /// Interior nodes per axis (cells - 1).
  [[nodiscard]] int nodes_per_axis() const noexcept { return cells_ - 1; }

  /// Coordinates of interior node i; the second entry is 0 in 1D.
  [[nodiscard]] std::array<double, 2> coord(std::size_t i) const;
  [[nodiscard]] std::size_t index(int ix, int iy = 0) const;

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.dim_ == b.dim_ && a.cells_ == b.cells_;
  }

 private:
  int dim_;
  int cells_;
  double h_;
  std::size_t size_;
};

[[nodiscard]] Grid make_grid(int dim, int cells);

/// Nodal values on the interior nodes of a grid.
class Field {
 public:
  explicit Field(const Grid& grid);
  Field(const Grid& grid, std::vector<double> values);

  [[nodiscard]] static Field from_function(const Grid& grid, const std::function<double(double, double)>& f);
  [[nodiscard]] static Field constant(const Grid& grid, double value);

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<double> values() noexcept { return values_; }
  [[nodiscard]] const std::vector<double>& vector() const noexcept { return values_; }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  [[nodiscard]] double max_abs() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s) noexcept;
  /// this += s * other
  Field& axpy(double s, const Field& other);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Throws GridMismatch when the fields live on different grids.
void require_same_grid(const Field& a, const Field& b);

/// Sparse symmetric matrix in compressed-row layout.
class Operator {
 public:
  Operator() = default;
  Operator(std::size_t rows, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
           std::vector<double> vals, bool positive_definite);

  [[nodiscard]] static Operator diagonal(std::vector<double> diag, bool positive_definite);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] bool symmetric() const noexcept { return true; }
  [[nodiscard]] bool positive_definite() const noexcept { return positive_definite_; }

  [[nodiscard]] std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  [[nodiscard]] std::span<const std::size_t> cols() const noexcept { return cols_; }
  [[nodiscard]] std::span<const double> vals() const noexcept { return vals_; }

  /// y = A x
  void apply(std::span<const double> x, std::span<double> y) const;
  [[nodiscard]] std::vector<double> apply(std::span<const double> x) const;
  [[nodiscard]] double quadratic_form(std::span<const double> x, std::span<const double> y) const;

  [[nodiscard]] std::vector<double> diagonal_entries() const;
  [[nodiscard]] double entry(std::size_t i, std::size_t j) const;
  /// max_i sum_j |a_ij|
  [[nodiscard]] double gershgorin_bound() const;

  /// Principal submatrix on the given (sorted) index set.
  [[nodiscard]] Operator restricted(std::span<const std::size_t> keep) const;
  /// A + diag(d)
  [[nodiscard]] Operator plus_diagonal(std::span<const double> d, bool positive_definite) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  bool positive_definite_ = false;
};

/// Piecewise-linear stiffness: tridiag(-1, 2, -1)/h in 1D, the 5-point
/// stencil (4, -1) in 2D.
[[nodiscard]] Operator assemble_stiffness(const Grid& grid);
/// Lumped (diagonal) mass: h in 1D, h² in 2D.
[[nodiscard]] Operator assemble_lumped_mass(const Grid& grid);

/// Closed-form extreme eigenvalues of the stiffness operator on a uniform grid.
struct SpectrumBounds {
  double lambda_min;
  double lambda_max;
};
[[nodiscard]] SpectrumBounds stiffness_spectrum(const Grid& grid);

/// Grid plus its assembled stiffness and lumped mass; immutable after construction.
class Discretization {
 public:
  explicit Discretization(Grid grid);

  [[nodiscard]] static std::shared_ptr<const Discretization> make(int dim, int cells);

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] const Operator& stiffness() const noexcept { return stiffness_; }
  [[nodiscard]] const Operator& mass_operator() const noexcept { return mass_op_; }
  [[nodiscard]] std::span<const double> mass() const noexcept { return mass_; }
  [[nodiscard]] const SpectrumBounds& spectrum() const noexcept { return spectrum_; }

  [[nodiscard]] Field zeros() const { return Field(grid_); }
  /// Nodal M u.
  [[nodiscard]] std::vector<double> mass_times(const Field& u) const;

  /// Σ M_ii v_i w_i
  [[nodiscard]] double l2_inner(const Field& v, const Field& w) const;
  /// vᵀ A w
  [[nodiscard]] double h01_inner(const Field& v, const Field& w) const;
  [[nodiscard]] double h01_norm(const Field& v) const;
  /// sqrt((Mu)ᵀ A⁻¹ (Mu))
  [[nodiscard]] double hminus1_norm(const Field& u) const;
  /// sqrt(rᵀ A⁻¹ r) for a nodal functional r (already integrated against the basis).
  [[nodiscard]] double dual_norm(std::span<const double> r) const;
  /// (Σ M_ii |v_i|^q)^(1/q); q = +inf gives max |v_i|.
  [[nodiscard]] double lq_norm(const Field& v, double q) const;

 private:
  void check(const Field& f) const;

  Grid grid_;
  Operator stiffness_;
  Operator mass_op_;
  std::vector<double> mass_;
  SpectrumBounds spectrum_;
};

/// Real interval with optional infinite upper end; "closed" at +inf means inf is included.
struct Interval {
  double lower = 1.0;
  bool lower_closed = true;
  double upper = std::numeric_limits<double>::infinity();
  bool upper_closed = true;

  [[nodiscard]] bool contains(double q) const noexcept;
  [[nodiscard]] std::string to_string() const;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Lebesgue exponents q with H¹₀ ⊂ L^q (primal) and L^q ⊂ H⁻¹ (dual) in dimension d.
struct EmbeddingExponents {
  Interval primal;
  Interval dual;
};
[[nodiscard]] EmbeddingExponents embedding_exponents(int d);

// Field dump: header "index,x[,y],value", one row per interior node in index order.
void write_field(std::ostream& out, const Field& field);
void write_field(const std::string& path, const Field& field);
/// Reads a dump and checks it against the grid (row count and coordinates).
[[nodiscard]] Field read_field(std::istream& in, const Grid& grid);
[[nodiscard]] Field read_field(const std::string& path, const Grid& grid);
/// Reads a dump and infers the grid from its header and row count.
[[nodiscard]] Field read_field(std::istream& in);
[[nodiscard]] Field read_field(const std::string& path);

}  // namespace nsoc
