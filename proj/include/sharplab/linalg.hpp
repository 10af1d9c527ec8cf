#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sharplab {

using Vector = std::vector<double>;

/// Dense symmetric matrix, row-major. Every constructor and mutator keeps
/// entries(i, j) == entries(j, i) bit-exactly.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(std::size_t dim);
  /// Symmetrizes the input as (M + M^T) / 2.
  SymmetricMatrix(std::size_t dim, std::span<const double> row_major);

  static SymmetricMatrix identity(std::size_t dim);
  static SymmetricMatrix diagonal(std::span<const double> diag);
  /// Q diag(eigenvalues) Q^T, with Q given row-major and columns as vectors.
  static SymmetricMatrix from_eigen(std::span<const double> eigenvalues, std::span<const double> q_row_major);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double value);
  std::span<const double> data() const { return entries_; }

  double max_abs() const;
  double trace() const;
  void multiply(std::span<const double> v, std::span<double> out) const;
  Vector multiply(std::span<const double> v) const;

 private:
  std::size_t dim_;
  std::vector<double> entries_;
};

struct Spectrum {
  Vector eigenvalues;                // descending
  std::vector<double> eigenvectors;  // row-major d x d, column k pairs with eigenvalues[k]

  std::size_t dim() const { return eigenvalues.size(); }
  double vector_entry(std::size_t row, std::size_t k) const { return eigenvectors[row * dim() + k]; }
};

/// Polynomial with coefficients in ascending-degree order.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double x) const;
  std::size_t degree() const { return coefficients.empty() ? 0 : coefficients.size() - 1; }
  double max_abs_coefficient() const;
  /// Drops trailing coefficients with |p_k| <= rel_tol * max |p_j|.
  Polynomial trimmed(double rel_tol) const;
};

inline constexpr double kTrailingCoefficientTol = 1e-8;
inline constexpr int kJacobiMaxSweeps = 100;

/// Cyclic Jacobi eigendecomposition. Throws NumericalError when the sweep
/// cap is reached without convergence.
Spectrum symmetric_eig(const SymmetricMatrix& m);

/// Returns v^T M v.
double quadratic_form(const SymmetricMatrix& m, std::span<const double> v);

/// Solves V(nodes) p = values for the interpolating polynomial of degree
/// nodes.size() - 1.
Polynomial vandermonde_solve(std::span<const double> nodes, std::span<const double> values);

/// Real roots of p through companion-matrix eigenvalues. Coefficients below
/// tol relative are treated as absent (degree deficiency); imaginary parts up
/// to sqrt(tol) * max(1, |z|) are dropped, anything larger is an error.
std::vector<double> real_poly_roots(const Polynomial& p, double tol = kTrailingCoefficientTol);

}  // namespace sharplab
