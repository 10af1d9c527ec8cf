#include "sharplab/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

SymmetricMatrix::SymmetricMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, 0.0) {
  if (dim == 0) throw DomainError("SymmetricMatrix: dimension must be at least 1");
}

SymmetricMatrix::SymmetricMatrix(std::size_t dim, std::span<const double> row_major) : SymmetricMatrix(dim) {
  if (row_major.size() != dim * dim) {
    throw DomainError("SymmetricMatrix: expected " + std::to_string(dim * dim) + " entries, got " +
                      std::to_string(row_major.size()));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    entries_[i * dim + i] = row_major[i * dim + i];
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double v = 0.5 * (row_major[i * dim + j] + row_major[j * dim + i]);
      entries_[i * dim + j] = v;
      entries_[j * dim + i] = v;
    }
  }
}

SymmetricMatrix SymmetricMatrix::identity(std::size_t dim) {
  SymmetricMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.entries_[i * dim + i] = 1.0;
  return m;
}

SymmetricMatrix SymmetricMatrix::diagonal(std::span<const double> diag) {
  SymmetricMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.entries_[i * diag.size() + i] = diag[i];
  return m;
}

SymmetricMatrix SymmetricMatrix::from_eigen(std::span<const double> eigenvalues, std::span<const double> q) {
  const std::size_t d = eigenvalues.size();
  if (q.size() != d * d) throw DomainError("from_eigen: eigenvector block has wrong size");
  std::vector<double> full(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += q[i * d + k] * eigenvalues[k] * q[j * d + k];
      full[i * d + j] = acc;
    }
  }
  return SymmetricMatrix(d, full);
}

void SymmetricMatrix::set(std::size_t i, std::size_t j, double value) {
  entries_[i * dim_ + j] = value;
  entries_[j * dim_ + i] = value;
}

double SymmetricMatrix::max_abs() const {
  double m = 0.0;
  for (double v : entries_) m = std::max(m, std::abs(v));
  return m;
}

double SymmetricMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += entries_[i * dim_ + i];
  return t;
}

void SymmetricMatrix::multiply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != dim_ || out.size() != dim_) throw DomainError("SymmetricMatrix::multiply: dimension mismatch");
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) acc += entries_[i * dim_ + j] * v[j];
    out[i] = acc;
  }
}

Vector SymmetricMatrix::multiply(std::span<const double> v) const {
  Vector out(dim_);
  multiply(v, out);
  return out;
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (double c : coefficients) m = std::max(m, std::abs(c));
  return m;
}

Polynomial Polynomial::trimmed(double rel_tol) const {
  Polynomial out = *this;
  const double cutoff = rel_tol * max_abs_coefficient();
  while (out.coefficients.size() > 1 && std::abs(out.coefficients.back()) <= cutoff) out.coefficients.pop_back();
  return out;
}

Spectrum symmetric_eig(const SymmetricMatrix& m) {
  const std::size_t d = m.dim();
  std::vector<double> a(m.data().begin(), m.data().end());
  double fro2 = 0.0;
  for (double v : a) {
    if (!std::isfinite(v)) throw DomainError("symmetric_eig: matrix has non-finite entries");
    fro2 += v * v;
  }
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) s += a[p * d + q] * a[p * d + q];
    return s;
  };

  const double target = 1e-30 * fro2;
  bool converged = off_diagonal() <= target;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (apq == 0.0) continue;
        const double theta = 0.5 * (a[q * d + q] - a[p * d + p]) / apq;
        double t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a[p * d + p] -= t * apq;
        a[q * d + q] += t * apq;
        a[p * d + q] = 0.0;
        a[q * d + p] = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          if (j == p || j == q) continue;
          const double g = a[j * d + p];
          const double h = a[j * d + q];
          const double new_p = g - s * (h + g * tau);
          const double new_q = h + s * (g - h * tau);
          a[j * d + p] = a[p * d + j] = new_p;
          a[j * d + q] = a[q * d + j] = new_q;
        }
        for (std::size_t j = 0; j < d; ++j) {
          const double g = v[j * d + p];
          const double h = v[j * d + q];
          v[j * d + p] = g - s * (h + g * tau);
          v[j * d + q] = h + s * (g - h * tau);
        }
      }
    }
    converged = off_diagonal() <= target;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "symmetric_eig: Jacobi iteration did not converge after " << kJacobiMaxSweeps
        << " sweeps (matrix max-abs norm " << m.max_abs() << ")";
    throw NumericalError(msg.str());
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i * d + i] > a[j * d + j]; });
  Spectrum out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d * d);
  for (std::size_t k = 0; k < d; ++k) {
    out.eigenvalues[k] = a[order[k] * d + order[k]];
    for (std::size_t row = 0; row < d; ++row) out.eigenvectors[row * d + k] = v[row * d + order[k]];
  }
  return out;
}

double quadratic_form(const SymmetricMatrix& m, std::span<const double> v) {
  const std::size_t d = m.dim();
  if (v.size() != d) {
    throw DomainError("quadratic_form: vector has dimension " + std::to_string(v.size()) + ", matrix has " +
                      std::to_string(d));
  }
  const auto entries = m.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += entries[i * d + j] * v[j];
    acc += v[i] * row;
  }
  return acc;
}

Polynomial vandermonde_solve(std::span<const double> nodes, std::span<const double> values) {
  const std::size_t n = nodes.size();
  if (n == 0 || values.size() != n) throw DomainError("vandermonde_solve: need equally many nodes and values");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(nodes[i]) || !std::isfinite(values[i]))
      throw DomainError("vandermonde_solve: non-finite node or value");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (nodes[i] == nodes[j]) {
        std::ostringstream msg;
        msg << "vandermonde_solve: duplicate node " << nodes[i] << " at positions " << i << " and " << j;
        throw DomainError(msg.str());
      }
    }
  }
  // Solve in the scaled variable s = x / h so the columns are O(1).
  double h = 0.0;
  for (double x : nodes) h = std::max(h, std::abs(x));
  if (h == 0.0) h = 1.0;

  Eigen::MatrixXd v(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double power = 1.0;
    const double s = nodes[i] / h;
    for (std::size_t j = 0; j < n; ++j) {
      v(i, j) = power;
      power *= s;
    }
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(v);
  const Eigen::MatrixXd inverse = lu.inverse();
  const double condition = v.cwiseAbs().colwise().sum().maxCoeff() * inverse.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(condition) || condition > 1e13) {
    std::ostringstream msg;
    msg << "vandermonde_solve: condition number " << condition
        << " is too large; spread the nodes further apart within the admissible interval";
    throw NumericalError(msg.str());
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd scaled = lu.solve(rhs);

  Polynomial p;
  p.coefficients.resize(n);
  double scale = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    p.coefficients[j] = scaled(static_cast<Eigen::Index>(j)) / scale;
    scale *= h;
  }
  return p;
}

namespace {

double polish_root(const Polynomial& p, double r) {
  for (int iter = 0; iter < 3; ++iter) {
    double value = 0.0;
    double slope = 0.0;
    for (auto it = p.coefficients.rbegin(); it != p.coefficients.rend(); ++it) {
      slope = slope * r + value;
      value = value * r + *it;
    }
    if (slope == 0.0 || !std::isfinite(slope)) break;
    const double candidate = r - value / slope;
    if (!std::isfinite(candidate) || std::abs(p(candidate)) >= std::abs(value)) break;
    r = candidate;
  }
  return r;
}

}  // namespace

std::vector<double> real_poly_roots(const Polynomial& p, double tol) {
  if (p.coefficients.empty() || p.max_abs_coefficient() == 0.0)
    throw DomainError("real_poly_roots: polynomial is identically zero");
  const Polynomial q = p.trimmed(tol);
  const std::size_t k = q.degree();
  if (k == 0) return {};

  const double lead = q.coefficients[k];
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 1; i < k; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - 1)) = -q.coefficients[i] / lead;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) throw NumericalError("real_poly_roots: companion eigenvalue iteration failed");

  const double imag_tol = std::sqrt(tol);
  std::vector<double> roots;
  roots.reserve(k);
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const std::complex<double> z = solver.eigenvalues()(i);
    if (std::abs(z.imag()) > imag_tol * std::max(1.0, std::abs(z))) {
      std::ostringstream msg;
      msg << "real_poly_roots: complex root pair " << z.real() << " +/- " << std::abs(z.imag())
          << "i exceeds the tolerance; the polynomial is not real-rooted";
      throw NumericalError(msg.str());
    }
    roots.push_back(polish_root(q, z.real()));
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return roots;
}

}  // namespace sharplab
