#include "sharplab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

namespace {

void check_dim(std::span<const double> x, std::size_t d, const char* where) {
  if (x.size() != d) {
    std::ostringstream msg;
    msg << where << ": expected dimension " << d << ", got " << x.size();
    throw DomainError(msg.str());
  }
}

void check_finite(std::span<const double> g, const char* where) {
  for (double v : g)
    if (!std::isfinite(v)) throw NumericalError(std::string(where) + ": non-finite gradient");
}

StochasticEstimate mean_and_stderr(const std::vector<double>& samples) {
  const double k = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= k;
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  StochasticEstimate out;
  out.value = mean;
  out.stderr = samples.size() > 1 ? std::sqrt(var / (k - 1.0) / k) : 0.0;
  return out;
}

}  // namespace

double LossFunction::value_and_gradient(std::span<const double> x, std::span<double> out) const {
  gradient(x, out);
  return value(x);
}

Vector LossFunction::gradient(std::span<const double> x) const {
  Vector g(dim());
  gradient(x, g);
  return g;
}

double SaddleToy::value(std::span<const double> x) const {
  check_dim(x, 2, "SaddleToy");
  return 0.5 * (x[0] * x[0] - x[1] * x[1]);
}

void SaddleToy::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x, 2, "SaddleToy");
  out[0] = x[0];
  out[1] = -x[1];
}

std::optional<SymmetricMatrix> SaddleToy::exact_hessian(std::span<const double> x) const {
  check_dim(x, 2, "SaddleToy");
  const double diag[] = {1.0, -1.0};
  return SymmetricMatrix::diagonal(diag);
}

double ScaleInvToy::value(std::span<const double> x) const {
  check_dim(x, 2, "ScaleInvToy");
  const double r = x[0] * x[1] - 1.0;
  return r * r;
}

void ScaleInvToy::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x, 2, "ScaleInvToy");
  const double r = x[0] * x[1] - 1.0;
  out[0] = 2.0 * r * x[1];
  out[1] = 2.0 * r * x[0];
}

std::optional<SymmetricMatrix> ScaleInvToy::exact_hessian(std::span<const double> x) const {
  check_dim(x, 2, "ScaleInvToy");
  SymmetricMatrix h(2);
  h.set(0, 0, 2.0 * x[1] * x[1]);
  h.set(1, 1, 2.0 * x[0] * x[0]);
  h.set(0, 1, 4.0 * x[0] * x[1] - 2.0);
  return h;
}

RotInvToy::RotInvToy(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DomainError("RotInvToy: dimension must be positive");
}

double RotInvToy::value(std::span<const double> x) const {
  check_dim(x, dim_, "RotInvToy");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return (r2 - 1.0) * (r2 - 1.0);
}

void RotInvToy::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x, dim_, "RotInvToy");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  for (std::size_t i = 0; i < dim_; ++i) out[i] = 4.0 * (r2 - 1.0) * x[i];
}

std::optional<SymmetricMatrix> RotInvToy::exact_hessian(std::span<const double> x) const {
  check_dim(x, dim_, "RotInvToy");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  SymmetricMatrix h(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      double v = 8.0 * x[i] * x[j];
      if (i == j) v += 4.0 * (r2 - 1.0);
      h.set(i, j, v);
    }
  }
  return h;
}

QuadraticLoss::QuadraticLoss(SymmetricMatrix h, Vector center) : h_(std::move(h)), center_(std::move(center)) {
  if (center_.empty()) center_.assign(h_.dim(), 0.0);
  if (center_.size() != h_.dim()) throw DomainError("QuadraticLoss: center dimension mismatch");
  if (h_.dim() <= 64) {
    const Spectrum s = symmetric_eig(h_);
    if (s.eigenvalues.back() < -1e-12 * std::max(1.0, h_.max_abs())) {
      std::ostringstream msg;
      msg << "QuadraticLoss: Hessian must be positive semidefinite, smallest eigenvalue is " << s.eigenvalues.back();
      throw DomainError(msg.str());
    }
  }
}

double QuadraticLoss::value(std::span<const double> x) const {
  check_dim(x, dim(), "QuadraticLoss");
  Vector r(dim());
  for (std::size_t i = 0; i < dim(); ++i) r[i] = x[i] - center_[i];
  return 0.5 * quadratic_form(h_, r);
}

void QuadraticLoss::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x, dim(), "QuadraticLoss");
  Vector r(dim());
  for (std::size_t i = 0; i < dim(); ++i) r[i] = x[i] - center_[i];
  h_.multiply(r, out);
}

std::optional<SymmetricMatrix> QuadraticLoss::exact_hessian(std::span<const double> x) const {
  check_dim(x, dim(), "QuadraticLoss");
  return h_;
}

void ConstantLoss::gradient(std::span<const double>, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

double default_fd_step(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return 1e-4 * (1.0 + m);
}

bool LossFunction::exact_hvp(std::span<const double> x, std::span<const double> z, std::span<double> out) const {
  const auto h = exact_hessian(x);
  if (!h) return false;
  check_dim(z, dim(), "exact_hvp");
  check_dim(out, dim(), "exact_hvp");
  h->multiply(z, out);
  return true;
}

Vector hvp(const LossFunction& loss, std::span<const double> x, std::span<const double> z, double eps) {
  if (!(eps > 0.0)) throw DomainError("hvp: step must be positive");
  check_dim(x, loss.dim(), "hvp");
  check_dim(z, loss.dim(), "hvp");
  const std::size_t d = loss.dim();
  Vector plus(d), minus(d), g_plus(d), g_minus(d);
  for (std::size_t i = 0; i < d; ++i) {
    plus[i] = x[i] + eps * z[i];
    minus[i] = x[i] - eps * z[i];
  }
  loss.gradient(plus, g_plus);
  loss.gradient(minus, g_minus);
  check_finite(g_plus, "hvp");
  check_finite(g_minus, "hvp");
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = (g_plus[i] - g_minus[i]) / (2.0 * eps);
  return out;
}

SymmetricMatrix finite_diff_hessian(const LossFunction& loss, std::span<const double> x, double eps) {
  const std::size_t d = loss.dim();
  if (d > kMaxFiniteDiffHessianDim) {
    throw DomainError("finite_diff_hessian: dimension " + std::to_string(d) + " exceeds the cost guard of " +
                      std::to_string(kMaxFiniteDiffHessianDim));
  }
  std::vector<double> columns(d * d);
  Vector e(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    e[j] = 1.0;
    const Vector col = hvp(loss, x, e, eps);
    e[j] = 0.0;
    for (std::size_t i = 0; i < d; ++i) columns[i * d + j] = col[i];
  }
  return SymmetricMatrix(d, columns);
}

SymmetricMatrix finite_diff_hessian(const LossFunction& loss, std::span<const double> x) {
  return finite_diff_hessian(loss, x, default_fd_step(x));
}

SymmetricMatrix hessian_at(const LossFunction& loss, std::span<const double> x) {
  if (auto h = loss.exact_hessian(x)) return *std::move(h);
  return finite_diff_hessian(loss, x);
}

namespace {

template <typename Reduce>
StochasticEstimate probe_estimate(const LossFunction& loss, std::span<const double> x, std::size_t probes,
                                  const SeededStream& stream, Reduce reduce) {
  if (probes == 0) throw DomainError("stochastic Hessian estimate: need at least one probe");
  check_dim(x, loss.dim(), "stochastic Hessian estimate");
  const std::size_t d = loss.dim();
  const double base_step = default_fd_step(x);
  std::vector<double> samples(probes);
  Vector z(d), hz(d);
  for (std::size_t k = 0; k < probes; ++k) {
    stream.fill_normal(0, k, z);
    double norm2 = 0.0;
    for (double v : z) norm2 += v * v;
    if (norm2 == 0.0) {
      samples[k] = 0.0;
      continue;
    }
    if (!loss.exact_hvp(x, z, hz)) hz = hvp(loss, x, z, base_step / std::sqrt(norm2));
    samples[k] = reduce(z, hz);
  }
  return mean_and_stderr(samples);
}

}  // namespace

StochasticEstimate hutchinson_trace(const LossFunction& loss, std::span<const double> x, std::size_t probes,
                                    const SeededStream& stream) {
  return probe_estimate(loss, x, probes, stream, [](const Vector& z, const Vector& hz) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += z[i] * hz[i];
    return acc;
  });
}

StochasticEstimate frobenius_sq_estimate(const LossFunction& loss, std::span<const double> x, std::size_t probes,
                                         const SeededStream& stream) {
  return probe_estimate(loss, x, probes, stream, [](const Vector&, const Vector& hz) {
    double acc = 0.0;
    for (double v : hz) acc += v * v;
    return acc;
  });
}

}  // namespace sharplab
