#include "sharplab/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

bool SharpnessSpec::needs_context() const {
  return std::any_of(measures.begin(), measures.end(), [](const MeasureSpec& m) { return m.needs_context(); });
}

void SharpnessSpec::validate() const {
  if (psi.empty()) throw DomainError("sharpness spec '" + name + "' has no components");
  if (measures.size() != psi.size())
    throw DomainError("sharpness spec '" + name + "': number of measures differs from number of psi components");
  if (!phi.value || !phi.gradient) throw DomainError("sharpness spec '" + name + "': phi is not set");
  for (const auto& p : psi)
    if (!p.value || !p.derivative) throw DomainError("sharpness spec '" + name + "': psi component is not set");
  for (const auto& m : measures)
    if (m.dim() != dim()) throw DomainError("sharpness spec '" + name + "': measures disagree in dimension");
  if (shared_samples) {
    for (const auto& m : measures)
      if (!(m == measures.front()))
        throw DomainError("sharpness spec '" + name + "': shared samples require identical measures");
  }
}

SpecPreset SpecPreset::determinant(double t) {
  if (!(t > 0.0)) throw DomainError("determinant preset: half-width t must be positive");
  SpecPreset p{PresetKind::Determinant};
  p.half_width = t;
  return p;
}

SpecPreset SpecPreset::moment(unsigned degree, MomentMeasure measure) {
  SpecPreset p{PresetKind::Moment};
  p.degree = degree;
  p.moment_measure = measure;
  return p;
}

SpecPreset SpecPreset::charpoly(double sigma) {
  SpecPreset p{PresetKind::Charpoly};
  p.sigma = sigma;
  return p;
}

std::string preset_name(PresetKind kind) {
  switch (kind) {
    case PresetKind::Trace: return "trace";
    case PresetKind::Frobenius: return "frobenius";
    case PresetKind::Determinant: return "determinant";
    case PresetKind::Moment: return "moment";
    case PresetKind::Charpoly: return "charpoly";
  }
  return "unknown";
}

PresetKind parse_preset_name(const std::string& name) {
  for (PresetKind k : {PresetKind::Trace, PresetKind::Frobenius, PresetKind::Determinant, PresetKind::Moment,
                       PresetKind::Charpoly})
    if (preset_name(k) == name) return k;
  throw DomainError("unknown sharpness preset '" + name + "'");
}

double checked_exp(double u) {
  if (!(std::abs(u) <= kExpArgumentLimit)) {
    std::ostringstream msg;
    msg << "exp argument " << u << " exceeds the overflow guard |u| <= " << kExpArgumentLimit;
    throw NumericalError(msg.str());
  }
  return std::exp(u);
}

namespace {

ScalarFunction identity_fn() {
  return {[](double u) { return u; }, [](double) { return 1.0; }};
}

OuterFunction identity_outer() {
  return {[](std::span<const double> t) { return t[0]; }, [](std::span<const double>, std::span<double> g) { g[0] = 1.0; }};
}

void require_phi_argument(double u, const char* preset) {
  if (!(std::abs(u) >= 1e-30) || !std::isfinite(u)) {
    std::ostringstream msg;
    msg << preset << " preset: phi argument " << u << " is outside the guarded range [1e-30, inf)";
    throw NumericalError(msg.str());
  }
}

}  // namespace

SharpnessSpec identity_spec(const MeasureSpec& mu) {
  SharpnessSpec s;
  s.name = "identity";
  s.phi = identity_outer();
  s.psi = {identity_fn()};
  s.measures = {mu};
  return s;
}

SharpnessSpec make_spec(const SpecPreset& preset, std::size_t dim) {
  SharpnessSpec s;
  s.name = preset_name(preset.kind);
  const double d = static_cast<double>(dim);
  switch (preset.kind) {
    case PresetKind::Trace:
      s.phi = identity_outer();
      s.psi = {identity_fn()};
      s.measures = {MeasureSpec::sphere(dim)};
      break;
    case PresetKind::Frobenius:
      s.phi = {[](std::span<const double> t) { return 2.0 * (t[1] - t[0] * t[0]); },
               [](std::span<const double> t, std::span<double> g) {
                 g[0] = -4.0 * t[0];
                 g[1] = 2.0;
               }};
      s.psi = {identity_fn(), {[](double u) { return u * u; }, [](double u) { return 2.0 * u; }}};
      s.measures = {MeasureSpec::gaussian(dim), MeasureSpec::gaussian(dim)};
      s.shared_samples = true;
      break;
    case PresetKind::Determinant: {
      const double log_scale = d * std::log(2.0 * std::numbers::pi);
      s.phi = {[log_scale](std::span<const double> t) {
                 require_phi_argument(t[0], "determinant");
                 return std::exp(log_scale - 2.0 * std::log(std::abs(t[0])));
               },
               [log_scale](std::span<const double> t, std::span<double> g) {
                 require_phi_argument(t[0], "determinant");
                 const double mag = std::exp(log_scale - 3.0 * std::log(std::abs(t[0])));
                 g[0] = -2.0 * (t[0] > 0.0 ? mag : -mag);
               }};
      s.psi = {{[](double u) { return checked_exp(-u); }, [](double u) { return -checked_exp(-u); }}};
      s.measures = {MeasureSpec::hypercube(dim, preset.half_width)};
      break;
    }
    case PresetKind::Moment: {
      const unsigned n = preset.degree;
      s.phi = identity_outer();
      s.psi = {{[n](double u) { return std::pow(u, static_cast<double>(n)); },
                [n](double u) { return n == 0 ? 0.0 : n * std::pow(u, static_cast<double>(n) - 1.0); }}};
      s.measures = {preset.moment_measure == MomentMeasure::Sphere ? MeasureSpec::sphere(dim)
                                                                   : MeasureSpec::gaussian(dim)};
      break;
    }
    case PresetKind::Charpoly: {
      const double sigma = preset.sigma;
      s.phi = {[](std::span<const double> t) {
                 require_phi_argument(t[0], "charpoly");
                 return 1.0 / (t[0] * t[0]);
               },
               [](std::span<const double> t, std::span<double> g) {
                 require_phi_argument(t[0], "charpoly");
                 g[0] = -2.0 / (t[0] * t[0] * t[0]);
               }};
      s.psi = {{[sigma](double u) { return checked_exp(sigma * u); },
                [sigma](double u) { return sigma * checked_exp(sigma * u); }}};
      s.measures = {MeasureSpec::gaussian(dim)};
      break;
    }
  }
  return s;
}

namespace {

/// E[(sum_i lambda_i z_i^2 / 2)^n] for z ~ N(0, I), from the cumulants
/// kappa_k = (k - 1)! / 2 * sum lambda^k.
double gaussian_quadratic_moment(std::span<const double> lambda, unsigned n) {
  std::vector<double> kappa(n + 1, 0.0);
  double factorial = 1.0;  // (k - 1)!
  for (unsigned k = 1; k <= n; ++k) {
    if (k > 1) factorial *= static_cast<double>(k - 1);
    double power_sum = 0.0;
    for (double l : lambda) power_sum += std::pow(l, static_cast<double>(k));
    kappa[k] = 0.5 * factorial * power_sum;
  }
  std::vector<double> m(n + 1, 0.0);
  m[0] = 1.0;
  for (unsigned j = 1; j <= n; ++j) {
    double acc = 0.0;
    double binom = 1.0;  // C(j - 1, k - 1)
    for (unsigned k = 1; k <= j; ++k) {
      if (k > 1) binom = binom * static_cast<double>(j - k + 1) / static_cast<double>(k - 1);
      acc += binom * kappa[k] * m[j - k];
    }
    m[j] = acc;
  }
  return m[n];
}

}  // namespace

double measure_exact(const Spectrum& spectrum, const SpecPreset& preset) {
  const auto& lambda = spectrum.eigenvalues;
  const double d = static_cast<double>(lambda.size());
  double scale = 0.0;
  for (double l : lambda) scale = std::max(scale, std::abs(l));
  switch (preset.kind) {
    case PresetKind::Trace: {
      double s = 0.0;
      for (double l : lambda) s += l;
      return s / (2.0 * d);
    }
    case PresetKind::Frobenius: {
      double s = 0.0;
      for (double l : lambda) s += l * l;
      return s;
    }
    case PresetKind::Determinant: {
      double p = 1.0;
      for (std::size_t i = 0; i < lambda.size(); ++i) {
        if (lambda[i] < -1e-12 * scale) {
          std::ostringstream msg;
          msg << "determinant oracle: eigenvalue lambda_" << i << " = " << lambda[i]
              << " is negative; the Gaussian-integral representation requires a positive semidefinite Hessian";
          throw DomainError(msg.str());
        }
        p *= std::max(lambda[i], 0.0);
      }
      return p;
    }
    case PresetKind::Charpoly: {
      double p = 1.0;
      for (std::size_t i = 0; i < lambda.size(); ++i) {
        const double f = 1.0 - preset.sigma * lambda[i];
        if (!(f > 0.0)) {
          std::ostringstream msg;
          msg << "charpoly oracle: sigma * lambda_" << i << " = " << preset.sigma * lambda[i]
              << " must be below 1 (lambda_" << i << " = " << lambda[i] << ")";
          throw DomainError(msg.str());
        }
        p *= f;
      }
      return p;
    }
    case PresetKind::Moment: {
      const double g = gaussian_quadratic_moment(lambda, preset.degree);
      if (preset.moment_measure == MomentMeasure::Gaussian) return g;
      double radial = 1.0;  // E[||z||^{2n}] = d (d + 2) ... (d + 2n - 2)
      for (unsigned j = 0; j < preset.degree; ++j) radial *= d + 2.0 * j;
      return g / radial;
    }
  }
  return 0.0;
}

double pseudo_determinant(const Spectrum& spectrum, double rank_tol) {
  double scale = 0.0;
  for (double l : spectrum.eigenvalues) scale = std::max(scale, std::abs(l));
  double p = 1.0;
  bool any = false;
  for (double l : spectrum.eigenvalues) {
    if (std::abs(l) > rank_tol * scale) {
      p *= l;
      any = true;
    }
  }
  return any ? p : 0.0;
}

QuadraticOracle quadratic_oracle(SymmetricMatrix h) {
  return [h = std::move(h)](std::span<const double> v) { return quadratic_form(h, v); };
}

QuadraticOracle quadratic_oracle(const LossFunction& loss, std::span<const double> x) {
  return quadratic_oracle(hessian_at(loss, x));
}

namespace {

constexpr std::size_t kReductionBlock = 4096;

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Sums of m channels and their pairwise products, reduced block-wise and
/// then pairwise over blocks so the result depends only on sample order.
class MomentAccumulator {
 public:
  MomentAccumulator(std::size_t m, bool cross) : m_(m), cross_(cross), shift_(m, 0.0) {
    channels_ = m + (cross ? m * (m + 1) / 2 : m);
    current_.assign(channels_, 0.0);
  }

  void add(std::span<const double> psi) {
    if (count_ == 0) std::copy(psi.begin(), psi.end(), shift_.begin());
    std::size_t c = 0;
    for (std::size_t l = 0; l < m_; ++l) current_[c++] += psi[l] - shift_[l];
    for (std::size_t l = 0; l < m_; ++l) {
      const double a = psi[l] - shift_[l];
      if (cross_) {
        for (std::size_t k = l; k < m_; ++k) current_[c++] += a * (psi[k] - shift_[k]);
      } else {
        current_[c++] += a * a;
      }
    }
    if (++count_ % kReductionBlock == 0) flush();
  }

  struct Result {
    std::vector<double> mean;
    std::vector<double> cov;  // m x m, sample covariance (n - 1 denominator)
  };

  Result finish() {
    flush();
    const std::size_t blocks = blocks_.size() / channels_;
    std::vector<double> totals(channels_);
    std::vector<double> column(blocks);
    for (std::size_t ch = 0; ch < channels_; ++ch) {
      for (std::size_t b = 0; b < blocks; ++b) column[b] = blocks_[b * channels_ + ch];
      totals[ch] = pairwise_sum(column);
    }
    const double n = static_cast<double>(count_);
    Result r;
    r.mean.resize(m_);
    r.cov.assign(m_ * m_, 0.0);
    std::vector<double> centered_mean(m_);
    for (std::size_t l = 0; l < m_; ++l) {
      centered_mean[l] = totals[l] / n;
      r.mean[l] = shift_[l] + centered_mean[l];
    }
    std::size_t c = m_;
    for (std::size_t l = 0; l < m_; ++l) {
      if (cross_) {
        for (std::size_t k = l; k < m_; ++k) {
          const double cov = count_ > 1 ? (totals[c++] - n * centered_mean[l] * centered_mean[k]) / (n - 1.0) : 0.0;
          r.cov[l * m_ + k] = r.cov[k * m_ + l] = cov;
        }
      } else {
        r.cov[l * m_ + l] = count_ > 1 ? (totals[c++] - n * centered_mean[l] * centered_mean[l]) / (n - 1.0) : 0.0;
      }
    }
    for (std::size_t l = 0; l < m_; ++l) r.cov[l * m_ + l] = std::max(r.cov[l * m_ + l], 0.0);
    return r;
  }

 private:
  void flush() {
    if (count_ == flushed_) return;
    blocks_.insert(blocks_.end(), current_.begin(), current_.end());
    std::fill(current_.begin(), current_.end(), 0.0);
    flushed_ = count_;
  }

  std::size_t m_;
  bool cross_;
  std::size_t channels_ = 0;
  std::vector<double> shift_;
  std::vector<double> current_;
  std::vector<double> blocks_;
  std::size_t count_ = 0;
  std::size_t flushed_ = 0;
};

std::string describe_point(std::span<const double> v) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < v.size() && i < 8; ++i) out << (i ? ", " : "") << v[i];
  if (v.size() > 8) out << ", ...";
  out << ")";
  return out.str();
}

/// Shared engine for estimate_S and estimate_R: `argument(v)` is the value
/// fed to psi for the sample v.
template <typename Argument>
Estimate estimate_core(Argument&& argument, const SharpnessSpec& spec, const SeededStream& stream, std::size_t n,
                       const EstimatorOptions& options) {
  spec.validate();
  if (n < 2) throw DomainError("sharpness estimator: n must be at least 2 for a standard error");
  const std::size_t m = spec.components();
  const std::size_t d = spec.dim();
  if (spec.needs_context() && options.context.size() != d)
    throw DomainError("sharpness estimator: gradient-direction measure needs a context gradient");

  std::vector<double> psi_values(m);
  std::vector<double> v(d);
  auto evaluate = [&](std::size_t l, std::uint32_t component, std::uint64_t i) {
    draw(spec.measures[l], stream, component, i, v, options.context);
    if (options.sample_map) options.sample_map(v);
    return argument(std::span<const double>(v));
  };
  auto check = [&](double value, double arg, std::size_t l, std::uint64_t i) {
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "sharpness estimator: psi_" << l << "(" << arg << ") is not finite at sample " << i << " v = "
          << describe_point(v);
      throw NumericalError(msg.str());
    }
  };

  Estimate out;
  std::vector<double> cov(m * m, 0.0);
  if (spec.shared_samples || m == 1) {
    MomentAccumulator acc(m, true);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double arg = evaluate(0, 0, i);
      for (std::size_t l = 0; l < m; ++l) {
        psi_values[l] = spec.psi[l].value(arg);
        check(psi_values[l], arg, l, i);
      }
      acc.add(psi_values);
    }
    auto r = acc.finish();
    out.component_means = std::move(r.mean);
    cov = std::move(r.cov);
  } else {
    out.component_means.resize(m);
    for (std::size_t l = 0; l < m; ++l) {
      MomentAccumulator acc(1, true);
      for (std::uint64_t i = 0; i < n; ++i) {
        const double arg = evaluate(l, static_cast<std::uint32_t>(l), i);
        double value = spec.psi[l].value(arg);
        check(value, arg, l, i);
        acc.add(std::span<const double>(&value, 1));
      }
      auto r = acc.finish();
      out.component_means[l] = r.mean[0];
      cov[l * m + l] = r.cov[0];
    }
  }

  // Integral estimates: total mass times the sample mean of psi.
  std::vector<double> masses(m);
  for (std::size_t l = 0; l < m; ++l) {
    masses[l] = spec.measures[l].total_mass();
    out.component_means[l] *= masses[l];
  }
  out.component_stderr.resize(m);
  const double nn = static_cast<double>(n);
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t k = 0; k < m; ++k) cov[l * m + k] *= masses[l] * masses[k] / nn;
  for (std::size_t l = 0; l < m; ++l) out.component_stderr[l] = std::sqrt(cov[l * m + l]);

  out.value = spec.phi.value(out.component_means);
  std::vector<double> grad(m);
  spec.phi.gradient(out.component_means, grad);
  double var = 0.0;
  for (std::size_t l = 0; l < m; ++l)
    for (std::size_t k = 0; k < m; ++k) var += grad[l] * cov[l * m + k] * grad[k];
  out.stderr = std::sqrt(std::max(var, 0.0));
  if (!std::isfinite(out.value)) throw NumericalError("sharpness estimator: phi produced a non-finite value");
  return out;
}

}  // namespace

Estimate estimate_S(const QuadraticOracle& oracle, const SharpnessSpec& spec, const SeededStream& stream,
                    std::size_t n, const EstimatorOptions& options) {
  return estimate_core([&](std::span<const double> v) { return 0.5 * oracle(v); }, spec, stream, n, options);
}

namespace {

void require_rho(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("perturbation radius rho must be positive");
}

}  // namespace

Estimate estimate_R(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec, double rho,
                    const SeededStream& stream, std::size_t n) {
  require_rho(rho);
  spec.validate();
  if (x.size() != loss.dim() || spec.dim() != loss.dim())
    throw DomainError("estimate_R: loss, point and spec dimensions must agree");
  const double base = loss.value(x);
  if (!std::isfinite(base)) throw NumericalError("estimate_R: loss is not finite at the base point");
  Vector context;
  EstimatorOptions options;
  if (spec.needs_context()) {
    context = loss.gradient(x);
    options.context = context;
  }
  const double inv_rho2 = 1.0 / (rho * rho);
  Vector shifted(x.size());
  return estimate_core(
      [&](std::span<const double> v) {
        for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] = x[j] + rho * v[j];
        const double value = loss.value(shifted);
        if (!std::isfinite(value))
          throw NumericalError("estimate_R: loss is not finite at perturbed point " + describe_point(shifted));
        return (value - base) * inv_rho2;
      },
      spec, stream, n, options);
}

Vector regularizer_gradient(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec,
                            double rho, const SeededStream& stream, std::size_t n) {
  require_rho(rho);
  spec.validate();
  if (n == 0) throw DomainError("regularizer_gradient: n must be positive");
  const std::size_t d = loss.dim();
  if (x.size() != d || spec.dim() != d) throw DomainError("regularizer_gradient: loss, point and spec dimensions must agree");
  const std::size_t m = spec.components();

  Vector base_grad(d);
  const double base = loss.value_and_gradient(x, base_grad);
  if (!std::isfinite(base)) throw NumericalError("regularizer_gradient: loss is not finite at the base point");
  const std::span<const double> context =
      spec.needs_context() ? std::span<const double>(base_grad) : std::span<const double>();

  const double inv_rho2 = 1.0 / (rho * rho);
  std::vector<double> means(m, 0.0);
  std::vector<Vector> weighted(m, Vector(d, 0.0));
  Vector v(d), shifted(d), grad(d);

  auto perturb = [&](std::size_t l, std::uint32_t component, std::uint64_t i) {
    draw(spec.measures[l], stream, component, i, v, context);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + rho * v[j];
    const double value = loss.value_and_gradient(shifted, grad);
    if (!std::isfinite(value))
      throw NumericalError("regularizer_gradient: loss is not finite at perturbed point " + describe_point(shifted));
    return (value - base) * inv_rho2;
  };
  auto accumulate = [&](std::size_t l, double y, double w) {
    const double psi = spec.psi[l].value(y);
    const double dpsi = spec.psi[l].derivative(y);
    if (!std::isfinite(psi) || !std::isfinite(dpsi)) {
      std::ostringstream msg;
      msg << "regularizer_gradient: psi_" << l << " is not finite at argument " << y;
      throw NumericalError(msg.str());
    }
    means[l] += w * psi;
    const double scale = w * dpsi;
    Vector& acc = weighted[l];
    for (std::size_t j = 0; j < d; ++j) acc[j] += scale * (grad[j] - base_grad[j]);
  };

  if (spec.shared_samples) {
    const double w = spec.measures.front().weight(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double y = perturb(0, 0, i);
      for (std::size_t l = 0; l < m; ++l) accumulate(l, y, w);
    }
  } else {
    for (std::size_t l = 0; l < m; ++l) {
      const double w = spec.measures[l].weight(n);
      for (std::uint64_t i = 0; i < n; ++i) accumulate(l, perturb(l, static_cast<std::uint32_t>(l), i), w);
    }
  }

  std::vector<double> dphi(m);
  spec.phi.gradient(means, dphi);
  Vector out(d, 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    if (!std::isfinite(dphi[l])) throw NumericalError("regularizer_gradient: phi gradient is not finite");
    for (std::size_t j = 0; j < d; ++j) out[j] += dphi[l] * weighted[l][j];
  }
  return out;
}

}  // namespace sharplab
