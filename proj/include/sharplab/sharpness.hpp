#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sharplab/linalg.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/measures.hpp"

namespace sharplab {

/// Scalar psi with its derivative.
struct ScalarFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

/// Outer phi: R^m -> R with its gradient.
struct OuterFunction {
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
};

/// S(x) = phi( int psi_1(v^T H v / 2) d mu_1, ..., int psi_m(v^T H v / 2) d mu_m ).
///
/// With shared_samples set, every component integrates against the draws
/// of component 0 (all mu_l must then be equal), which is how the
/// Frobenius preset reuses one Gaussian stream for both of its moments.
struct SharpnessSpec {
  std::string name = "custom";
  OuterFunction phi;
  std::vector<ScalarFunction> psi;
  std::vector<MeasureSpec> measures;
  bool shared_samples = false;

  std::size_t components() const { return psi.size(); }
  std::size_t dim() const { return measures.empty() ? 0 : measures.front().dim(); }
  bool needs_context() const;
  /// Throws DomainError when the component lists disagree in size or dimension.
  void validate() const;
};

enum class PresetKind { Trace, Frobenius, Determinant, Moment, Charpoly };
enum class MomentMeasure { Sphere, Gaussian };

struct SpecPreset {
  PresetKind kind = PresetKind::Trace;
  double half_width = 1.0;                           // determinant: hypercube t
  unsigned degree = 2;                               // moment: psi(u) = u^degree
  MomentMeasure moment_measure = MomentMeasure::Gaussian;
  double sigma = 0.0;                                // charpoly

  static SpecPreset trace() { return {PresetKind::Trace}; }
  static SpecPreset frobenius() { return {PresetKind::Frobenius}; }
  static SpecPreset determinant(double t);
  static SpecPreset moment(unsigned degree, MomentMeasure measure);
  static SpecPreset charpoly(double sigma);
};

/// Exact preset names: trace, frobenius, determinant, moment, charpoly.
std::string preset_name(PresetKind kind);
PresetKind parse_preset_name(const std::string& name);

/// Builds the (phi, psi, mu) triplet for a preset in dimension d.
SharpnessSpec make_spec(const SpecPreset& preset, std::size_t dim);

/// phi = psi = identity with a single measure; the m = 1 form that SAM and
/// Trace-SAM specialize.
SharpnessSpec identity_spec(const MeasureSpec& mu);

/// Guarded exponential used by the exp-type psi: |u| > 700 is a hard error.
double checked_exp(double u);
inline constexpr double kExpArgumentLimit = 700.0;

/// Closed-form value of the preset's sharpness measure from the spectrum.
/// determinant -> prod lambda (positivity required), charpoly -> prod(1 -
/// sigma lambda) (sigma lambda < 1 required), moment -> E[(v^T H v / 2)^n].
double measure_exact(const Spectrum& spectrum, const SpecPreset& preset);

/// Product of eigenvalues with |lambda| > rank_tol * max |lambda|.
double pseudo_determinant(const Spectrum& spectrum, double rank_tol = 1e-10);

struct Estimate {
  double value = 0.0;
  /// Delta-method standard error of value.
  double stderr = 0.0;
  std::vector<double> component_means;
  std::vector<double> component_stderr;
};

/// v |-> v^T H v at a fixed point.
using QuadraticOracle = std::function<double(std::span<const double>)>;
QuadraticOracle quadratic_oracle(SymmetricMatrix h);
/// Uses the exact Hessian when available, finite differences otherwise.
QuadraticOracle quadratic_oracle(const LossFunction& loss, std::span<const double> x);

/// In-place map applied to every drawn sample before it is used. The
/// coupled invariance checks push samples through D^{-1} or A^{-1}.
using SampleMap = std::function<void(std::span<double>)>;

struct EstimatorOptions {
  SampleMap sample_map;
  std::span<const double> context;  // for gradient-direction measures
};

/// Monte-Carlo estimate of S(x; phi, psi, mu); n >= 2.
Estimate estimate_S(const QuadraticOracle& oracle, const SharpnessSpec& spec, const SeededStream& stream,
                    std::size_t n, const EstimatorOptions& options = {});

/// Zeroth-order regularizer R_rho(x) = phi(int psi((L(x + rho v) - L(x)) / rho^2) d mu).
Estimate estimate_R(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec, double rho,
                    const SeededStream& stream, std::size_t n);

/// rho^2 grad R~_rho(x): the sharpness term of the generic update,
/// sum_l d_l phi(mean psi_l(Y)) * mean psi'_l(Y) (grad L(x + rho v) - grad L(x)).
Vector regularizer_gradient(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec,
                            double rho, const SeededStream& stream, std::size_t n);

}  // namespace sharplab
