#pragma once

#include <cstddef>
#include <vector>

#include "sharplab/linalg.hpp"
#include "sharplab/rng.hpp"
#include "sharplab/sharpness.hpp"

namespace sharplab {

/// Integrals I_i = int exp(sigma_i v^T H v / 2) dN(0, I)(v) = prod_j (1 - sigma_i lambda_j)^{-1/2}
/// at the nodes sigma_i. stderrs is empty for exact probes.
struct MomentProbe {
  Vector nodes;
  Vector integrals;
  Vector stderrs;
};

enum class NodeLayout {
  /// +-eps/2 * i/k, the d nodes closest to zero; default.
  Symmetric,
  /// eps * i / (2d), i = 1..d.
  OneSided,
};

/// 1 / (max |lambda| + 1): a safe half-width for the convergence interval.
double node_interval_bound(double max_abs_eigenvalue);

/// d distinct nonzero nodes inside (-eps/2, eps/2).
Vector moment_nodes(std::size_t d, double eps, NodeLayout layout = NodeLayout::Symmetric);

/// Exact probe from the spectrum. Throws DomainError when some sigma * lambda >= 1.
MomentProbe probe_moments(const Spectrum& spectrum, const Vector& nodes);

/// Monte-Carlo probe with one shared Gaussian sample set across all nodes.
/// spectral_radius_bound is the caller's bound on max |lambda|; nodes with
/// |sigma| * bound >= 1 are refused.
MomentProbe probe_moments(const QuadraticOracle& oracle, std::size_t dim, const Vector& nodes,
                          double spectral_radius_bound, std::size_t n, const SeededStream& stream);

struct ReconstructOptions {
  /// Relative trailing-coefficient tolerance marking degree deficiency.
  double trailing_tol = kTrailingCoefficientTol;
  /// Coefficients within this factor above trailing_tol are ambiguous.
  double ambiguity_factor = 100.0;
  /// Root tolerance passed to the root finder; noisy (Monte-Carlo) probes
  /// need a looser value to accept nearly real root pairs.
  double root_tol = kTrailingCoefficientTol;
};

/// Eigenvalues, sorted descending, from p(sigma_i) = I_i^{-2} and p(0) = 1.
std::vector<double> reconstruct_eigenvalues(const MomentProbe& probe, const ReconstructOptions& options = {});

/// q_i = e_i^T H e_i and q_ij = (e_i + e_j)^T H (e_i + e_j), i < j.
struct HessianProbeSet {
  std::size_t dim = 0;
  Vector diagonal;
  Vector pairs;  // row-major over i < j

  std::size_t count() const { return diagonal.size() + pairs.size(); }
};

/// Evaluates the d(d+1)/2 Dirac quadratic forms.
HessianProbeSet probe_hessian(const QuadraticOracle& oracle, std::size_t dim);

/// H_ii = q_i, H_ij = (q_ij - q_i - q_j) / 2.
SymmetricMatrix reconstruct_hessian(const HessianProbeSet& probes);

/// Quadratic oracle for loss Hessians built only from finite-difference
/// gradient differences: v^T H v ~ v . hvp(x, v).
QuadraticOracle finite_difference_oracle(const LossFunction& loss, std::span<const double> x);

}  // namespace sharplab
