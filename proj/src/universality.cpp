#include "sharplab/universality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

double node_interval_bound(double max_abs_eigenvalue) {
  if (!std::isfinite(max_abs_eigenvalue) || max_abs_eigenvalue < 0.0)
    throw DomainError("node_interval_bound: eigenvalue bound must be finite and nonnegative");
  return 1.0 / (max_abs_eigenvalue + 1.0);
}

Vector moment_nodes(std::size_t d, double eps, NodeLayout layout) {
  if (d == 0) throw DomainError("moment_nodes: need at least one node");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("moment_nodes: eps must be positive");
  Vector nodes;
  nodes.reserve(d);
  if (layout == NodeLayout::OneSided) {
    for (std::size_t i = 1; i <= d; ++i) nodes.push_back(eps * static_cast<double>(i) / (2.0 * static_cast<double>(d)));
    return nodes;
  }
  // Alternate +, - outward from zero so the first d nodes are the closest.
  const std::size_t k = (d + 1) / 2;
  for (std::size_t i = 1; nodes.size() < d; ++i) {
    const double s = 0.5 * eps * static_cast<double>(i) / static_cast<double>(k);
    nodes.push_back(s);
    if (nodes.size() < d) nodes.push_back(-s);
  }
  return nodes;
}

namespace {

void check_nodes(const Vector& nodes) {
  if (nodes.empty()) throw DomainError("moment probe: node list is empty");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] == 0.0 || !std::isfinite(nodes[i]))
      throw DomainError("moment probe: nodes must be finite and nonzero (p(0) = 1 is supplied separately)");
    for (std::size_t j = 0; j < i; ++j)
      if (nodes[i] == nodes[j]) throw DomainError("moment probe: duplicate node " + std::to_string(nodes[i]));
  }
}

}  // namespace

MomentProbe probe_moments(const Spectrum& spectrum, const Vector& nodes) {
  check_nodes(nodes);
  MomentProbe probe;
  probe.nodes = nodes;
  for (double sigma : nodes) {
    double log_p = 0.0;
    for (std::size_t j = 0; j < spectrum.eigenvalues.size(); ++j) {
      const double f = 1.0 - sigma * spectrum.eigenvalues[j];
      if (!(f > 0.0)) {
        std::ostringstream msg;
        msg << "moment probe: node sigma = " << sigma << " lies outside the convergence interval (sigma * lambda_" << j
            << " = " << sigma * spectrum.eigenvalues[j] << " >= 1)";
        throw DomainError(msg.str());
      }
      log_p += std::log(f);
    }
    probe.integrals.push_back(std::exp(-0.5 * log_p));
  }
  return probe;
}

MomentProbe probe_moments(const QuadraticOracle& oracle, std::size_t dim, const Vector& nodes,
                          double spectral_radius_bound, std::size_t n, const SeededStream& stream) {
  check_nodes(nodes);
  if (!(spectral_radius_bound >= 0.0)) throw DomainError("moment probe: spectral radius bound must be nonnegative");
  for (double sigma : nodes) {
    if (!(std::abs(sigma) * spectral_radius_bound < 1.0)) {
      std::ostringstream msg;
      msg << "moment probe: node sigma = " << sigma << " violates |sigma| < 1 / " << spectral_radius_bound;
      throw DomainError(msg.str());
    }
  }
  // One component per node, all fed by the same Gaussian draws.
  SharpnessSpec spec;
  spec.name = "moment-probe";
  spec.shared_samples = true;
  for (double sigma : nodes) {
    spec.psi.push_back({[sigma](double u) { return checked_exp(sigma * u); },
                        [sigma](double u) { return sigma * checked_exp(sigma * u); }});
    spec.measures.push_back(MeasureSpec::gaussian(dim));
  }
  spec.phi = {[](std::span<const double> t) { return t[0]; },
              [](std::span<const double> t, std::span<double> g) {
                std::fill(g.begin(), g.end(), 0.0);
                if (!t.empty()) g[0] = 1.0;
              }};
  const Estimate e = estimate_S(oracle, spec, stream, n);
  return {nodes, e.component_means, e.component_stderr};
}

std::vector<double> reconstruct_eigenvalues(const MomentProbe& probe, const ReconstructOptions& options) {
  check_nodes(probe.nodes);
  const std::size_t d = probe.nodes.size();
  if (probe.integrals.size() != d) throw DomainError("reconstruct_eigenvalues: one integral per node required");
  Vector nodes{0.0};
  Vector values{1.0};
  for (std::size_t i = 0; i < d; ++i) {
    const double integral = probe.integrals[i];
    if (!(integral > 0.0) || !std::isfinite(integral))
      throw DomainError("reconstruct_eigenvalues: integrals must be finite and positive");
    nodes.push_back(probe.nodes[i]);
    values.push_back(1.0 / (integral * integral));
  }
  const Polynomial p = vandermonde_solve(nodes, values);

  const double scale = p.max_abs_coefficient();
  const Polynomial trimmed = p.trimmed(options.trailing_tol);
  const std::size_t rank = trimmed.degree();
  // The last kept coefficient must sit clearly above the cut, otherwise the
  // number of zero eigenvalues is not determined by the data.
  if (rank > 0) {
    const double kept = std::abs(trimmed.coefficients[rank]);
    if (kept <= options.ambiguity_factor * options.trailing_tol * scale) {
      std::ostringstream msg;
      msg << "reconstruct_eigenvalues: degree deficiency is ambiguous; coefficient p_" << rank << " = " << kept
          << " is within a factor " << options.ambiguity_factor << " of the cut " << options.trailing_tol * scale
          << " (coefficients:";
      for (double c : p.coefficients) msg << ' ' << c;
      msg << ")";
      throw NumericalError(msg.str());
    }
  }

  std::vector<double> eigenvalues;
  if (rank > 0) {
    // x^r p(1/x) = prod (x - lambda_j): its roots are the nonzero eigenvalues.
    Polynomial reversed;
    reversed.coefficients.assign(trimmed.coefficients.rbegin(), trimmed.coefficients.rend());
    eigenvalues = real_poly_roots(reversed, options.root_tol);
  }
  eigenvalues.resize(d, 0.0);
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  return eigenvalues;
}

HessianProbeSet probe_hessian(const QuadraticOracle& oracle, std::size_t dim) {
  if (dim == 0) throw DomainError("probe_hessian: dimension must be positive");
  HessianProbeSet probes;
  probes.dim = dim;
  // q = int v^T H v d(delta_e) = 2 S(identity, identity, delta_e); the Dirac
  // draws are deterministic, so the stream is irrelevant.
  const SeededStream stream(0);
  auto dirac_probe = [&](Vector e) {
    return 2.0 * estimate_S(oracle, identity_spec(MeasureSpec::dirac(std::move(e))), stream, 2).value;
  };
  for (std::size_t i = 0; i < dim; ++i) {
    Vector e(dim, 0.0);
    e[i] = 1.0;
    probes.diagonal.push_back(dirac_probe(std::move(e)));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      Vector e(dim, 0.0);
      e[i] = e[j] = 1.0;
      probes.pairs.push_back(dirac_probe(std::move(e)));
    }
  }
  return probes;
}

SymmetricMatrix reconstruct_hessian(const HessianProbeSet& probes) {
  const std::size_t d = probes.dim;
  if (d == 0 || probes.diagonal.size() != d || probes.pairs.size() != d * (d - 1) / 2)
    throw DomainError("reconstruct_hessian: expected d(d+1)/2 probes for d = " + std::to_string(d));
  SymmetricMatrix h(d);
  for (std::size_t i = 0; i < d; ++i) h.set(i, i, probes.diagonal[i]);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      h.set(i, j, 0.5 * (probes.pairs[k++] - probes.diagonal[i] - probes.diagonal[j]));
  return h;
}

QuadraticOracle finite_difference_oracle(const LossFunction& loss, std::span<const double> x) {
  Vector point(x.begin(), x.end());
  const double eps = default_fd_step(point);
  return [&loss, point = std::move(point), eps](std::span<const double> v) {
    const Vector hv = hvp(loss, point, v, eps);
    return std::inner_product(v.begin(), v.end(), hv.begin(), 0.0);
  };
}

}  // namespace sharplab
