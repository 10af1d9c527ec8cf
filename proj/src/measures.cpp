#include "sharplab/measures.hpp"

#include <cmath>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

std::string to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::StandardGaussian: return "gaussian";
    case MeasureKind::UnitSphereUniform: return "sphere";
    case MeasureKind::HypercubeLebesgue: return "hypercube";
    case MeasureKind::DiracPoint: return "dirac";
    case MeasureKind::GradientDirectionDirac: return "gradient-direction";
  }
  return "unknown";
}

namespace {

void require_dim(std::size_t dim) {
  if (dim == 0) throw DomainError("measure dimension must be at least 1");
}

}  // namespace

MeasureSpec MeasureSpec::gaussian(std::size_t dim) {
  require_dim(dim);
  return MeasureSpec(MeasureKind::StandardGaussian, dim);
}

MeasureSpec MeasureSpec::sphere(std::size_t dim) {
  require_dim(dim);
  return MeasureSpec(MeasureKind::UnitSphereUniform, dim);
}

MeasureSpec MeasureSpec::hypercube(std::size_t dim, double half_width) {
  require_dim(dim);
  if (!(half_width > 0.0) || !std::isfinite(half_width))
    throw DomainError("hypercube half-width must be positive and finite");
  MeasureSpec m(MeasureKind::HypercubeLebesgue, dim);
  m.half_width_ = half_width;
  return m;
}

MeasureSpec MeasureSpec::dirac(Vector point) {
  require_dim(point.size());
  for (double v : point)
    if (!std::isfinite(v)) throw DomainError("Dirac point must be finite");
  MeasureSpec m(MeasureKind::DiracPoint, point.size());
  m.point_ = std::move(point);
  return m;
}

MeasureSpec MeasureSpec::gradient_direction(std::size_t dim) {
  require_dim(dim);
  return MeasureSpec(MeasureKind::GradientDirectionDirac, dim);
}

double MeasureSpec::total_mass() const {
  if (kind_ == MeasureKind::HypercubeLebesgue) return std::pow(2.0 * half_width_, static_cast<double>(dim_));
  return 1.0;
}

void draw(const MeasureSpec& mu, const SeededStream& stream, std::uint32_t component, std::uint64_t i,
          std::span<double> out, std::span<const double> context) {
  if (out.size() != mu.dim()) throw DomainError("draw: output buffer dimension mismatch");
  switch (mu.kind()) {
    case MeasureKind::StandardGaussian:
      stream.fill_normal(component, i, out);
      return;
    case MeasureKind::UnitSphereUniform: {
      double norm2 = 0.0;
      // A Gaussian draw of exactly zero has probability zero; redraw on the
      // next sample index just in case.
      for (std::uint64_t attempt = 0;; ++attempt) {
        stream.fill_normal(component, i + attempt * 0x100000000ull, out);
        norm2 = 0.0;
        for (double v : out) norm2 += v * v;
        if (norm2 > 0.0) break;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& v : out) v *= inv;
      return;
    }
    case MeasureKind::HypercubeLebesgue: {
      stream.fill_uniform(component, i, out);
      const double t = mu.half_width();
      for (double& v : out) v = t * (2.0 * v - 1.0);
      return;
    }
    case MeasureKind::DiracPoint:
      std::copy(mu.point().begin(), mu.point().end(), out.begin());
      return;
    case MeasureKind::GradientDirectionDirac: {
      if (context.size() != mu.dim())
        throw DomainError("gradient-direction measure requires a context gradient of matching dimension");
      double norm2 = 0.0;
      for (double v : context) norm2 += v * v;
      if (!(norm2 > 0.0)) throw DomainError("gradient-direction measure: context gradient has zero norm");
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = context[j] * inv;
      return;
    }
  }
}

WeightedSamples sample(const MeasureSpec& mu, const SeededStream& stream, std::size_t n,
                       std::span<const double> context, std::uint32_t component) {
  if (n == 0) throw DomainError("sample: n must be positive");
  if (!mu.needs_context() && !context.empty())
    throw DomainError("sample: a context vector is only accepted by the gradient-direction measure");
  WeightedSamples out;
  out.dim = mu.dim();
  out.points.resize(n * mu.dim());
  out.weights.assign(n, mu.weight(n));
  for (std::size_t i = 0; i < n; ++i)
    draw(mu, stream, component, i, std::span<double>(out.points.data() + i * mu.dim(), mu.dim()), context);
  return out;
}

bool is_scale_invariant(const MeasureSpec& mu) { return mu.kind() == MeasureKind::HypercubeLebesgue; }

}  // namespace sharplab
