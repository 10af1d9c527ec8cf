#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharplab/linalg.hpp"
#include "sharplab/rng.hpp"

namespace sharplab {

enum class MeasureKind {
  StandardGaussian,
  UnitSphereUniform,
  HypercubeLebesgue,
  DiracPoint,
  // Point mass on grad L(x) / ||grad L(x)||, resolved from a context vector at
  // sample time. Recovers SAM's ascent direction.
  GradientDirectionDirac,
};

std::string to_string(MeasureKind kind);

/// A Borel measure on R^d that can be sampled with explicit quadrature
/// weights. Probability measures weight each of n samples by 1/n; the
/// hypercube truncation of Lebesgue measure weights by (2t)^d / n.
class MeasureSpec {
 public:
  static MeasureSpec gaussian(std::size_t dim);
  static MeasureSpec sphere(std::size_t dim);
  static MeasureSpec hypercube(std::size_t dim, double half_width);
  static MeasureSpec dirac(Vector point);
  static MeasureSpec gradient_direction(std::size_t dim);

  MeasureKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double half_width() const { return half_width_; }
  const Vector& point() const { return point_; }

  bool needs_context() const { return kind_ == MeasureKind::GradientDirectionDirac; }
  /// Total mass: 1 for probability measures, (2t)^d for the hypercube.
  double total_mass() const;
  double weight(std::size_t n) const { return total_mass() / static_cast<double>(n); }

  bool operator==(const MeasureSpec&) const = default;

 private:
  MeasureSpec(MeasureKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  MeasureKind kind_;
  std::size_t dim_;
  double half_width_ = 0.0;
  Vector point_;
};

struct WeightedSamples {
  std::size_t dim = 0;
  std::vector<double> points;  // row-major n x dim
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

/// Writes sample i of stream component `component` into out. `context` is
/// required (and only used) for GradientDirectionDirac.
void draw(const MeasureSpec& mu, const SeededStream& stream, std::uint32_t component, std::uint64_t i,
          std::span<double> out, std::span<const double> context = {});

WeightedSamples sample(const MeasureSpec& mu, const SeededStream& stream, std::size_t n,
                       std::span<const double> context = {}, std::uint32_t component = 0);

/// True exactly for measures of the form f(prod x_i) prod dx_i that are
/// sampled here, i.e. the hypercube-truncated Lebesgue measure.
bool is_scale_invariant(const MeasureSpec& mu);

}  // namespace sharplab
