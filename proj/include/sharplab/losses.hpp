#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>

#include "sharplab/linalg.hpp"
#include "sharplab/rng.hpp"

namespace sharplab {

/// Training loss L: R^d -> R_{>=0} with gradient and, where available, an
/// exact Hessian. Implementations are immutable and safe to share.
class LossFunction {
 public:
  virtual ~LossFunction() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;
  /// Default calls gradient() then value(); losses with a shared forward pass override it.
  virtual double value_and_gradient(std::span<const double> x, std::span<double> out) const;
  virtual std::optional<SymmetricMatrix> exact_hessian(std::span<const double> /*x*/) const { return std::nullopt; }
  /// False only for analysis fixtures that never enter training.
  virtual bool nonnegative() const { return true; }
  /// Writes H(x) z into out and returns true when the loss can form it
  /// without finite differences. Default: exact_hessian() if present.
  virtual bool exact_hvp(std::span<const double> x, std::span<const double> z, std::span<double> out) const;

  Vector gradient(std::span<const double> x) const;
};

/// L(x1, x2) = (x1^2 - x2^2) / 2, Hessian diag(1, -1) everywhere.
/// Not bounded below: an analysis-only fixture, exempt from the L >= 0
/// contract and rejected by the trainer.
class SaddleToy final : public LossFunction {
 public:
  using LossFunction::gradient;
  std::size_t dim() const override { return 2; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  std::optional<SymmetricMatrix> exact_hessian(std::span<const double> x) const override;
  bool nonnegative() const override { return false; }
};

/// L(x1, x2) = (x1 x2 - 1)^2, invariant under (k x1, x2 / k).
class ScaleInvToy final : public LossFunction {
 public:
  using LossFunction::gradient;
  std::size_t dim() const override { return 2; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  std::optional<SymmetricMatrix> exact_hessian(std::span<const double> x) const override;
};

/// L(x) = (||x||^2 - 1)^2, invariant under rotations.
class RotInvToy final : public LossFunction {
 public:
  using LossFunction::gradient;
  explicit RotInvToy(std::size_t dim);
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  std::optional<SymmetricMatrix> exact_hessian(std::span<const double> x) const override;

 private:
  std::size_t dim_;
};

/// L(x) = (x - c)^T H (x - c) / 2 with H positive semidefinite.
class QuadraticLoss final : public LossFunction {
 public:
  using LossFunction::gradient;
  explicit QuadraticLoss(SymmetricMatrix h, Vector center = {});
  std::size_t dim() const override { return h_.dim(); }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  std::optional<SymmetricMatrix> exact_hessian(std::span<const double> x) const override;

  const SymmetricMatrix& hessian() const { return h_; }

 private:
  SymmetricMatrix h_;
  Vector center_;
};

/// L(x) = c for all x.
class ConstantLoss final : public LossFunction {
 public:
  using LossFunction::gradient;
  ConstantLoss(std::size_t dim, double level) : dim_(dim), level_(level) {}
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double>) const override { return level_; }
  void gradient(std::span<const double>, std::span<double> out) const override;
  std::optional<SymmetricMatrix> exact_hessian(std::span<const double>) const override { return SymmetricMatrix(dim_); }

 private:
  std::size_t dim_;
  double level_;
};

/// Default finite-difference step 1e-4 * (1 + ||x||_inf).
double default_fd_step(std::span<const double> x);

/// (grad(x + eps z) - grad(x - eps z)) / (2 eps).
Vector hvp(const LossFunction& loss, std::span<const double> x, std::span<const double> z, double eps);

inline constexpr std::size_t kMaxFiniteDiffHessianDim = 512;

/// Column j = hvp(x, e_j), then symmetrized. Refuses d > 512.
SymmetricMatrix finite_diff_hessian(const LossFunction& loss, std::span<const double> x, double eps);
SymmetricMatrix finite_diff_hessian(const LossFunction& loss, std::span<const double> x);

/// Exact Hessian when the loss provides one, otherwise finite differences.
SymmetricMatrix hessian_at(const LossFunction& loss, std::span<const double> x);

struct StochasticEstimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// (1/k) sum z^T H z over standard-normal probes. H z comes from exact_hvp
/// when available, else central differences with step default_fd_step(x) / ||z||.
StochasticEstimate hutchinson_trace(const LossFunction& loss, std::span<const double> x, std::size_t probes,
                                    const SeededStream& stream);

/// (1/k) sum ||H z||^2 over standard-normal probes; estimates ||H||_F^2.
StochasticEstimate frobenius_sq_estimate(const LossFunction& loss, std::span<const double> x, std::size_t probes,
                                         const SeededStream& stream);

}  // namespace sharplab
