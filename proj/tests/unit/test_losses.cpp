#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "sharplab/errors.hpp"
#include "sharplab/linalg.hpp"
#include "sharplab/losses.hpp"

using namespace sharplab;

namespace {

QuadraticLoss quad23() {
  const double d[] = {2.0, 3.0};
  return QuadraticLoss(SymmetricMatrix::diagonal(d));
}

void expect_matrix_near(const SymmetricMatrix& a, std::initializer_list<double> row_major, double tol) {
  const Vector b(row_major);
  const std::size_t d = a.dim();
  ASSERT_EQ(b.size(), d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(a(i, j), b[i * d + j], tol) << i << "," << j;
}

}  // namespace

TEST(Hvp, Examples) {
  const auto q = quad23();
  const Vector x{0.0, 0.0}, z{1.0, 0.0};
  const Vector hz = hvp(q, x, z, 1e-4);
  EXPECT_NEAR(hz[0], 2.0, 1e-8);
  EXPECT_NEAR(hz[1], 0.0, 1e-8);

  ScaleInvToy s;
  const Vector zero{0.0, 0.0};
  for (double v : hvp(s, Vector{0.3, -1.2}, zero, 1e-4)) EXPECT_EQ(v, 0.0);

  const Vector one{1.0, 1.0};
  const Vector h11 = hvp(s, one, one, 1e-4);
  EXPECT_NEAR(h11[0], 4.0, 1e-6);
  EXPECT_NEAR(h11[1], 4.0, 1e-6);

  EXPECT_THROW(hvp(s, one, one, 0.0), DomainError);
}

TEST(FiniteDiffHessian, Examples) {
  SaddleToy saddle;
  for (const Vector& x : {Vector{0.0, 0.0}, Vector{3.0, -2.0}, Vector{-50.0, 7.0}})
    expect_matrix_near(finite_diff_hessian(saddle, x), {1.0, 0.0, 0.0, -1.0}, 1e-7);

  ScaleInvToy s;
  expect_matrix_near(finite_diff_hessian(s, Vector{2.0, 0.5}), {0.5, 2.0, 2.0, 8.0}, 1e-5);

  const double a[] = {2.0, 1.0, 1.0, 3.0};
  QuadraticLoss q(SymmetricMatrix(2, a), Vector{0.5, -1.0});
  expect_matrix_near(finite_diff_hessian(q, Vector{10.0, 4.0}), {2.0, 1.0, 1.0, 3.0}, 1e-8);
}

TEST(FiniteDiffHessian, CostGuard) {
  ConstantLoss big(kMaxFiniteDiffHessianDim + 1, 1.0);
  const Vector x(big.dim(), 0.0);
  EXPECT_THROW(finite_diff_hessian(big, x), DomainError);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double a[] = {2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0};
  std::vector<std::unique_ptr<LossFunction>> losses;
  losses.push_back(std::make_unique<SaddleToy>());
  losses.push_back(std::make_unique<ScaleInvToy>());
  losses.push_back(std::make_unique<RotInvToy>(4));
  losses.push_back(std::make_unique<QuadraticLoss>(SymmetricMatrix(3, a), Vector{1.0, 0.0, -1.0}));
  for (const auto& loss : losses) {
    for (int trial = 0; trial < 50; ++trial) {
      Vector x(loss->dim());
      for (auto& v : x) v = u(rng);
      const Vector g = loss->gradient(x);
      double scale = 1.0;
      for (double v : x) scale = std::max(scale, std::abs(v));
      const double h = 1e-5 * scale;
      for (std::size_t i = 0; i < x.size(); ++i) {
        Vector p = x, m = x;
        p[i] += h;
        m[i] -= h;
        const double fd = (loss->value(p) - loss->value(m)) / (2.0 * h);
        EXPECT_LE(std::abs(fd - g[i]), 1e-4 * std::max(1.0, std::abs(g[i])));
      }
      if (loss->nonnegative()) EXPECT_GE(loss->value(x), 0.0);
    }
  }
}

TEST(Losses, ExactHessiansAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  ScaleInvToy s;
  RotInvToy r(3);
  SaddleToy saddle;
  for (const LossFunction* loss : {static_cast<const LossFunction*>(&s), static_cast<const LossFunction*>(&r),
                                   static_cast<const LossFunction*>(&saddle)}) {
    for (int trial = 0; trial < 50; ++trial) {
      Vector x(loss->dim());
      for (auto& v : x) v = u(rng);
      const SymmetricMatrix exact = *loss->exact_hessian(x);
      const SymmetricMatrix fd = finite_diff_hessian(*loss, x);
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
          EXPECT_NEAR(exact(i, j), fd(i, j), 1e-5 * std::max(1.0, exact.max_abs()));
    }
  }
}

TEST(QuadraticLoss, RejectsIndefiniteHessian) {
  const double d[] = {1.0, -1.0};
  EXPECT_THROW(QuadraticLoss(SymmetricMatrix::diagonal(d)), DomainError);
  EXPECT_THROW(QuadraticLoss(SymmetricMatrix::identity(2), Vector{1.0}), DomainError);
}

TEST(HutchinsonTrace, Examples) {
  SaddleToy saddle;
  const auto a = hutchinson_trace(saddle, Vector{0.5, 0.5}, 10'000, SeededStream(1));
  EXPECT_LT(std::abs(a.value), 4.0 * a.stderr);

  const auto b = hutchinson_trace(quad23(), Vector{0.0, 0.0}, 10'000, SeededStream(2));
  EXPECT_LT(std::abs(b.value - 5.0), 4.0 * b.stderr);

  ScaleInvToy s;
  const auto c = hutchinson_trace(s, Vector{1.0, 1.0}, 10'000, SeededStream(3));
  EXPECT_LT(std::abs(c.value - 4.0), 4.0 * c.stderr);

  EXPECT_THROW(hutchinson_trace(s, Vector{1.0, 1.0}, 0, SeededStream(3)), DomainError);
}

TEST(FrobeniusSqEstimate, Examples) {
  SaddleToy saddle;
  const auto a = frobenius_sq_estimate(saddle, Vector{0.0, 0.0}, 10'000, SeededStream(4));
  EXPECT_LT(std::abs(a.value - 2.0), 4.0 * a.stderr);

  const auto b = frobenius_sq_estimate(quad23(), Vector{1.0, 1.0}, 10'000, SeededStream(5));
  EXPECT_LT(std::abs(b.value - 13.0), 4.0 * b.stderr);

  QuadraticLoss zero(SymmetricMatrix(3));
  const auto c = frobenius_sq_estimate(zero, Vector{1.0, 2.0, 3.0}, 100, SeededStream(6));
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(c.stderr, 0.0);
}

TEST(ScaleInvToy, LossIsScaleInvariant) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  ScaleInvToy s;
  for (int trial = 0; trial < 100; ++trial) {
    const double x1 = u(rng), x2 = u(rng);
    const double base = s.value(Vector{x1, x2});
    for (double k : {0.5, 2.0, 10.0}) {
      const double moved = s.value(Vector{k * x1, x2 / k});
      EXPECT_LE(std::abs(moved - base), 1e-10 * std::max(1.0, std::abs(base)));
    }
  }
}

TEST(ScaleInvToy, DeterminantInvariantTraceNot) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  ScaleInvToy s;
  auto det = [&](double a, double b) {
    const auto h = *s.exact_hessian(Vector{a, b});
    return h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const double x1 = u(rng), x2 = u(rng);
    for (double k : {0.5, 2.0, 10.0}) EXPECT_NEAR(det(k * x1, x2 / k), det(x1, x2), 1e-8 * std::max(1.0, std::abs(det(x1, x2))));
  }
  const auto h = *s.exact_hessian(Vector{1.0, 1.0});
  const auto hk = *s.exact_hessian(Vector{2.0, 0.5});
  EXPECT_GT(std::abs(hk.trace() - h.trace()), 0.0);
  EXPECT_DOUBLE_EQ(hk.trace(), 2.0 * (4.0 + 0.25));
}

TEST(RotInvToy, LossIsRotationInvariant) {
  RotInvToy r(2);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0), angle(0.0, 6.283185307179586);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng), b = u(rng), t = angle(rng);
    const double c = std::cos(t), s = std::sin(t);
    EXPECT_NEAR(r.value(Vector{c * a - s * b, s * a + c * b}), r.value(Vector{a, b}), 1e-10 * (1.0 + r.value(Vector{a, b})));
  }
}

TEST(Losses, DimensionMismatchIsRejected) {
  ScaleInvToy s;
  EXPECT_THROW(s.value(Vector{1.0}), DomainError);
  EXPECT_THROW(hvp(s, Vector{1.0, 1.0}, Vector{1.0}, 1e-4), DomainError);
}
