#include <gtest/gtest.h>

#include <cmath>

#include "sharplab/errors.hpp"
#include "sharplab/measures.hpp"
#include "sharplab/rng.hpp"

using namespace sharplab;

TEST(Philox, KnownAnswerVectors) {
  // Reference vectors from the Random123 distribution (kat_vectors).
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero[0], 0x6627e8d5u);
  EXPECT_EQ(zero[1], 0xe169c58du);
  EXPECT_EQ(zero[2], 0xbc57ac4cu);
  EXPECT_EQ(zero[3], 0x9b00dbd8u);

  const auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(ones[0], 0x408f276du);
  EXPECT_EQ(ones[1], 0x41c83b0eu);
  EXPECT_EQ(ones[2], 0xa20bc7c6u);
  EXPECT_EQ(ones[3], 0x6d5451fdu);

  const auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(pi[0], 0xd16cfe09u);
  EXPECT_EQ(pi[1], 0x94fdccebu);
  EXPECT_EQ(pi[2], 0x5001e420u);
  EXPECT_EQ(pi[3], 0x24126ea1u);
}

TEST(SeededStream, AddressableAndDistinct) {
  const SeededStream s(42);
  EXPECT_EQ(s.normal(0, 7, 3), SeededStream(42).normal(0, 7, 3));
  EXPECT_NE(s.normal(0, 7, 3), s.normal(1, 7, 3));
  EXPECT_NE(s.normal(0, 7, 3), s.at_iteration(1).normal(0, 7, 3));
  EXPECT_NE(s.normal(0, 7, 3), s.with_domain("other").normal(0, 7, 3));
  EXPECT_NE(s.normal(0, 7, 3), SeededStream(43).normal(0, 7, 3));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const double u = s.uniform(0, i, 0);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Measures, DiracSamples) {
  const auto w = sample(MeasureSpec::dirac({1.0, 0.0}), SeededStream(1), 3);
  ASSERT_EQ(w.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(w.point(i)[0], 1.0);
    EXPECT_EQ(w.point(i)[1], 0.0);
    EXPECT_EQ(w.weights[i], 1.0 / 3.0);
  }
}

TEST(Measures, HypercubeWeightsAndSupport) {
  const auto w = sample(MeasureSpec::hypercube(2, 1.0), SeededStream(2), 100);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w.weights[i], 4.0 / 100.0);
    total += w.weights[i];
    for (double v : w.point(i)) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NEAR(total, 4.0, 1e-14);

  const auto w3 = sample(MeasureSpec::hypercube(3, 2.5), SeededStream(3), 7);
  double total3 = 0.0;
  for (double x : w3.weights) total3 += x;
  EXPECT_NEAR(total3, std::pow(5.0, 3), 1e-12);
}

TEST(Measures, SphereNormalization) {
  const auto w = sample(MeasureSpec::sphere(5), SeededStream(4), 1000);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double n2 = 0.0;
    for (double v : w.point(i)) n2 += v * v;
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-12);
  }
}

TEST(Measures, GradientDirectionContract) {
  const double g[] = {3.0, 4.0};
  const auto w = sample(MeasureSpec::gradient_direction(2), SeededStream(5), 2, g);
  EXPECT_DOUBLE_EQ(w.point(1)[0], 0.6);
  EXPECT_DOUBLE_EQ(w.point(1)[1], 0.8);
  const double zero[] = {0.0, 0.0};
  EXPECT_THROW(sample(MeasureSpec::gradient_direction(2), SeededStream(5), 2, zero), DomainError);
  EXPECT_THROW(sample(MeasureSpec::gradient_direction(2), SeededStream(5), 2), DomainError);
  EXPECT_THROW(sample(MeasureSpec::gaussian(2), SeededStream(5), 2, g), DomainError);
}

TEST(Measures, SpecInvariants) {
  EXPECT_THROW(MeasureSpec::hypercube(2, 0.0), DomainError);
  EXPECT_THROW(MeasureSpec::hypercube(2, -1.0), DomainError);
  EXPECT_THROW(MeasureSpec::dirac({1.0, INFINITY}), DomainError);
  EXPECT_THROW(sample(MeasureSpec::gaussian(2), SeededStream(0), 0), DomainError);
}

TEST(Measures, ScaleInvariance) {
  EXPECT_TRUE(is_scale_invariant(MeasureSpec::hypercube(2, 1.0)));
  EXPECT_FALSE(is_scale_invariant(MeasureSpec::gaussian(2)));
  EXPECT_FALSE(is_scale_invariant(MeasureSpec::sphere(2)));
  EXPECT_FALSE(is_scale_invariant(MeasureSpec::dirac({1.0, 0.0})));
}

TEST(Measures, Determinism) {
  for (const auto& mu : {MeasureSpec::gaussian(3), MeasureSpec::sphere(3), MeasureSpec::hypercube(3, 2.0)}) {
    const auto a = sample(mu, SeededStream(77, 1, 2), 500);
    const auto b = sample(mu, SeededStream(77, 1, 2), 500);
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.weights, b.weights);
  }
}

TEST(Measures, GaussianMoments) {
  const std::size_t n = 1'000'000, d = 4;
  const auto w = sample(MeasureSpec::gaussian(d), SeededStream(123), n);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = w.point(i)[j];
      mean += v;
      sq += v * v;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(double(n)));
    EXPECT_LT(std::abs(var - 1.0), 0.01);
  }
}

TEST(Measures, SphereSecondMoments) {
  const std::size_t n = 1'000'000, d = 3;
  const auto w = sample(MeasureSpec::sphere(d), SeededStream(321), n);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = w.point(i)[a] * w.point(i)[b];
        m += p;
        m2 += p * p;
      }
      m /= n;
      const double se = std::sqrt((m2 / n - m * m) / n);
      EXPECT_LT(std::abs(m - (a == b ? 1.0 / d : 0.0)), 5.0 * se) << a << "," << b;
    }
  }
}
