#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "sharplab/dataset.hpp"
#include "sharplab/errors.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/mlp.hpp"

using namespace sharplab;

namespace {

const std::filesystem::path kData = SHARPLAB_TEST_DATA_DIR;

Dataset balanced_batch(std::size_t classes, std::size_t features, std::size_t per_class) {
  Dataset d;
  d.rows = classes * per_class;
  d.features = features;
  d.num_classes = classes;
  d.x.assign(d.rows * features, 0.0);
  for (std::size_t i = 0; i < d.rows; ++i) {
    d.labels.push_back(static_cast<std::int32_t>(i % classes));
    for (std::size_t f = 0; f < features; ++f) d.x[i * features + f] = std::sin(1.0 + i + 3.0 * f);
  }
  return d;
}

// Central differences on a random subset of coordinates.
double max_gradient_error(const LossFunction& loss, const Vector& x, std::size_t probes, std::uint64_t seed) {
  const Vector g = loss.gradient(x);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t i = pick(rng);
    Vector p = x, m = x;
    p[i] += 1e-5;
    m[i] -= 1e-5;
    const double fd = (loss.value(p) - loss.value(m)) / 2e-5;
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-3, std::abs(fd) + std::abs(g[i])));
  }
  return worst;
}

}  // namespace

TEST(MlpArchitecture, ParameterCountAndValidation) {
  MlpArchitecture a{{784, 128, 128, 128, 10}, Activation::Relu, LossHead::SoftmaxCrossEntropy};
  EXPECT_EQ(a.parameter_count(), 785u * 128 + 129u * 128 + 129u * 128 + 129u * 10);
  EXPECT_EQ(a.describe(), "784-128-128-128-10 relu softmax-cross-entropy");
  EXPECT_THROW((MlpArchitecture{{3}, Activation::Relu, LossHead::MeanSquaredError}.validate()), DomainError);
  EXPECT_THROW((MlpArchitecture{{3, 0, 2}, Activation::Relu, LossHead::MeanSquaredError}.validate()), DomainError);
  EXPECT_THROW((MlpArchitecture{{3, 1}, Activation::Relu, LossHead::SoftmaxCrossEntropy}.validate()), DomainError);
  EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
  EXPECT_EQ(parse_loss_head(to_string(LossHead::MeanSquaredError)), LossHead::MeanSquaredError);
  EXPECT_THROW(parse_activation("gelu"), DomainError);
}

TEST(Mlp, ZeroWeightsSoftmaxGivesLogTen) {
  Mlp model({{6, 8, 10}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset batch = balanced_batch(10, 6, 3);
  const Vector params(model.parameter_count(), 0.0);
  MlpBatchLoss loss(model, batch);
  EXPECT_NEAR(loss.value(params), std::log(10.0), 1e-12);
  EXPECT_NEAR(loss.value(params), 2.302585, 1e-6);
}

TEST(Mlp, MseZeroWeightsUsesBiasPathOnly) {
  Mlp model({{3, 4, 2}, Activation::Tanh, LossHead::MeanSquaredError});
  Vector params(model.parameter_count(), 0.0);
  // Layout: W1 (4x3), b1 (4), W2 (2x4), b2 (2).
  for (std::size_t i = 12; i < 16; ++i) params[i] = 0.7;
  params[24] = 0.3;
  params[25] = -0.4;
  const double features[] = {1.0, -2.0, 0.5};
  const std::int32_t labels[] = {0};
  const double targets[] = {0.0, 0.0};
  Vector grad(params.size());
  const double l = model.loss_and_grad(params, features, labels, grad, targets);
  EXPECT_NEAR(l, 0.5 * (0.09 + 0.16), 1e-15);
  EXPECT_NEAR(grad[24], 0.3, 1e-15);
  EXPECT_NEAR(grad[25], -0.4, 1e-15);
}

TEST(Mlp, GradientCheckTanhTwoSixteenTwo) {
  Mlp model({{2, 16, 2}, Activation::Tanh, LossHead::SoftmaxCrossEntropy});
  const Dataset data = synth_blobs({2, 10, 2, 0.5}, SeededStream(8));
  Vector params = model.initialize(SeededStream(9));
  std::mt19937_64 rng(10);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto& p : params) p += jitter(rng);  // nonzero biases too
  MlpBatchLoss loss(model, data);
  EXPECT_LE(max_gradient_error(loss, params, 10, 1), 1e-3);

  Mlp mse({{2, 16, 2}, Activation::Tanh, LossHead::MeanSquaredError});
  MlpBatchLoss mse_loss(mse, data);
  EXPECT_LE(max_gradient_error(mse_loss, params, 10, 2), 1e-3);
}

TEST(Mlp, GradientCheckDeepRelu) {
  Mlp model({{5, 12, 12, 12, 4}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = synth_blobs({4, 8, 5, 0.4}, SeededStream(11));
  const Vector params = model.initialize(SeededStream(12));
  MlpBatchLoss loss(model, data);
  EXPECT_LE(max_gradient_error(loss, params, 10, 3), 1e-3);
}

TEST(Mlp, HvpIsLinear) {
  Mlp model({{3, 10, 10, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = synth_blobs({3, 10, 3, 0.3}, SeededStream(13));
  const Vector x = model.initialize(SeededStream(14));
  MlpBatchLoss loss(model, data);
  const SeededStream probes(15);
  Vector z(x.size()), w(x.size());
  probes.fill_normal(0, 0, z);
  probes.fill_normal(0, 1, w);
  // Small step keeps every perturbed point on the same side of each ReLU kink.
  const double eps = 1e-6;
  const double a = 0.7, b = -1.3;
  Vector combo(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * z[i] + b * w[i];
  const Vector hz = hvp(loss, x, z, eps), hw = hvp(loss, x, w, eps), hc = hvp(loss, x, combo, eps);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lin = a * hz[i] + b * hw[i];
    num += (hc[i] - lin) * (hc[i] - lin);
    den += lin * lin;
  }
  EXPECT_LE(std::sqrt(num), 1e-4 * std::sqrt(den));
}

namespace {

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(Mlp, ExactHvpMatchesFiniteDifferencesOnSmoothNets) {
  for (LossHead head : {LossHead::SoftmaxCrossEntropy, LossHead::MeanSquaredError}) {
    const Mlp model({{3, 8, 6, 4}, Activation::Tanh, head});
    const Dataset data = balanced_batch(4, 3, 5);
    const MlpBatchLoss loss(model, data);
    const Vector x = model.initialize(SeededStream(11));
    const Vector z = random_vector(x.size(), 12);
    Vector exact(x.size());
    ASSERT_TRUE(loss.exact_hvp(x, z, exact));
    const Vector fd = hvp(loss, x, z, 1e-5);
    EXPECT_LT(max_abs_diff(exact, fd), 1e-6) << to_string(head);
  }
}

TEST(Mlp, ExactHvpMatchesFiniteDifferencesAwayFromReluKinks) {
  const Mlp model({{3, 10, 10, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = balanced_batch(3, 3, 4);
  const MlpBatchLoss loss(model, data);
  const Vector x = model.initialize(SeededStream(21));
  const Vector z = random_vector(x.size(), 22);
  Vector exact(x.size());
  ASSERT_TRUE(loss.exact_hvp(x, z, exact));
  // Tiny step: no activation changes sign, so differences see the a.e. Hessian.
  const Vector fd = hvp(loss, x, z, 1e-7);
  EXPECT_LT(max_abs_diff(exact, fd), 1e-5);
}

TEST(Mlp, ExactHvpIsSymmetric) {
  const Mlp model({{4, 7, 5, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = balanced_batch(3, 4, 6);
  const MlpBatchLoss loss(model, data);
  const Vector x = model.initialize(SeededStream(31));
  const Vector u = random_vector(x.size(), 32), v = random_vector(x.size(), 33);
  Vector hu(x.size()), hv(x.size());
  loss.exact_hvp(x, u, hu);
  loss.exact_hvp(x, v, hv);
  const double a = std::inner_product(u.begin(), u.end(), hv.begin(), 0.0);
  const double b = std::inner_product(v.begin(), v.end(), hu.begin(), 0.0);
  EXPECT_NEAR(a, b, 1e-10 * (1.0 + std::abs(a)));
}

TEST(Mlp, FrobeniusEstimateUsesExactHvp) {
  // Linear softmax model: the Hessian is smooth, so probes via exact products
  // and via differences agree closely on the same probe stream.
  const Mlp model({{3, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = balanced_batch(3, 3, 4);
  const MlpBatchLoss loss(model, data);
  const Vector x = model.initialize(SeededStream(41));
  const auto exact = frobenius_sq_estimate(loss, x, 50, SeededStream(42));
  double fd = 0.0;
  for (std::size_t k = 0; k < 50; ++k) {
    Vector z(x.size());
    SeededStream(42).fill_normal(0, k, z);
    const Vector hz = hvp(loss, x, z, 1e-5);
    for (double v : hz) fd += v * v / 50.0;
  }
  EXPECT_NEAR(exact.value, fd, 1e-6 * fd);
}

TEST(Mlp, InitializationBoundsAndDeterminism) {
  Mlp model({{20, 30, 5}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Vector a = model.initialize(SeededStream(3));
  EXPECT_EQ(a, model.initialize(SeededStream(3)));
  EXPECT_NE(a, model.initialize(SeededStream(4)));
  const double b1 = std::sqrt(6.0 / 50.0);
  for (std::size_t i = 0; i < 600; ++i) EXPECT_LE(std::abs(a[i]), b1);
  for (std::size_t i = 600; i < 630; ++i) EXPECT_EQ(a[i], 0.0);
}

TEST(Mlp, RejectsMismatchedInputs) {
  Mlp model({{3, 2}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Vector params(model.parameter_count(), 0.0);
  const double features[] = {1.0, 2.0, 3.0};
  const std::int32_t bad_label[] = {5};
  EXPECT_THROW(model.loss_and_grad(params, features, bad_label, {}), DomainError);
  const Vector short_params(3, 0.0);
  const std::int32_t label[] = {1};
  EXPECT_THROW(model.loss_and_grad(short_params, features, label, {}), DomainError);
}

TEST(Mlp, PredictAndAccuracy) {
  Mlp model({{2, 3}, Activation::Relu, LossHead::SoftmaxCrossEntropy});
  const Dataset data = synth_blobs({}, SeededStream(1));
  // Logit c = mean_c . x; with polygon means this is the nearest-mean rule.
  Vector params(model.parameter_count(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    const double angle = 2.0 * 3.141592653589793 * c / 3.0;
    params[c * 2] = std::cos(angle);
    params[c * 2 + 1] = std::sin(angle);
  }
  EXPECT_GT(model.accuracy(params, data), 0.95);
  EXPECT_EQ(model.predict(params, data).size(), data.rows);
}

TEST(LoadIdx, WellFormedFixture) {
  const Dataset d = load_idx(kData / "four-images.idx3", kData / "four-labels.idx1");
  EXPECT_EQ(d.rows, 4u);
  EXPECT_EQ(d.features, 784u);
  EXPECT_EQ(d.num_classes, 10u);
  EXPECT_EQ(d.labels, (std::vector<std::int32_t>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(d.x[1], 1.0 / 255.0);
  EXPECT_DOUBLE_EQ(d.x[784], 37.0 / 255.0);
  for (double v : d.x) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NO_THROW(d.validate());
}

TEST(LoadIdx, DistinctErrors) {
  EXPECT_THROW(load_idx(kData / "four-images.idx3", kData / "bad-magic-labels.idx1"), IdxMagicError);
  EXPECT_THROW(load_idx(kData / "four-images.idx3", kData / "three-labels.idx1"), IdxCountMismatchError);
  try {
    load_idx(kData / "truncated-images.idx3", kData / "four-labels.idx1");
    FAIL() << "expected truncation";
  } catch (const IdxTruncatedError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 3152 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 1684"), std::string::npos) << msg;
  }
  EXPECT_THROW(load_idx(kData / "missing.idx3", kData / "four-labels.idx1"), IoError);
}

TEST(LoadIdx, WriteRoundTrip) {
  const Dataset d = load_idx(kData / "four-images.idx3", kData / "four-labels.idx1");
  const auto dir = std::filesystem::temp_directory_path() / "sharplab-idx-roundtrip";
  std::filesystem::create_directories(dir);
  write_idx(d, 28, 28, dir / "img", dir / "lbl");
  const Dataset back = load_idx(dir / "img", dir / "lbl");
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.labels, d.labels);
  std::filesystem::remove_all(dir);
}

TEST(SynthBlobs, DefaultsAndDeterminism) {
  const Dataset a = synth_blobs({}, SeededStream(5));
  EXPECT_EQ(a.rows, 300u);
  EXPECT_EQ(a.features, 2u);
  EXPECT_EQ(a.num_classes, 3u);
  EXPECT_NO_THROW(a.validate());
  const Dataset b = synth_blobs({}, SeededStream(5));
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.x, synth_blobs({}, SeededStream(6)).x);
}

TEST(SynthBlobs, ZeroSpreadRepeatsCenters) {
  const Dataset d = synth_blobs({4, 5, 6, 0.0}, SeededStream(1));
  for (std::size_t r = 0; r < d.rows; ++r) {
    const auto row = d.row(r);
    for (std::size_t f = 0; f < 6; ++f) EXPECT_EQ(row[f], f == static_cast<std::size_t>(d.labels[r]) ? 1.0 : 0.0);
  }
  EXPECT_THROW(synth_blobs({0, 5, 2, 0.1}, SeededStream(1)), DomainError);
}

TEST(Dataset, SubsetAndValidation) {
  const Dataset d = synth_blobs({}, SeededStream(2));
  const std::size_t rows[] = {299, 0};
  const Dataset s = d.subset(rows, "probe");
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.split, "probe");
  EXPECT_EQ(s.labels[0], 2);
  EXPECT_EQ(s.row(1)[0], d.row(0)[0]);
  Dataset bad = d;
  bad.labels[3] = 7;
  EXPECT_THROW(bad.validate(), DomainError);
}
