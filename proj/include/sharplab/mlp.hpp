#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/rng.hpp"

namespace sharplab {

enum class Activation { Relu, Tanh };
enum class LossHead { SoftmaxCrossEntropy, MeanSquaredError };

std::string to_string(Activation a);
std::string to_string(LossHead h);
Activation parse_activation(const std::string& name);
LossHead parse_loss_head(const std::string& name);

/// Fully connected network. Parameters are flattened layer by layer as
/// W (fan_out x fan_in, row-major) followed by b (fan_out).
struct MlpArchitecture {
  std::vector<std::size_t> layers;  // input, hidden..., output
  Activation activation = Activation::Relu;
  LossHead head = LossHead::SoftmaxCrossEntropy;

  void validate() const;
  std::size_t parameter_count() const;
  std::size_t inputs() const { return layers.front(); }
  std::size_t outputs() const { return layers.back(); }
  /// e.g. "784-128-128-128-10 relu softmax-cross-entropy".
  std::string describe() const;
};

class Mlp {
 public:
  explicit Mlp(MlpArchitecture arch);

  const MlpArchitecture& architecture() const { return arch_; }
  std::size_t parameter_count() const { return arch_.parameter_count(); }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Vector initialize(const SeededStream& stream) const;

  /// Mean loss over the batch. `features` is row-major (batch x inputs). The
  /// MSE head reports mean(||out - y||^2) / 2 with y taken from `targets`
  /// (row-major, batch x outputs) when given, one-hot labels otherwise.
  /// When grad is non-empty it receives the gradient.
  double loss_and_grad(std::span<const double> params, std::span<const double> features,
                       std::span<const std::int32_t> labels, std::span<double> grad,
                       std::span<const double> targets = {}) const;

  /// Exact Hessian-vector product of the mean batch loss along `direction`
  /// (forward-over-reverse R-operator). ReLU's second derivative is taken as
  /// zero, i.e. the almost-everywhere Hessian.
  void hessian_vector_product(std::span<const double> params, std::span<const double> features,
                              std::span<const std::int32_t> labels, std::span<const double> direction,
                              std::span<double> out, std::span<const double> targets = {}) const;
  /// Argmax predictions, evaluated in chunks.
  std::vector<std::int32_t> predict(std::span<const double> params, const Dataset& data) const;
  double accuracy(std::span<const double> params, const Dataset& data) const;

 private:
  MlpArchitecture arch_;
};

/// LossFunction view of an MLP on a fixed batch of rows.
class MlpBatchLoss final : public LossFunction {
 public:
  using LossFunction::gradient;
  MlpBatchLoss(const Mlp& model, const Dataset& data, std::span<const std::size_t> rows);
  /// Whole dataset as one batch.
  MlpBatchLoss(const Mlp& model, const Dataset& data);

  std::size_t dim() const override { return model_->parameter_count(); }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  double value_and_gradient(std::span<const double> x, std::span<double> out) const override;
  bool exact_hvp(std::span<const double> x, std::span<const double> z, std::span<double> out) const override;

  std::size_t batch_size() const { return labels_.size(); }

 private:
  const Mlp* model_;
  std::vector<double> features_;
  std::vector<std::int32_t> labels_;
  std::vector<double> targets_;
};

}  // namespace sharplab
