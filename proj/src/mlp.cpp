#include "sharplab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "sharplab/errors.hpp"

namespace sharplab {

namespace {

using Matrix = Eigen::MatrixXd;  // column-major; columns are examples
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

std::string to_string(LossHead h) {
  return h == LossHead::SoftmaxCrossEntropy ? "softmax-cross-entropy" : "mean-squared-error";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw DomainError("unknown activation '" + name + "' (expected relu or tanh)");
}

LossHead parse_loss_head(const std::string& name) {
  if (name == "softmax-cross-entropy") return LossHead::SoftmaxCrossEntropy;
  if (name == "mean-squared-error") return LossHead::MeanSquaredError;
  throw DomainError("unknown loss head '" + name + "' (expected softmax-cross-entropy or mean-squared-error)");
}

void MlpArchitecture::validate() const {
  if (layers.size() < 2) throw DomainError("MLP needs at least an input and an output layer");
  for (std::size_t s : layers)
    if (s == 0) throw DomainError("MLP layer sizes must be positive");
  if (head == LossHead::SoftmaxCrossEntropy && outputs() < 2)
    throw DomainError("softmax head needs at least two outputs");
}

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l < layers.size(); ++l) n += (layers[l - 1] + 1) * layers[l];
  return n;
}

std::string MlpArchitecture::describe() const {
  std::ostringstream out;
  for (std::size_t l = 0; l < layers.size(); ++l) out << (l ? "-" : "") << layers[l];
  out << ' ' << to_string(activation) << ' ' << to_string(head);
  return out.str();
}

Mlp::Mlp(MlpArchitecture arch) : arch_(std::move(arch)) { arch_.validate(); }

Vector Mlp::initialize(const SeededStream& stream) const {
  Vector params(parameter_count(), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 1; l < arch_.layers.size(); ++l) {
    const std::size_t fan_in = arch_.layers[l - 1];
    const std::size_t fan_out = arch_.layers[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k)
      params[offset + k] = bound * (2.0 * stream.uniform(static_cast<std::uint32_t>(l), 0, k) - 1.0);
    offset += (fan_in + 1) * fan_out;
  }
  return params;
}

namespace {

struct Forward {
  std::vector<Matrix> pre;   // z_l
  std::vector<Matrix> post;  // a_l, post[0] = input
};

void activate(Activation a, const Matrix& z, Matrix& out) {
  if (a == Activation::Relu)
    out = z.cwiseMax(0.0);
  else
    out = z.array().tanh().matrix();
}

Forward forward(const MlpArchitecture& arch, std::span<const double> params, const Eigen::Map<const Matrix>& input) {
  const std::size_t layers = arch.layers.size() - 1;
  Forward f;
  f.pre.resize(layers);
  f.post.resize(layers + 1);
  f.post[0] = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(arch.layers[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch.layers[l + 1]);
    // Owned (aligned) copies: Eigen's vectorized kernels round differently
    // depending on buffer alignment, which would make runs address dependent.
    const RowMajor w = Eigen::Map<const RowMajor>(params.data() + offset, fan_out, fan_in);
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(params.data() + offset + fan_out * fan_in, fan_out);
    offset += static_cast<std::size_t>((fan_in + 1) * fan_out);
    f.pre[l].noalias() = w * f.post[l];
    f.pre[l].colwise() += b;
    if (l + 1 < layers)
      activate(arch.activation, f.pre[l], f.post[l + 1]);
    else
      f.post[l + 1] = f.pre[l];
  }
  return f;
}

}  // namespace

double Mlp::loss_and_grad(std::span<const double> params, std::span<const double> features,
                          std::span<const std::int32_t> labels, std::span<double> grad,
                          std::span<const double> targets) const {
  const std::size_t batch = labels.size();
  if (batch == 0) throw DomainError("MLP loss: empty batch");
  if (params.size() != parameter_count()) {
    std::ostringstream msg;
    msg << "MLP loss: expected " << parameter_count() << " parameters, got " << params.size();
    throw DomainError(msg.str());
  }
  if (features.size() != batch * arch_.inputs()) throw DomainError("MLP loss: feature buffer does not match batch");
  if (!grad.empty() && grad.size() != params.size()) throw DomainError("MLP loss: gradient buffer size mismatch");
  const auto outputs = static_cast<Eigen::Index>(arch_.outputs());
  for (auto y : labels)
    if (y < 0 || y >= outputs) throw DomainError("MLP loss: label out of range");
  const bool regress = arch_.head == LossHead::MeanSquaredError && !targets.empty();
  if (regress && targets.size() != batch * arch_.outputs()) throw DomainError("MLP loss: target buffer does not match batch");

  Eigen::Map<const Matrix> input(features.data(), static_cast<Eigen::Index>(arch_.inputs()),
                                 static_cast<Eigen::Index>(batch));
  Forward f = forward(arch_, params, input);
  const Matrix& out = f.post.back();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  double loss = 0.0;
  Matrix delta(outputs, static_cast<Eigen::Index>(batch));
  if (arch_.head == LossHead::SoftmaxCrossEntropy) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const double m = out.col(j).maxCoeff();
      const auto shifted = (out.col(j).array() - m).eval();
      const double log_sum = std::log(shifted.exp().sum());
      loss += log_sum - shifted(labels[static_cast<std::size_t>(j)]);
      delta.col(j) = (shifted - log_sum).exp().matrix();
      delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    }
  } else {
    delta = out;
    if (regress)
      delta -= Eigen::Map<const Matrix>(targets.data(), outputs, static_cast<Eigen::Index>(batch));
    else
      for (Eigen::Index j = 0; j < out.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    loss = 0.5 * delta.squaredNorm();
  }
  loss *= inv_batch;
  if (!std::isfinite(loss)) throw NumericalError("MLP loss: non-finite value (activations overflowed)");
  if (grad.empty()) return loss;

  delta *= inv_batch;
  const std::size_t layers = arch_.layers.size() - 1;
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, o = 0; l < layers; ++l) {
    offsets[l] = o;
    o += (arch_.layers[l] + 1) * arch_.layers[l + 1];
  }
  for (std::size_t l = layers; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(arch_.layers[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch_.layers[l + 1]);
    Eigen::Map<RowMajor> gw(grad.data() + offsets[l], fan_out, fan_in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[l] + fan_out * fan_in, fan_out);
    const RowMajor gw_owned = delta * f.post[l].transpose();
    gw = gw_owned;
    const Eigen::VectorXd gb_owned = delta.rowwise().sum();
    gb = gb_owned;
    if (l == 0) break;
    const RowMajor w = Eigen::Map<const RowMajor>(params.data() + offsets[l], fan_out, fan_in);
    Matrix back = w.transpose() * delta;
    if (arch_.activation == Activation::Relu)
      back.array() *= (f.pre[l - 1].array() > 0.0).cast<double>();
    else
      back.array() *= 1.0 - f.post[l].array().square();
    delta = std::move(back);
  }
  return loss;
}

void Mlp::hessian_vector_product(std::span<const double> params, std::span<const double> features,
                                 std::span<const std::int32_t> labels, std::span<const double> direction,
                                 std::span<double> out, std::span<const double> targets) const {
  const std::size_t batch = labels.size();
  if (batch == 0) throw DomainError("MLP hvp: empty batch");
  const std::size_t p = parameter_count();
  if (params.size() != p || direction.size() != p || out.size() != p)
    throw DomainError("MLP hvp: parameter, direction and output sizes must equal " + std::to_string(p));
  if (features.size() != batch * arch_.inputs()) throw DomainError("MLP hvp: feature buffer does not match batch");
  const auto outputs = static_cast<Eigen::Index>(arch_.outputs());
  for (auto y : labels)
    if (y < 0 || y >= outputs) throw DomainError("MLP hvp: label out of range");
  const bool regress = arch_.head == LossHead::MeanSquaredError && !targets.empty();
  if (regress && targets.size() != batch * arch_.outputs()) throw DomainError("MLP hvp: target buffer does not match batch");

  const std::size_t layers = arch_.layers.size() - 1;
  const bool relu = arch_.activation == Activation::Relu;
  std::vector<RowMajor> w(layers), dw(layers);
  std::vector<Eigen::VectorXd> db(layers);
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, o = 0; l < layers; ++l) {
    const auto fan_in = static_cast<Eigen::Index>(arch_.layers[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch_.layers[l + 1]);
    offsets[l] = o;
    w[l] = Eigen::Map<const RowMajor>(params.data() + o, fan_out, fan_in);
    dw[l] = Eigen::Map<const RowMajor>(direction.data() + o, fan_out, fan_in);
    db[l] = Eigen::Map<const Eigen::VectorXd>(direction.data() + o + fan_out * fan_in, fan_out);
    o += static_cast<std::size_t>((fan_in + 1) * fan_out);
  }

  Eigen::Map<const Matrix> input(features.data(), static_cast<Eigen::Index>(arch_.inputs()),
                                 static_cast<Eigen::Index>(batch));
  const Forward f = forward(arch_, params, input);

  // R-forward: r_pre[l] = R(z_l), r_post[l] = R(a_l).
  std::vector<Matrix> r_pre(layers), r_post(layers + 1);
  r_post[0] = Matrix::Zero(input.rows(), input.cols());
  for (std::size_t l = 0; l < layers; ++l) {
    r_pre[l] = w[l] * r_post[l] + dw[l] * f.post[l];
    r_pre[l].colwise() += db[l];
    if (l + 1 < layers) {
      if (relu)
        r_post[l + 1] = (f.pre[l].array() > 0.0).cast<double>() * r_pre[l].array();
      else
        r_post[l + 1] = (1.0 - f.post[l + 1].array().square()) * r_pre[l].array();
    } else {
      r_post[l + 1] = r_pre[l];
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  const Matrix& logits = f.post.back();
  Matrix delta(outputs, static_cast<Eigen::Index>(batch));
  Matrix r_delta(outputs, static_cast<Eigen::Index>(batch));
  if (arch_.head == LossHead::SoftmaxCrossEntropy) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const auto shifted = (logits.col(j).array() - logits.col(j).maxCoeff()).exp().eval();
      const Eigen::VectorXd prob = (shifted / shifted.sum()).matrix();
      const Eigen::VectorXd rz = r_pre.back().col(j);
      delta.col(j) = prob;
      delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
      r_delta.col(j) = prob.cwiseProduct(rz) - prob * prob.dot(rz);
    }
  } else {
    delta = logits;
    if (regress)
      delta -= Eigen::Map<const Matrix>(targets.data(), outputs, static_cast<Eigen::Index>(batch));
    else
      for (Eigen::Index j = 0; j < logits.cols(); ++j) delta(labels[static_cast<std::size_t>(j)], j) -= 1.0;
    r_delta = r_pre.back();
  }
  delta *= inv_batch;
  r_delta *= inv_batch;

  for (std::size_t l = layers; l-- > 0;) {
    const auto fan_in = static_cast<Eigen::Index>(arch_.layers[l]);
    const auto fan_out = static_cast<Eigen::Index>(arch_.layers[l + 1]);
    const RowMajor hw = r_delta * f.post[l].transpose() + delta * r_post[l].transpose();
    const Eigen::VectorXd hb = r_delta.rowwise().sum();
    Eigen::Map<RowMajor>(out.data() + offsets[l], fan_out, fan_in) = hw;
    Eigen::Map<Eigen::VectorXd>(out.data() + offsets[l] + fan_out * fan_in, fan_out) = hb;
    if (l == 0) break;
    const Matrix back = w[l].transpose() * delta;
    const Matrix r_back = dw[l].transpose() * delta + w[l].transpose() * r_delta;
    if (relu) {
      const auto mask = (f.pre[l - 1].array() > 0.0).cast<double>();
      delta = mask * back.array();
      r_delta = mask * r_back.array();
    } else {
      const auto a = f.post[l].array();
      const auto d1 = 1.0 - a.square();
      r_delta = d1 * r_back.array() - 2.0 * a * d1 * r_pre[l - 1].array() * back.array();
      delta = d1 * back.array();
    }
  }
  for (double v : out)
    if (!std::isfinite(v)) throw NumericalError("MLP hvp: non-finite value");
}

std::vector<std::int32_t> Mlp::predict(std::span<const double> params, const Dataset& data) const {
  if (data.features != arch_.inputs()) throw DomainError("MLP predict: feature dimension mismatch");
  if (params.size() != parameter_count()) throw DomainError("MLP predict: parameter count mismatch");
  constexpr std::size_t kChunk = 1024;
  std::vector<std::int32_t> out(data.rows);
  for (std::size_t start = 0; start < data.rows; start += kChunk) {
    const std::size_t count = std::min(kChunk, data.rows - start);
    Eigen::Map<const Matrix> input(data.x.data() + start * data.features, static_cast<Eigen::Index>(data.features),
                                   static_cast<Eigen::Index>(count));
    const Forward f = forward(arch_, params, input);
    for (std::size_t j = 0; j < count; ++j) {
      Eigen::Index arg = 0;
      f.post.back().col(static_cast<Eigen::Index>(j)).maxCoeff(&arg);
      out[start + j] = static_cast<std::int32_t>(arg);
    }
  }
  return out;
}

double Mlp::accuracy(std::span<const double> params, const Dataset& data) const {
  if (data.rows == 0) return 0.0;
  const auto predicted = predict(params, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows; ++i) correct += predicted[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.rows);
}

MlpBatchLoss::MlpBatchLoss(const Mlp& model, const Dataset& data, std::span<const std::size_t> rows)
    : model_(&model) {
  if (data.features != model.architecture().inputs()) throw DomainError("MLP batch: feature dimension mismatch");
  if (rows.empty()) throw DomainError("MLP batch: empty batch");
  features_.reserve(rows.size() * data.features);
  labels_.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= data.rows) throw DomainError("MLP batch: row index out of range");
    const auto x = data.row(r);
    features_.insert(features_.end(), x.begin(), x.end());
    labels_.push_back(data.labels[r]);
    if (data.target_dim > 0) {
      const auto t = std::span<const double>(data.targets).subspan(r * data.target_dim, data.target_dim);
      targets_.insert(targets_.end(), t.begin(), t.end());
    }
  }
  if (!targets_.empty() && data.target_dim != model.architecture().outputs())
    throw DomainError("MLP batch: target dimension does not match the output layer");
}

MlpBatchLoss::MlpBatchLoss(const Mlp& model, const Dataset& data) : model_(&model) {
  if (data.features != model.architecture().inputs()) throw DomainError("MLP batch: feature dimension mismatch");
  if (data.rows == 0) throw DomainError("MLP batch: empty batch");
  features_ = data.x;
  labels_ = data.labels;
  targets_ = data.targets;
  if (!targets_.empty() && data.target_dim != model.architecture().outputs())
    throw DomainError("MLP batch: target dimension does not match the output layer");
}

double MlpBatchLoss::value(std::span<const double> x) const {
  return model_->loss_and_grad(x, features_, labels_, {}, targets_);
}

void MlpBatchLoss::gradient(std::span<const double> x, std::span<double> out) const {
  model_->loss_and_grad(x, features_, labels_, out, targets_);
}

double MlpBatchLoss::value_and_gradient(std::span<const double> x, std::span<double> out) const {
  return model_->loss_and_grad(x, features_, labels_, out, targets_);
}

bool MlpBatchLoss::exact_hvp(std::span<const double> x, std::span<const double> z, std::span<double> out) const {
  model_->hessian_vector_product(x, features_, labels_, z, out, targets_);
  return true;
}

}  // namespace sharplab
