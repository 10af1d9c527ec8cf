#include "sharplab/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sharplab/errors.hpp"

namespace sharplab {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Sam: return "sam";
    case OptimizerKind::TraceSam: return "trace-sam";
    case OptimizerKind::FrobSam: return "frob-sam";
    case OptimizerKind::DetSam: return "det-sam";
    case OptimizerKind::Generic: return "generic";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Sam, OptimizerKind::TraceSam, OptimizerKind::FrobSam,
                          OptimizerKind::DetSam, OptimizerKind::Generic})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd, sam, trace-sam, frob-sam, det-sam or generic)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (kind != OptimizerKind::Sgd && (!(rho > 0.0) || !std::isfinite(rho)))
    fail("rho must be positive for " + to_string(kind));
  if (samples < 1) fail("samples must be at least 1");
  if (kind == OptimizerKind::FrobSam && samples < 2) fail("frob-sam needs samples >= 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be nonnegative");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (steps_per_epoch < 1) fail("steps_per_epoch must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) fail("lr_decay must be positive");
  if (!(det_half_width > 0.0) || !std::isfinite(det_half_width)) fail("det_half_width must be positive");
}

double TrainConfig::lr_at_epoch(std::size_t epoch) const {
  if (lr_period == 0) return lr;
  return lr * std::pow(lr_decay, static_cast<double>(epoch / lr_period));
}

SeededStream perturbation_stream(std::uint64_t seed, std::uint64_t iteration) {
  return SeededStream(seed, domain_tag("perturb"), iteration);
}

namespace {

Vector base_gradient(const LossFunction& loss, std::span<const double> x) {
  if (x.size() != loss.dim()) throw DomainError("optimizer step: parameter dimension does not match the loss");
  return loss.gradient(x);
}

void add_scaled(Vector& g, double scale, std::span<const double> term) {
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += scale * term[j];
}

}  // namespace

Vector step_generic(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec,
                    const TrainConfig& cfg, const SeededStream& stream) {
  Vector g = base_gradient(loss, x);
  if (cfg.lambda == 0.0) return g;
  if (spec.dim() != loss.dim()) throw DomainError("step_generic: spec dimension does not match the loss");
  add_scaled(g, cfg.lambda, regularizer_gradient(loss, x, spec, cfg.rho, stream, cfg.samples));
  return g;
}

Vector step_frob(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                 const SeededStream& stream) {
  if (cfg.samples < 2) throw ConfigError("frob-sam needs samples >= 2");
  Vector g = base_gradient(loss, x);
  if (cfg.lambda == 0.0) return g;
  const std::size_t d = loss.dim();
  const std::size_t n = cfg.samples;
  const double rho = cfg.rho;
  const MeasureSpec mu = MeasureSpec::gaussian(d);

  // Both sums are shift-invariant in L and in grad L, so they are taken
  // relative to the base point to avoid cancellation at small rho.
  Vector base_grad(d);
  const double base = loss.value_and_gradient(x, base_grad);
  Vector v(d), shifted(d), grad(d);
  Vector sum_lg(d, 0.0), sum_g(d, 0.0);
  double sum_l = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    draw(mu, stream, 0, i, v);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + rho * v[j];
    const double l = loss.value_and_gradient(shifted, grad) - base;
    if (!std::isfinite(l)) throw NumericalError("step_frob: loss is not finite at a perturbed point");
    sum_l += l;
    for (std::size_t j = 0; j < d; ++j) {
      const double dg = grad[j] - base_grad[j];
      sum_lg[j] += l * dg;
      sum_g[j] += dg;
    }
  }
  const double nm1 = static_cast<double>(n - 1);
  const double a = 4.0 / (nm1 * rho * rho);
  const double b = 4.0 * (sum_l / (nm1 * rho)) / (static_cast<double>(n) * rho);
  for (std::size_t j = 0; j < d; ++j) g[j] += cfg.lambda * (a * sum_lg[j] - b * sum_g[j]);
  return g;
}

Vector step_det(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                const SeededStream& stream) {
  if (cfg.lambda == 0.0) return base_gradient(loss, x);
  return step_generic(loss, x, make_spec(SpecPreset::determinant(cfg.det_half_width), loss.dim()), cfg, stream);
}

Estimate det_sharpness_value(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                             const SeededStream& stream) {
  return estimate_R(loss, x, make_spec(SpecPreset::determinant(cfg.det_half_width), loss.dim()), cfg.rho, stream,
                    std::max<std::size_t>(cfg.samples, 2));
}

Vector step_trace(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                  const SeededStream& stream) {
  Vector g = base_gradient(loss, x);
  if (cfg.lambda == 0.0) return g;
  const std::size_t d = loss.dim();
  const MeasureSpec mu = MeasureSpec::sphere(d);
  Vector v(d), shifted(d), grad(d), acc(d, 0.0);
  const double w = mu.weight(cfg.samples);
  for (std::uint64_t i = 0; i < cfg.samples; ++i) {
    draw(mu, stream, 0, i, v);
    for (std::size_t j = 0; j < d; ++j) shifted[j] = x[j] + cfg.rho * v[j];
    loss.gradient(shifted, grad);
    for (std::size_t j = 0; j < d; ++j) acc[j] += w * (grad[j] - g[j]);
  }
  add_scaled(g, cfg.lambda, acc);
  for (double gj : g)
    if (!std::isfinite(gj)) throw NumericalError("step_trace: non-finite gradient");
  return g;
}

Vector step_sam(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg) {
  Vector g = base_gradient(loss, x);
  double norm2 = 0.0;
  for (double v : g) norm2 += v * v;
  if (norm2 == 0.0 || cfg.rho == 0.0) return g;
  const double scale = cfg.rho / std::sqrt(norm2);
  Vector shifted(x.begin(), x.end());
  for (std::size_t j = 0; j < shifted.size(); ++j) shifted[j] += scale * g[j];
  return loss.gradient(shifted);
}

Vector optimizer_step(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                      const SeededStream& stream) {
  switch (cfg.kind) {
    case OptimizerKind::Sgd: return base_gradient(loss, x);
    case OptimizerKind::Sam: return step_sam(loss, x, cfg);
    case OptimizerKind::TraceSam: return step_trace(loss, x, cfg, stream);
    case OptimizerKind::FrobSam: return step_frob(loss, x, cfg, stream);
    case OptimizerKind::DetSam: return step_det(loss, x, cfg, stream);
    case OptimizerKind::Generic:
      if (cfg.lambda == 0.0) return base_gradient(loss, x);
      return step_generic(loss, x, make_spec(cfg.spec, loss.dim()), cfg, stream);
  }
  return base_gradient(loss, x);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Momentum update; throws with iteration context on non-finite values.
void apply_update(TrainerState& state, const Vector& g, double lr, double momentum) {
  for (std::size_t j = 0; j < g.size(); ++j) {
    state.buffer[j] = momentum * state.buffer[j] + g[j];
    state.x[j] -= lr * state.buffer[j];
  }
  for (double v : state.x) {
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "training diverged: non-finite parameters at epoch " << state.epoch << ", iteration " << state.iteration;
      throw NumericalError(msg.str());
    }
  }
  ++state.iteration;
}

[[noreturn]] void rethrow_with_context(const NumericalError& e, const TrainerState& state) {
  std::ostringstream msg;
  msg << "epoch " << state.epoch << ", iteration " << state.iteration << ": " << e.what();
  throw NumericalError(msg.str());
}

std::vector<std::size_t> permutation(std::size_t n, const SeededStream& stream) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.bits(0, i, 0) % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

RunRecord train(const LossFunction& loss, Vector x0, const TrainConfig& cfg) {
  cfg.validate();
  if (!loss.nonnegative()) throw DomainError("train: loss is an analysis-only fixture that is not bounded below");
  if (x0.size() != loss.dim()) throw DomainError("train: initial point dimension does not match the loss");
  RunRecord record;
  TrainerState& state = record.state;
  state.x = std::move(x0);
  state.buffer.assign(state.x.size(), 0.0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    const auto start = Clock::now();
    const double lr = cfg.lr_at_epoch(epoch);
    try {
      for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
        const Vector g = optimizer_step(loss, state.x, cfg, perturbation_stream(cfg.seed, state.iteration));
        apply_update(state, g, lr, cfg.momentum);
      }
    } catch (const NumericalError& e) {
      rethrow_with_context(e, state);
    }
    EpochRow row;
    row.epoch = epoch + 1;
    row.train_loss = loss.value(state.x);
    if (!std::isfinite(row.train_loss)) {
      std::ostringstream msg;
      msg << "training diverged: non-finite loss after epoch " << epoch + 1;
      throw NumericalError(msg.str());
    }
    row.seconds = seconds_since(start);
    row.lambda = cfg.lambda;
    row.seed = cfg.seed;
    record.rows.push_back(row);
  }
  state.epoch = cfg.epochs;
  return record;
}

RunRecord train(const Mlp& model, const Dataset& train_data, const Dataset* test_data, Vector x0,
                const TrainConfig& cfg, const MetricOptions& metrics) {
  cfg.validate();
  if (train_data.rows == 0) throw DomainError("train: empty training set");
  if (x0.size() != model.parameter_count()) throw DomainError("train: initial parameters do not match the model");
  RunRecord record;
  TrainerState& state = record.state;
  state.x = std::move(x0);
  state.buffer.assign(state.x.size(), 0.0);

  std::optional<MlpBatchLoss> estimate_loss;
  if (metrics.frobenius_probes > 0 || metrics.trace_probes > 0) {
    const auto order = permutation(train_data.rows, SeededStream(metrics.probe_seed, domain_tag("estimate-subset")));
    const std::size_t count = std::min(metrics.estimate_examples, train_data.rows);
    estimate_loss.emplace(model, train_data, std::span<const std::size_t>(order).first(count));
  }

  const std::size_t batch = std::min(cfg.batch_size, train_data.rows);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    const auto start = Clock::now();
    const double lr = cfg.lr_at_epoch(epoch);
    const auto order = permutation(train_data.rows, SeededStream(cfg.seed, domain_tag("shuffle"), epoch));
    double loss_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < train_data.rows; begin += batch) {
        const std::size_t count = std::min(batch, train_data.rows - begin);
        const MlpBatchLoss loss(model, train_data, std::span<const std::size_t>(order).subspan(begin, count));
        const double value = loss.value(state.x);
        if (!std::isfinite(value)) throw NumericalError("non-finite mini-batch loss");
        loss_sum += value * static_cast<double>(count);
        const Vector g = optimizer_step(loss, state.x, cfg, perturbation_stream(cfg.seed, state.iteration));
        apply_update(state, g, lr, cfg.momentum);
      }
    } catch (const NumericalError& e) {
      rethrow_with_context(e, state);
    }
    EpochRow row;
    row.epoch = epoch + 1;
    row.train_loss = loss_sum / static_cast<double>(train_data.rows);
    if (metrics.train_accuracy) row.train_accuracy = model.accuracy(state.x, train_data);
    if (test_data != nullptr) row.test_accuracy = model.accuracy(state.x, *test_data);
    const SeededStream probes(metrics.probe_seed, domain_tag("hessian-probes"), epoch);
    if (metrics.frobenius_probes > 0)
      row.frobenius_sq_estimate = frobenius_sq_estimate(*estimate_loss, state.x, metrics.frobenius_probes, probes).value;
    if (metrics.trace_probes > 0)
      row.trace_estimate =
          hutchinson_trace(*estimate_loss, state.x, metrics.trace_probes, probes.with_domain("trace-probes")).value;
    row.seconds = seconds_since(start);
    row.lambda = cfg.lambda;
    row.seed = cfg.seed;
    record.rows.push_back(row);
  }
  state.epoch = cfg.epochs;
  return record;
}

}  // namespace sharplab
