#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/mlp.hpp"
#include "sharplab/rng.hpp"
#include "sharplab/sharpness.hpp"

namespace sharplab {

enum class OptimizerKind { Sgd, Sam, TraceSam, FrobSam, DetSam, Generic };

/// sgd, sam, trace-sam, frob-sam, det-sam, generic.
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct TrainConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 0.1;
  double rho = 0.05;
  std::size_t samples = 2;
  double lambda = 0.0;
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  /// Full-batch runs on a fixed loss: updates per epoch.
  std::size_t steps_per_epoch = 1;
  double momentum = 0.0;
  /// lr_t = lr * lr_decay^floor(epoch / lr_period); lr_period = 0 disables.
  double lr_decay = 1.0;
  std::size_t lr_period = 0;
  std::uint64_t seed = 0;
  /// Sharpness spec for the generic optimizer.
  SpecPreset spec = SpecPreset::frobenius();
  /// Det-SAM hypercube half-width t.
  double det_half_width = 1.0;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  double lr_at_epoch(std::size_t epoch) const;
};

/// Per-step stream: perturbation samples for iteration t live at
/// (seed, "perturb", t), so every step draws fresh samples.
SeededStream perturbation_stream(std::uint64_t seed, std::uint64_t iteration);

/// grad L(x) + lambda * regularizer_gradient(loss, x, spec, rho, stream, n).
/// lambda = 0 returns grad L(x) without sampling.
Vector step_generic(const LossFunction& loss, std::span<const double> x, const SharpnessSpec& spec,
                    const TrainConfig& cfg, const SeededStream& stream);

/// Frob-SAM with the unbiased cross-covariance; Gaussian samples drawn as
/// the generic Frobenius spec draws them. Requires n >= 2.
Vector step_frob(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                 const SeededStream& stream);

/// Generic step with the determinant preset on the hypercube [-t, t]^d.
Vector step_det(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                const SeededStream& stream);

/// The determinant sharpness value R_rho(x) that Det-SAM regularizes.
Estimate det_sharpness_value(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                             const SeededStream& stream);

/// grad L + lambda * (1/n) sum (grad L(x + rho v_i) - grad L(x)), v_i uniform on the sphere.
Vector step_trace(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                  const SeededStream& stream);

/// grad L(x + rho grad L / ||grad L||); plain gradient when grad L(x) = 0.
Vector step_sam(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg);

/// Dispatches on cfg.kind.
Vector optimizer_step(const LossFunction& loss, std::span<const double> x, const TrainConfig& cfg,
                      const SeededStream& stream);

struct TrainerState {
  Vector x;
  Vector buffer;
  std::uint64_t iteration = 0;
  std::size_t epoch = 0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> train_accuracy;
  std::optional<double> test_accuracy;
  std::optional<double> trace_estimate;
  std::optional<double> frobenius_sq_estimate;
  double seconds = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct RunRecord {
  std::vector<EpochRow> rows;
  TrainerState state;
};

/// Epoch-end Hessian estimates on a fixed training subsample.
struct MetricOptions {
  std::size_t estimate_examples = 1280;
  std::size_t frobenius_probes = 0;  // 0 disables
  std::size_t trace_probes = 0;      // 0 disables
  /// Probe stream seed; shared across runs so estimates are comparable.
  std::uint64_t probe_seed = 0;
  bool train_accuracy = true;
};

/// Full-batch training on a fixed loss.
RunRecord train(const LossFunction& loss, Vector x0, const TrainConfig& cfg);

/// Mini-batch training of an MLP; perturbations use the current mini-batch.
RunRecord train(const Mlp& model, const Dataset& train_data, const Dataset* test_data, Vector x0,
                const TrainConfig& cfg, const MetricOptions& metrics = {});

}  // namespace sharplab
