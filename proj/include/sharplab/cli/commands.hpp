#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sharplab/cli/config.hpp"
#include "sharplab/cli/csv.hpp"

namespace sharplab::cli {

struct CommandOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides study.seeds
  std::size_t threads = 1;
};

struct CommandResult {
  /// The main table, also written to disk.
  CsvTable table;
  std::vector<std::filesystem::path> files;
  /// Named scalars for the console summary (fitted slope, max errors, ...).
  std::vector<std::pair<std::string, double>> summary;
};

/// oracle, estimate, train, bias-study, invariance-check, universality-demo.
const std::vector<std::string>& command_names();

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg, const CommandOptions& opts);

/// Per-preset spectral value against its Monte-Carlo estimate.
/// Columns: preset, exact, estimate, stderr, zscore, parameters, note.
CommandResult run_oracle(const ExperimentConfig& cfg, const CommandOptions& opts);

/// R_rho over the rho schedule against the exact measure, with a log-log fit.
/// Columns: rho, estimate, exact, abs_error, stderr. Also estimate_fit.csv, estimate.svg.
CommandResult run_estimate(const ExperimentConfig& cfg, const CommandOptions& opts);

/// One run per (lambda, seed). Columns: epoch, train_loss, train_accuracy,
/// test_accuracy, trace_estimate, frobenius_sq_estimate, lambda, seed.
/// Wall-clock seconds go to timings.json, outside the deterministic CSVs.
CommandResult run_train(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Frobenius-squared trajectories per (lambda, seed), seed-averaged chart and
/// bias_summary.csv (lambda, seeds, final_mean_frobenius_sq, final_stderr,
/// min_final_test_accuracy, mean_final_test_accuracy).
CommandResult run_bias_study(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Columns: transform, point, S_at_x, S_at_transformed_x, coupled_abs_diff, analytic_abs_diff.
CommandResult run_invariance_check(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Columns: section, index, truth, reconstructed, abs_error.
CommandResult run_universality_demo(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Least-squares slope and intercept of log y against log x over positive pairs.
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

std::string describe_preset(const SpecPreset& preset);

}  // namespace sharplab::cli
