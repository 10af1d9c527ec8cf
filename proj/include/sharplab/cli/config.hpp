#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/linalg.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/measures.hpp"
#include "sharplab/mlp.hpp"
#include "sharplab/optim.hpp"
#include "sharplab/sharpness.hpp"
#include "sharplab/universality.hpp"

namespace sharplab::cli {

/// Fixed-point losses and explicit matrices.
struct LossSection {
  /// saddle, scale-inv, rot-inv, quadratic, matrix.
  std::string name;
  Vector point;
  std::size_t dim = 0;
  std::vector<Vector> hessian;  // quadratic / matrix
  Vector center;                // quadratic
};

struct DatasetSection {
  std::string kind;  // idx | blobs
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 0;  // 0 keeps every row
  std::size_t test_limit = 0;
  BlobOptions blobs;
  std::size_t test_per_class = 0;  // blobs: held-out rows per class, 0 disables
};

struct TransformSection {
  std::string kind;  // rescale | rotation
  double k = 2.0;
  double angle_degrees = 30.0;
};

struct StudySection {
  std::vector<double> lambdas;
  std::vector<double> rhos;
  std::vector<std::uint64_t> seeds;
  std::size_t samples = 200'000;
  std::vector<SpecPreset> presets;
  std::size_t frobenius_probes = 0;
  std::size_t trace_probes = 0;
  std::size_t estimate_examples = 1280;
  std::uint64_t probe_seed = 0;
  std::optional<TransformSection> transform;
  std::size_t pairs = 0;
  std::string measure;  // empty: the preset's own measures
  double half_width = 1.0;
  NodeLayout node_layout = NodeLayout::Symmetric;
  std::size_t mc_samples = 0;  // universality-demo: 0 uses exact moments
};

struct ExperimentConfig {
  std::optional<LossSection> loss;
  std::optional<MlpArchitecture> model;
  std::optional<DatasetSection> dataset;
  TrainConfig optimizer;
  bool has_optimizer = false;
  SpecPreset spec = SpecPreset::trace();
  StudySection study;
  std::optional<std::filesystem::path> output_dir;
  /// Raw file bytes, hashed into checkpoints.
  std::string source;
};

/// Parses and schema-checks a config document. Unknown keys, missing
/// required fields and ill-typed values throw ConfigError. Relative dataset
/// paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

SpecPreset parse_spec_object(const std::string& json_text);

/// Built loss plus its evaluation point.
struct FixedLoss {
  std::unique_ptr<LossFunction> loss;  // null for an explicit matrix
  std::optional<SymmetricMatrix> matrix;
  Vector point;

  SymmetricMatrix hessian() const;
  QuadraticOracle oracle() const;
  std::size_t dim() const;
};

FixedLoss build_loss(const LossSection& section);

struct DataSplits {
  Dataset train;
  std::optional<Dataset> test;
};

DataSplits build_datasets(const DatasetSection& section, std::uint64_t seed);

}  // namespace sharplab::cli
