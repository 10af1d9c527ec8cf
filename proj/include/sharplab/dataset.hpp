#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sharplab/errors.hpp"
#include "sharplab/rng.hpp"

namespace sharplab {

/// Immutable labelled examples; features row-major (rows = examples).
struct Dataset {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::size_t num_classes = 0;
  std::vector<double> x;
  std::vector<std::int32_t> labels;
  /// Optional regression targets (rows x target_dim) for the MSE head.
  std::vector<double> targets;
  std::size_t target_dim = 0;
  std::string split = "train";

  std::span<const double> row(std::size_t i) const { return {x.data() + i * features, features}; }
  /// Throws DomainError on non-finite features or labels outside [0, num_classes).
  void validate() const;
  /// Copy of the given rows, in order.
  Dataset subset(std::span<const std::size_t> indices, std::string split_tag) const;
  Dataset head(std::size_t count) const;
};

class IdxMagicError : public IoError {
 public:
  using IoError::IoError;
};

class IdxTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

class IdxCountMismatchError : public IoError {
 public:
  using IoError::IoError;
};

/// Reads an IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian
/// dimensions). Pixels are scaled by 1/255. num_classes = max label + 1, at least 10.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes features (assumed already in [0, 1]) back to 8-bit IDX files.
void write_idx(const Dataset& data, std::size_t image_rows, std::size_t image_cols,
               const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct BlobOptions {
  std::size_t num_classes = 3;
  std::size_t per_class = 100;
  std::size_t dim = 2;
  double spread = 0.3;
};

/// Gaussian clusters around unit-norm class means: the vertices of a regular
/// polygon in the first two coordinates when d < num_classes, otherwise the
/// standard basis vectors e_1..e_K. Rows are grouped by class.
Dataset synth_blobs(const BlobOptions& options, const SeededStream& stream);

}  // namespace sharplab
