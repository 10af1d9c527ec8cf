#include "sharplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace sharplab {

void Dataset::validate() const {
  if (x.size() != rows * features) throw DomainError("dataset: feature buffer does not match rows x features");
  if (labels.size() != rows) throw DomainError("dataset: label count does not match row count");
  if (targets.size() != rows * target_dim) throw DomainError("dataset: target buffer does not match rows x target_dim");
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("dataset: non-finite feature value");
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      std::ostringstream msg;
      msg << "dataset: label " << labels[i] << " at row " << i << " is outside [0, " << num_classes << ")";
      throw DomainError(msg.str());
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string split_tag) const {
  Dataset out;
  out.rows = indices.size();
  out.features = features;
  out.num_classes = num_classes;
  out.split = std::move(split_tag);
  out.x.reserve(out.rows * features);
  out.labels.reserve(out.rows);
  for (std::size_t i : indices) {
    if (i >= rows) throw DomainError("dataset subset: row index out of range");
    const auto r = row(i);
    out.x.insert(out.x.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    if (target_dim > 0)
      out.targets.insert(out.targets.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * target_dim),
                         targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * target_dim));
  }
  out.target_dim = target_dim;
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, rows));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx, split);
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void require_bytes(const std::vector<unsigned char>& bytes, std::size_t expected, const std::filesystem::path& path) {
  if (bytes.size() < expected) {
    std::ostringstream msg;
    msg << path.string() << ": truncated IDX file, expected " << expected << " bytes, found " << bytes.size();
    throw IdxTruncatedError(msg.str());
  }
}

void require_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
  if (found != expected) {
    std::ostringstream msg;
    msg << path.string() << ": IDX magic mismatch, expected 0x" << std::hex << expected << ", found 0x" << found;
    throw IdxMagicError(msg.str());
  }
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);

  require_bytes(images, 16, images_path);
  require_magic(be32(images, 0), 0x00000803u, images_path);
  const std::size_t count = be32(images, 4);
  const std::size_t height = be32(images, 8);
  const std::size_t width = be32(images, 12);
  const std::size_t pixels = height * width;
  require_bytes(images, 16 + count * pixels, images_path);

  require_bytes(labels, 8, labels_path);
  require_magic(be32(labels, 0), 0x00000801u, labels_path);
  const std::size_t label_count = be32(labels, 4);
  if (label_count != count) {
    std::ostringstream msg;
    msg << "IDX count mismatch: " << images_path.string() << " has " << count << " images but "
        << labels_path.string() << " has " << label_count << " labels";
    throw IdxCountMismatchError(msg.str());
  }
  require_bytes(labels, 8 + count, labels_path);

  Dataset out;
  out.rows = count;
  out.features = pixels;
  out.x.resize(count * pixels);
  for (std::size_t i = 0; i < count * pixels; ++i) out.x[i] = images[16 + i] / 255.0;
  out.labels.resize(count);
  std::int32_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[i] = labels[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.num_classes = std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1);
  return out;
}

void write_idx(const Dataset& data, std::size_t image_rows, std::size_t image_cols,
               const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  if (image_rows * image_cols != data.features) throw DomainError("write_idx: image shape does not match features");
  std::ofstream images(images_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!images || !labels) throw IoError("write_idx: cannot open output files");
  put_be32(images, 0x00000803u);
  put_be32(images, static_cast<std::uint32_t>(data.rows));
  put_be32(images, static_cast<std::uint32_t>(image_rows));
  put_be32(images, static_cast<std::uint32_t>(image_cols));
  for (double v : data.x) images.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  put_be32(labels, 0x00000801u);
  put_be32(labels, static_cast<std::uint32_t>(data.rows));
  for (auto l : data.labels) labels.put(static_cast<char>(l));
  if (!images || !labels) throw IoError("write_idx: write failed");
}

Dataset synth_blobs(const BlobOptions& options, const SeededStream& stream) {
  if (options.num_classes == 0 || options.per_class == 0 || options.dim == 0)
    throw DomainError("synth_blobs: counts and dimension must be positive");
  if (!(options.spread >= 0.0)) throw DomainError("synth_blobs: spread must be nonnegative");
  if (options.dim < 2 && options.num_classes > 2)
    throw DomainError("synth_blobs: more than two classes need at least two dimensions");
  const std::size_t k = options.num_classes;
  const std::size_t d = options.dim;

  std::vector<double> means(k * d, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (d >= k) {
      means[c * d + c] = 1.0;
    } else if (d == 1) {
      means[c] = c == 0 ? -1.0 : 1.0;
    } else {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      means[c * d] = std::cos(angle);
      means[c * d + 1] = std::sin(angle);
    }
  }

  Dataset out;
  out.rows = k * options.per_class;
  out.features = d;
  out.num_classes = k;
  out.x.resize(out.rows * d);
  out.labels.resize(out.rows);
  std::vector<double> noise(d);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < options.per_class; ++j) {
      const std::size_t r = c * options.per_class + j;
      stream.fill_normal(0, r, noise);
      for (std::size_t f = 0; f < d; ++f) out.x[r * d + f] = means[c * d + f] + options.spread * noise[f];
      out.labels[r] = static_cast<std::int32_t>(c);
    }
  }
  return out;
}

}  // namespace sharplab
