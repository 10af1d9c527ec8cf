#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace sharplab {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit hash of a short tag (FNV-1a), used to separate RNG domains.
std::uint64_t domain_tag(std::string_view name);

/// Random values addressed by (seed, domain, iteration, component, sample,
/// coordinate). Any value can be regenerated independently of the others,
/// so draws are identical regardless of evaluation order or threading.
class SeededStream {
 public:
  SeededStream() = default;
  explicit SeededStream(std::uint64_t seed, std::uint64_t domain = 0, std::uint64_t iteration = 0);

  SeededStream at_iteration(std::uint64_t iteration) const { return SeededStream(seed_, domain_, iteration); }
  SeededStream with_domain(std::string_view name) const { return SeededStream(seed_, domain_tag(name), iteration_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t domain() const { return domain_; }
  std::uint64_t iteration() const { return iteration_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const;
  /// Standard normal via Box-Muller on a Philox block.
  double normal(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const;

  void fill_uniform(std::uint32_t component, std::uint64_t sample, std::span<double> out) const;
  void fill_normal(std::uint32_t component, std::uint64_t sample, std::span<double> out) const;
  /// Raw 64-bit word, for integer draws (shuffles).
  std::uint64_t bits(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint32_t component, std::uint64_t sample, std::uint64_t block_index) const;

  std::uint64_t seed_ = 0;
  std::uint64_t domain_ = 0;
  std::uint64_t iteration_ = 0;
  std::array<std::uint32_t, 2> key_{};
};

}  // namespace sharplab
