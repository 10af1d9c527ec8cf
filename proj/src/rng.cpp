#include "sharplab/rng.hpp"

#include <cmath>
#include <numbers>

namespace sharplab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t word = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t domain_tag(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

SeededStream::SeededStream(std::uint64_t seed, std::uint64_t domain, std::uint64_t iteration)
    : seed_(seed), domain_(domain), iteration_(iteration) {
  const std::uint64_t k = splitmix64(splitmix64(seed) ^ splitmix64(domain ^ 0x5851F42D4C957F2Dull) ^
                                     splitmix64(iteration + 0x14057B7EF767814Full));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

std::array<std::uint32_t, 4> SeededStream::block(std::uint32_t component, std::uint64_t sample,
                                                 std::uint64_t block_index) const {
  // Block indices beyond 2^32 per sample are not needed by any caller.
  return philox4x32({static_cast<std::uint32_t>(block_index), static_cast<std::uint32_t>(sample),
                     static_cast<std::uint32_t>(sample >> 32), component},
                    key_);
}

double SeededStream::uniform(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const {
  const auto w = block(component, sample, index / 2);
  return index % 2 == 0 ? to_unit(w[0], w[1]) : to_unit(w[2], w[3]);
}

double SeededStream::normal(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const {
  const auto w = block(component, sample, index / 2);
  const double u1 = 1.0 - to_unit(w[0], w[1]);  // (0, 1]
  const double u2 = to_unit(w[2], w[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return index % 2 == 0 ? r * std::cos(angle) : r * std::sin(angle);
}

void SeededStream::fill_uniform(std::uint32_t component, std::uint64_t sample, std::span<double> out) const {
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto w = block(component, sample, j / 2);
    out[j] = to_unit(w[0], w[1]);
    if (j + 1 < out.size()) out[j + 1] = to_unit(w[2], w[3]);
  }
}

void SeededStream::fill_normal(std::uint32_t component, std::uint64_t sample, std::span<double> out) const {
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto w = block(component, sample, j / 2);
    const double u1 = 1.0 - to_unit(w[0], w[1]);
    const double u2 = to_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[j] = r * std::cos(angle);
    if (j + 1 < out.size()) out[j + 1] = r * std::sin(angle);
  }
}

std::uint64_t SeededStream::bits(std::uint32_t component, std::uint64_t sample, std::uint64_t index) const {
  const auto w = block(component, sample, index / 2);
  return index % 2 == 0 ? (static_cast<std::uint64_t>(w[0]) << 32 | w[1])
                        : (static_cast<std::uint64_t>(w[2]) << 32 | w[3]);
}

}  // namespace sharplab
