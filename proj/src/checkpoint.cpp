#include "sharplab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <json.hpp>

#include "sharplab/errors.hpp"

namespace sharplab {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'L', 'B', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t config_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const nlohmann::ordered_json header = {
      {"architecture", checkpoint.header.architecture},
      {"config_hash", checkpoint.header.config_hash},
      {"seed", checkpoint.header.seed},
      {"iteration", checkpoint.header.iteration},
      {"parameter_count", checkpoint.params.size()},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : checkpoint.params) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError(path.string() + ": not a checkpoint file");
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (bytes.size() < 16 + header_len) throw IoError(path.string() + ": truncated checkpoint header");
  Checkpoint cp;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    cp.header.architecture = header.at("architecture").get<std::string>();
    cp.header.config_hash = header.at("config_hash").get<std::uint64_t>();
    cp.header.seed = header.at("seed").get<std::uint64_t>();
    cp.header.iteration = header.at("iteration").get<std::uint64_t>();
    count = header.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  const std::size_t offset = 16 + header_len;
  if (bytes.size() != offset + 8 * count) throw IoError(path.string() + ": parameter block size mismatch");
  cp.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) cp.params[i] = std::bit_cast<double>(get_u64(bytes.data() + offset + 8 * i));
  return cp;
}

}  // namespace sharplab
