#include "sosd/snapshot_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sosd {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'O', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) |
         (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const DenseMatrix& m) {
  if (!m.is_finite()) throw std::invalid_argument("encode_snapshot: non-finite matrix");
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * m.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
    }
  }
  return out;
}

DenseMatrix decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) {
    throw std::runtime_error("decode_snapshot: truncated header (byte 0)");
  }
  for (int i = 0; i < 4; ++i) {
    if (bytes[static_cast<std::size_t>(i)] != kMagic[i]) {
      throw std::runtime_error("decode_snapshot: bad magic (byte " + std::to_string(i) + ")");
    }
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion) {
    throw std::runtime_error("decode_snapshot: unsupported version (byte 4)");
  }
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  if (rows == 0 || cols == 0) {
    throw std::runtime_error("decode_snapshot: zero dimension (byte 8)");
  }
  const std::size_t expected = 16 + 8 * static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != expected) {
    throw std::runtime_error("decode_snapshot: length " + std::to_string(bytes.size()) +
                             " != expected " + std::to_string(expected) + " (byte 16)");
  }
  DenseMatrix m(rows, cols);
  std::size_t at = 16;
  for (double& v : m.data()) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[at++]) << (8 * b);
    }
    std::memcpy(&v, &bits, sizeof(v));
  }
  return m;
}

void write_snapshot_file(const DenseMatrix& m, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_snapshot_file: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write_snapshot_file: short write to " + path.string());
}

DenseMatrix read_snapshot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_snapshot_file: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace sosd
