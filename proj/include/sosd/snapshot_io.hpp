#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sosd/matrix.hpp"

namespace sosd {

// Snapshot container: "SOSD" magic, u32 version = 1, u32 rows, u32 cols,
// then rows*cols little-endian f64 payload, row-major. 16 + 8*rows*cols
// bytes total; round-trips bitwise.
std::vector<std::uint8_t> encode_snapshot(const DenseMatrix& m);
DenseMatrix decode_snapshot(const std::vector<std::uint8_t>& bytes);

void write_snapshot_file(const DenseMatrix& m, const std::filesystem::path& path);
DenseMatrix read_snapshot_file(const std::filesystem::path& path);

}  // namespace sosd
