#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latdis/slice.hpp"

namespace latdis {

// CRC-32 (IEEE, reflected, poly 0xEDB88320).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Writes bytes to path via a temporary file and rename, so failed runs
// never leave partial output behind.
void atomic_write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void atomic_write_file(const std::string& path, const std::string& text);

// Dataset container format, little-endian:
//   magic "LDSD" | version u16 | height u16 | width u16
//   | train count u32 | validation count u32 | test count u32
//   | records | crc32 of all preceding bytes.
// Record: subject u32 | slice index u16 | lesion_px u32
//   | mask bitmap (packed bits, row-major, LSB first) | pixels f32.
// Round-trips are bit-exact. Bad magic/version, short files and checksum
// mismatches raise FormatError, TruncationError and ChecksumError.
void save_dataset(const DatasetSplit& split, const std::string& path);
DatasetSplit load_dataset(const std::string& path);

std::vector<std::uint8_t> serialize_dataset(const DatasetSplit& split);
DatasetSplit parse_dataset(std::span<const std::uint8_t> bytes, const std::string& origin);

}  // namespace latdis
