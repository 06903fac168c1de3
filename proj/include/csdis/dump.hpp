#pragma once

// CSTD binary dump, version 1 (all integers little-endian):
//   0..3   magic "CSTD"
//   4..7   u32 format version (1)
//   8      u8 dtype code (1 = float32, 2 = float64)
//   9      u8 rank
//   10..   rank × u64 dimension sizes
//   then   row-major payload
//
// A SampleSet is a directory holding one CSTD file per role and a
// manifest.json naming them.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csdis/tensor.hpp"

namespace csdis {

inline constexpr std::uint32_t kDumpVersion = 1;

std::vector<std::uint8_t> encode_dump(const Tensor& t);
// Throws FormatError carrying the byte offset of the first bad field.
Tensor decode_dump(std::span<const std::uint8_t> bytes);

void write_dump(const std::filesystem::path& path, const Tensor& t);
Tensor read_dump(const std::filesystem::path& path);

void write_dump(const std::filesystem::path& dir, const SampleSet& set);
SampleSet read_sample_set(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// FNV-1a 64 over the manifest and every member file, in manifest order.
std::string sample_set_digest(const std::filesystem::path& dir);
// Digest the set would have once written with write_dump.
std::string sample_set_digest(const SampleSet& set);

} // namespace csdis
