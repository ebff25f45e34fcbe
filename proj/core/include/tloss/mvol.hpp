#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "tloss/volume.hpp"

namespace tloss {

// MVOL layout, little-endian, no padding:
//   "MVOL" | u32 version=1 | u32 d,h,w | f32 spacing d,h,w | u8 dtype | payload
// dtype 0 stores one u8 per voxel (mask), dtype 1 one f32 per voxel (field).

inline constexpr std::uint32_t kMvolVersion = 1;
inline constexpr std::size_t kMvolHeaderBytes = 33;

enum class MvolDtype : std::uint8_t { kMaskU8 = 0, kFieldF32 = 1 };

struct MvolHeader {
  std::uint32_t version = kMvolVersion;
  Dims dims;
  Spacing spacing;
  MvolDtype dtype = MvolDtype::kFieldF32;
};

/// Field values are narrowed to f32; values that do not fit raise DomainError.
std::vector<std::uint8_t> encode_mvol(const Volume3D& v);
std::vector<std::uint8_t> encode_mvol(const ProbabilityMask& v);
std::vector<std::uint8_t> encode_mvol(const BinaryMask& m);

MvolHeader decode_mvol_header(std::span<const std::uint8_t> bytes);

using AnyVolume = std::variant<Volume3D, BinaryMask>;

/// Decodes by the dtype stored in the header.
AnyVolume decode_mvol(std::span<const std::uint8_t> bytes);

void save_volume(const std::filesystem::path& path, const Volume3D& v);
void save_volume(const std::filesystem::path& path, const ProbabilityMask& v);
void save_volume(const std::filesystem::path& path, const BinaryMask& m);

AnyVolume load_volume(const std::filesystem::path& path);

// Typed loads: a dtype that does not match the requested type is a ParseError.
Volume3D load_field(const std::filesystem::path& path);
ProbabilityMask load_probability(const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);

/// Exact float narrowing used by the writer; exposed so generators can keep
/// in-memory data identical to what a save/load cycle returns.
Volume3D round_to_f32(const Volume3D& v);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace tloss
