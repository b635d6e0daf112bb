#pragma once

#include <cstdint>
#include <filesystem>

#include "lsdnn/field.hpp"

namespace lsdnn {

// LSPR container, little-endian:
//   "LSPR" | u32 version=1 | u8 dtype | 3 reserved zero bytes |
//   u32 ny | u32 nx | f64 dy | f64 dx | row-major payload
enum class LsprType : std::uint8_t {
  Real32 = 0,
  Real64 = 1,
  Complex64 = 2,   // interleaved f32 pairs
  Complex128 = 3,
};

inline constexpr std::uint32_t kLsprVersion = 1;
inline constexpr std::size_t kLsprHeaderBytes = 36;

void save_field(const std::filesystem::path& path, const RealField& field,
                LsprType type = LsprType::Real64);
void save_field(const std::filesystem::path& path, const ComplexField& field,
                LsprType type = LsprType::Complex128);

// Real files only; rejects complex payloads.
RealField load_real_field(const std::filesystem::path& path);
// Complex files; real payloads are promoted with zero imaginary part.
ComplexField load_complex_field(const std::filesystem::path& path);

LsprType peek_field_type(const std::filesystem::path& path);

}  // namespace lsdnn
