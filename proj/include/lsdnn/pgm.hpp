#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lsdnn/field.hpp"

namespace lsdnn {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major
};

// P5 (8- or 16-bit, big-endian samples) and P2 files.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// 16-bit min-max scaled export; writes "<path>.scale.txt" with min/max.
void export_pgm16(const std::filesystem::path& path, const RealField& field);

// Corner-aligned bilinear resampling of an image to ny x nx samples.
std::vector<double> resample_bilinear(const GrayImage& image, std::size_t ny, std::size_t nx);

}  // namespace lsdnn
