#pragma once

// Binary PGM (P5) images, 8- or 16-bit. 16-bit samples are big-endian as the
// format requires.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hypelift {

struct GrayImage {
  int height = 0;
  int width = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;  // row-major
};

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace hypelift
