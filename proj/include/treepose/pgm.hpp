#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace treepose {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major

  uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Binary PGM (P5, maxval 255). Writes go to a temp file renamed on success.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

}  // namespace treepose
