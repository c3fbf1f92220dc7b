#include "treepose/pgm.hpp"

#include <filesystem>
#include <fstream>

#include "treepose/tensor.hpp"

namespace treepose {

void write_pgm(const std::string& path, const GrayImage& img) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + tmp);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw DataError("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open image file " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw DataError(path + " is not a binary PGM");
  auto next_int = [&]() {
    // Skip whitespace and '#' comment lines.
    int c;
    while ((c = is.peek()) != EOF && (std::isspace(c) || c == '#')) {
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else {
        is.get();
      }
    }
    int v;
    if (!(is >> v)) throw DataError("malformed PGM header in " + path);
    return v;
  };
  GrayImage img;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw DataError(path + ": only maxval 255 is supported");
  is.get();  // single whitespace after header
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw DataError(path + " truncated");
  return img;
}

}  // namespace treepose
