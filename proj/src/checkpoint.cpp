#include "treepose/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace treepose {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', '1'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw DataError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& tensors) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint file " + tmp);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      if (t.name.size() > 0xffff) throw DataError("tensor name too long");
      write_pod(os, static_cast<uint16_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      write_pod(os, static_cast<uint8_t>(t.dims.size()));
      std::size_t count = 1;
      for (int d : t.dims) {
        write_pod(os, static_cast<uint32_t>(d));
        count *= static_cast<std::size_t>(d);
      }
      if (count != t.values.size())
        throw DataError("tensor '" + t.name + "' dims do not match value count");
      os.write(reinterpret_cast<const char*>(t.values.data()),
               static_cast<std::streamsize>(count * sizeof(float)));
    }
    if (!os) throw DataError("write failure on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint file " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad checkpoint magic in " + path);
  const uint32_t version = read_pod<uint32_t>(is, "version");
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const uint32_t count = read_pod<uint32_t>(is, "tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint16_t nlen = read_pod<uint16_t>(is, "name length");
    t.name.resize(nlen);
    is.read(t.name.data(), nlen);
    if (!is) throw DataError("checkpoint truncated while reading name");
    const uint8_t rank = read_pod<uint8_t>(is, "rank");
    std::size_t cnt = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t extent = read_pod<uint32_t>(is, "dim");
      t.dims.push_back(static_cast<int>(extent));
      cnt *= extent;
    }
    t.values.resize(cnt);
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(cnt * sizeof(float)));
    if (!is)
      throw DataError("checkpoint truncated mid-tensor ('" + t.name + "')");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace treepose
