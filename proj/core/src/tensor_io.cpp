#include "dsc/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "dsc/error.hpp"

namespace dsc {

namespace {

constexpr uint32_t kDsqtVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("truncated DSQT file: " + path.string());
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_dsqt(const std::filesystem::path& path, const Tensor<float>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os.write("DSQT", 4);
  put_u32(os, kDsqtVersion);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    put_u32(os, static_cast<uint32_t>(t.dim(i)));
  }
  static_assert(sizeof(float) == 4);
  for (float v : t.values()) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor<float> read_dsqt(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "DSQT", 4) != 0) {
    throw IoError("not a DSQT file: " + path.string());
  }
  const uint32_t version = get_u32(is, path);
  if (version != kDsqtVersion) {
    throw IoError("unsupported DSQT version " + std::to_string(version) +
                  ": " + path.string());
  }
  const uint32_t rank = get_u32(is, path);
  std::vector<int64_t> dims(rank);
  for (uint32_t i = 0; i < rank; ++i) {
    dims[i] = static_cast<int64_t>(get_u32(is, path));
  }
  Shape shape(dims);
  std::vector<float> data(static_cast<size_t>(shape.numel()));
  for (float& v : data) {
    const uint32_t bits = get_u32(is, path);
    std::memcpy(&v, &bits, 4);
  }
  return Tensor<float>::from_data(std::move(shape), std::move(data));
}

}  // namespace dsc
