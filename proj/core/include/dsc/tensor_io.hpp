#pragma once

#include <filesystem>

#include "dsc/tensor.hpp"

namespace dsc {

// Raw tensor file, format "DSQT": magic bytes `DSQT`, u32 LE version,
// u32 LE rank, u32 LE extents, then little-endian 32-bit floats.
void write_dsqt(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> read_dsqt(const std::filesystem::path& path);

}  // namespace dsc
