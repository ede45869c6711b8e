#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dga/tensor.hpp"

namespace dga {

// Raster with interleaved samples, row-major, up to 16 bits per sample.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 (PGM) or 3 (PPM)
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> samples;

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary P5 (grey) / P6 (RGB) netpbm. maxval up to 255 uses one byte per
// sample; larger values use two bytes, most significant first.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

// H x W x C tensor of samples divided by maxval.
Tensor<float> to_unit_tensor(const Image& image);

// Rounds values in [0, 1] (clamped) to integer samples at the given maxval.
template <typename T>
Image from_unit_tensor(const Tensor<T>& tensor, std::uint32_t maxval = 255);

}  // namespace dga
