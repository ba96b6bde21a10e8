#pragma once

// PNG (libpng simplified API) and binary PPM (P6) in and out, plus the
// 8-bit <-> [0, 1] tensor mapping used by the codec.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "numerics.hpp"

namespace latentsearch::image_io {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // interleaved RGB, row-major

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Sniffs the PNG signature or "P6"; anything else is kImageDecode.
RgbImage decode_image(std::span<const uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);

std::vector<uint8_t> encode_png(const RgbImage& image);
std::vector<uint8_t> encode_ppm(const RgbImage& image);

/// [1, 3, H, W], v / 255.
numerics::Tensor to_tensor(const RgbImage& image);
/// Clamps to [0, 1] then rounds v * 255.
RgbImage from_tensor(const numerics::Tensor& tensor);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);

}  // namespace latentsearch::image_io
