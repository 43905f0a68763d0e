#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cycorr/descriptor_io.hpp"

namespace cycorr {

// 8-bit interleaved RGB image.
struct RgbImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  std::size_t pixel_count() const { return std::size_t{height} * width; }
  const std::uint8_t* at(std::uint32_t r, std::uint32_t c) const {
    return pixels.data() + (std::size_t{r} * width + c) * 3;
  }
};

RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

// Masks are stored as 8-bit grayscale, 0 = background and 255 = foreground.
// On read, any value above 127 counts as foreground.
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

// Grayscale portable float map ("Pf"), little-endian, bottom-to-top rows.
void write_score_pfm(const std::filesystem::path& path, std::span<const double> values,
                     std::uint32_t height, std::uint32_t width);

}  // namespace cycorr
