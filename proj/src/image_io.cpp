#include "cycorr/image_io.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

struct PngReader {
  png_image image{};
  PngReader() {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;
};

std::vector<std::uint8_t> decode(const std::filesystem::path& path, png_uint_32 format,
                                 std::uint32_t& height, std::uint32_t& width) {
  if (!std::filesystem::exists(path)) throw IngestionError("missing file " + path.string());
  PngReader reader;
  if (!png_image_begin_read_from_file(&reader.image, path.c_str()))
    throw IngestionError("cannot decode PNG " + path.string() + ": " + reader.image.message);
  reader.image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(reader.image));
  if (!png_image_finish_read(&reader.image, nullptr, buffer.data(), 0, nullptr))
    throw IngestionError("cannot decode PNG " + path.string() + ": " + reader.image.message);
  height = reader.image.height;
  width = reader.image.width;
  return buffer;
}

void encode(const std::filesystem::path& path, png_uint_32 format, std::uint32_t height,
            std::uint32_t width, const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
    throw IngestionError("cannot write PNG " + path.string() + ": " + image.message);
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
  RgbImage img;
  img.pixels = decode(path, PNG_FORMAT_RGB, img.height, img.width);
  return img;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  if (image.pixels.size() != image.pixel_count() * 3) throw DimensionError("RGB buffer size mismatch");
  encode(path, PNG_FORMAT_RGB, image.height, image.width, image.pixels.data());
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  BinaryMask mask;
  mask.resolution = Resolution::Image;
  auto gray = decode(path, PNG_FORMAT_GRAY, mask.height, mask.width);
  mask.bits.resize(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) mask.bits[i] = gray[i] > 127 ? 1 : 0;
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> gray(mask.bits.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  encode(path, PNG_FORMAT_GRAY, mask.height, mask.width, gray.data());
}

void write_score_pfm(const std::filesystem::path& path, std::span<const double> values,
                     std::uint32_t height, std::uint32_t width) {
  if (values.size() != std::size_t{height} * width) throw DimensionError("score map size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "Pf\n" << width << ' ' << height << "\n-1.0\n";
  for (std::uint32_t r = height; r-- > 0;) {
    for (std::uint32_t c = 0; c < width; ++c) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[std::size_t{r} * width + c]));
      const char bytes[4] = {char(bits & 0xFF), char((bits >> 8) & 0xFF), char((bits >> 16) & 0xFF),
                             char((bits >> 24) & 0xFF)};
      out.write(bytes, 4);
    }
  }
}

}  // namespace cycorr
