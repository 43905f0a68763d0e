#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace cycorr {

struct ImageSize {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Dense field of patch descriptors laid out row-major, patch-major,
/// descriptor-minor, together with the image geometry it was computed from.
///
/// Patch (r, c) owns the image pixels in rows [r*stride, (r+1)*stride) and
/// columns [c*stride, (c+1)*stride); the last row and column of patches also
/// own whatever image pixels remain past the final stride cell.
class DescriptorGrid {
 public:
  DescriptorGrid(std::uint32_t height_patches, std::uint32_t width_patches, std::uint32_t dim,
                 std::uint32_t patch_size, std::uint32_t stride, ImageSize source_image,
                 std::vector<float> data, std::optional<std::vector<float>> saliency = std::nullopt);

  std::uint32_t height_patches() const { return height_; }
  std::uint32_t width_patches() const { return width_; }
  std::uint32_t dim() const { return dim_; }
  std::uint32_t patch_size() const { return patch_size_; }
  std::uint32_t stride() const { return stride_; }
  ImageSize source_image_size() const { return image_; }
  std::size_t patch_count() const { return std::size_t{height_} * width_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> descriptor(std::size_t patch) const {
    return {data_.data() + patch * dim_, dim_};
  }
  const std::optional<std::vector<float>>& saliency() const { return saliency_; }

  friend bool operator==(const DescriptorGrid&, const DescriptorGrid&) = default;

 private:
  std::uint32_t height_;
  std::uint32_t width_;
  std::uint32_t dim_;
  std::uint32_t patch_size_;
  std::uint32_t stride_;
  ImageSize image_;
  std::vector<float> data_;
  std::optional<std::vector<float>> saliency_;
};

enum class Resolution : std::uint8_t { Image, Grid };

struct BinaryMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major
  Resolution resolution = Resolution::Image;

  BinaryMask() = default;
  BinaryMask(std::uint32_t h, std::uint32_t w, Resolution res, bool fill = false)
      : height(h), width(w), bits(std::size_t{h} * w, fill ? 1 : 0), resolution(res) {}

  std::size_t size() const { return bits.size(); }
  bool at(std::uint32_t r, std::uint32_t c) const { return bits[std::size_t{r} * width + c] != 0; }
  void set(std::uint32_t r, std::uint32_t c, bool v) { bits[std::size_t{r} * width + c] = v ? 1 : 0; }
  std::size_t count() const;
  bool any() const { return count() > 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Metric depth image. NaN marks pixels without a valid reading.
struct DepthMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> values;
  CameraIntrinsics intrinsics;

  float at(std::uint32_t r, std::uint32_t c) const { return values[std::size_t{r} * width + c]; }
  bool valid(std::uint32_t r, std::uint32_t c) const;
};

inline constexpr std::uint8_t kDescriptorFormatVersion = 1;

DescriptorGrid read_descriptor_file(const std::filesystem::path& path);
void write_descriptor_file(const std::filesystem::path& path, const DescriptorGrid& grid);

// Reduces an image-resolution mask to the patch grid. A patch is set when the
// fraction of set pixels in its stride cell reaches coverage_threshold.
BinaryMask downsample_mask(const BinaryMask& mask, const DescriptorGrid& grid,
                           double coverage_threshold = 0.5);

// Nearest-neighbour expansion of a grid mask back to image resolution.
BinaryMask upsample_mask(const BinaryMask& mask, ImageSize target, std::uint32_t stride);

// Same expansion for real-valued per-patch maps (score maps).
std::vector<double> upsample_map(std::span<const double> grid_values, std::uint32_t grid_height,
                                 std::uint32_t grid_width, ImageSize target, std::uint32_t stride);

// Target-region mask derived from the optional saliency channel (> threshold).
std::optional<BinaryMask> saliency_mask(const DescriptorGrid& grid, double threshold = 0.5);

DepthMap read_depth_file(const std::filesystem::path& path);
void write_depth_file(const std::filesystem::path& path, const DepthMap& depth);

}  // namespace cycorr
