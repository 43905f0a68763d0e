#include "cycorr/descriptor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'F', 'D', 'G'};
constexpr std::uint8_t kFlagSaliency = 0x1;

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_raw(std::span<const char> s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(bytes_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("unexpected end of file");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestionError("short write to " + path.string());
}

// Half-open pixel range owned by patch index `p` along one axis.
std::pair<std::uint32_t, std::uint32_t> cell_range(std::uint32_t p, std::uint32_t patches,
                                                   std::uint32_t stride, std::uint32_t pixels) {
  const std::uint32_t lo = p * stride;
  const std::uint32_t hi = (p + 1 == patches) ? pixels : std::min(pixels, (p + 1) * stride);
  return {lo, hi};
}

std::uint32_t owning_patch(std::uint32_t pixel, std::uint32_t patches, std::uint32_t stride) {
  return std::min(pixel / stride, patches - 1);
}

}  // namespace

DescriptorGrid::DescriptorGrid(std::uint32_t height_patches, std::uint32_t width_patches,
                               std::uint32_t dim, std::uint32_t patch_size, std::uint32_t stride,
                               ImageSize source_image, std::vector<float> data,
                               std::optional<std::vector<float>> saliency)
    : height_(height_patches),
      width_(width_patches),
      dim_(dim),
      patch_size_(patch_size),
      stride_(stride),
      image_(source_image),
      data_(std::move(data)),
      saliency_(std::move(saliency)) {
  if (height_ == 0 || width_ == 0 || dim_ == 0)
    throw DimensionError("descriptor grid dimensions must be positive");
  if (stride_ == 0 || patch_size_ == 0) throw DimensionError("patch size and stride must be positive");
  if (std::uint64_t{height_ - 1} * stride_ >= image_.height ||
      std::uint64_t{width_ - 1} * stride_ >= image_.width)
    throw DimensionError("source image too small for the patch grid");
  if (data_.size() != patch_count() * dim_)
    throw DimensionError("descriptor payload length does not match grid dimensions");
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); }))
    throw DataError("descriptor grid contains non-finite values");
  if (saliency_) {
    if (saliency_->size() != patch_count()) throw DimensionError("saliency length mismatch");
    for (float s : *saliency_)
      if (!(s >= 0.0f && s <= 1.0f)) throw DataError("saliency values must lie in [0,1]");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

bool DepthMap::valid(std::uint32_t r, std::uint32_t c) const {
  const float v = at(r, c);
  return std::isfinite(v) && v >= 0.0f;
}

DescriptorGrid read_descriptor_file(const std::filesystem::path& path) {
  ByteReader in(slurp(path));
  std::array<char, 4> magic{};
  for (auto& ch : magic) ch = static_cast<char>(in.u8());
  if (magic != kMagic) throw FormatError("bad magic in " + path.string());
  const std::uint8_t version = in.u8();
  if (version != kDescriptorFormatVersion)
    throw FormatError("unsupported descriptor format version " + std::to_string(version));
  const std::uint8_t flags = in.u8();
  if ((flags & ~kFlagSaliency) != 0) throw FormatError("unknown flag bits set");

  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t dim = in.u32();
  const std::uint32_t patch = in.u32();
  const std::uint32_t stride = in.u32();
  const std::uint32_t img_h = in.u32();
  const std::uint32_t img_w = in.u32();
  if (h == 0 || w == 0 || dim == 0) throw FormatError("zero grid dimension in header");

  const std::uint64_t n_desc = std::uint64_t{h} * w * dim;
  const std::uint64_t n_sal = (flags & kFlagSaliency) ? std::uint64_t{h} * w : 0;
  const std::uint64_t expected = (n_desc + n_sal) * 4;
  if (in.remaining() < expected) throw FormatError("truncated descriptor payload in " + path.string());
  if (in.remaining() > expected) throw FormatError("trailing bytes after descriptor payload");

  std::vector<float> data(n_desc);
  for (auto& v : data) v = in.f32();
  std::optional<std::vector<float>> saliency;
  if (n_sal > 0) {
    saliency.emplace(n_sal);
    for (auto& v : *saliency) v = in.f32();
  }
  try {
    return DescriptorGrid(h, w, dim, patch, stride, {img_h, img_w}, std::move(data), std::move(saliency));
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent header: ") + e.what());
  }
}

void write_descriptor_file(const std::filesystem::path& path, const DescriptorGrid& grid) {
  ByteWriter out;
  out.put_raw(kMagic);
  out.put_u8(kDescriptorFormatVersion);
  out.put_u8(grid.saliency() ? kFlagSaliency : 0);
  out.put_u32(grid.height_patches());
  out.put_u32(grid.width_patches());
  out.put_u32(grid.dim());
  out.put_u32(grid.patch_size());
  out.put_u32(grid.stride());
  out.put_u32(grid.source_image_size().height);
  out.put_u32(grid.source_image_size().width);
  for (float v : grid.data()) out.put_f32(v);
  if (grid.saliency())
    for (float v : *grid.saliency()) out.put_f32(v);
  dump(path, out.bytes());
}

BinaryMask downsample_mask(const BinaryMask& mask, const DescriptorGrid& grid, double coverage_threshold) {
  const ImageSize img = grid.source_image_size();
  if (mask.height != img.height || mask.width != img.width)
    throw DimensionError("mask size does not match the grid's source image");
  if (!(coverage_threshold > 0.0 && coverage_threshold <= 1.0))
    throw ConfigError("coverage threshold must lie in (0, 1]");

  const std::uint32_t gh = grid.height_patches();
  const std::uint32_t gw = grid.width_patches();
  const std::uint32_t s = grid.stride();
  BinaryMask out(gh, gw, Resolution::Grid);
  for (std::uint32_t r = 0; r < gh; ++r) {
    const auto [y0, y1] = cell_range(r, gh, s, img.height);
    for (std::uint32_t c = 0; c < gw; ++c) {
      const auto [x0, x1] = cell_range(c, gw, s, img.width);
      std::size_t on = 0;
      for (std::uint32_t y = y0; y < y1; ++y)
        for (std::uint32_t x = x0; x < x1; ++x) on += mask.at(y, x) ? 1 : 0;
      const double area = double(y1 - y0) * double(x1 - x0);
      out.set(r, c, double(on) >= coverage_threshold * area);
    }
  }
  return out;
}

BinaryMask upsample_mask(const BinaryMask& mask, ImageSize target, std::uint32_t stride) {
  if (mask.height == 0 || mask.width == 0 || stride == 0) throw DimensionError("empty grid mask");
  if (std::uint64_t{mask.height - 1} * stride >= target.height ||
      std::uint64_t{mask.width - 1} * stride >= target.width)
    throw DimensionError("target size too small for grid mask");
  BinaryMask out(target.height, target.width, Resolution::Image);
  for (std::uint32_t y = 0; y < target.height; ++y) {
    const std::uint32_t r = owning_patch(y, mask.height, stride);
    for (std::uint32_t x = 0; x < target.width; ++x)
      out.set(y, x, mask.at(r, owning_patch(x, mask.width, stride)));
  }
  return out;
}

std::vector<double> upsample_map(std::span<const double> grid_values, std::uint32_t grid_height,
                                 std::uint32_t grid_width, ImageSize target, std::uint32_t stride) {
  if (grid_values.size() != std::size_t{grid_height} * grid_width)
    throw DimensionError("grid map length mismatch");
  if (grid_height == 0 || grid_width == 0 || stride == 0) throw DimensionError("empty grid map");
  std::vector<double> out(std::size_t{target.height} * target.width);
  for (std::uint32_t y = 0; y < target.height; ++y) {
    const std::uint32_t r = owning_patch(y, grid_height, stride);
    for (std::uint32_t x = 0; x < target.width; ++x)
      out[std::size_t{y} * target.width + x] =
          grid_values[std::size_t{r} * grid_width + owning_patch(x, grid_width, stride)];
  }
  return out;
}

std::optional<BinaryMask> saliency_mask(const DescriptorGrid& grid, double threshold) {
  if (!grid.saliency()) return std::nullopt;
  BinaryMask out(grid.height_patches(), grid.width_patches(), Resolution::Grid);
  const auto& sal = *grid.saliency();
  for (std::size_t i = 0; i < sal.size(); ++i) out.bits[i] = sal[i] > threshold ? 1 : 0;
  return out;
}

DepthMap read_depth_file(const std::filesystem::path& path) {
  ByteReader in(slurp(path));
  DepthMap d;
  d.height = in.u32();
  d.width = in.u32();
  d.intrinsics.fx = in.f32();
  d.intrinsics.fy = in.f32();
  d.intrinsics.cx = in.f32();
  d.intrinsics.cy = in.f32();
  if (d.height == 0 || d.width == 0) throw FormatError("zero depth map dimension");
  if (!(d.intrinsics.fx > 0.0 && d.intrinsics.fy > 0.0)) throw DataError("focal lengths must be positive");
  const std::uint64_t n = std::uint64_t{d.height} * d.width;
  if (in.remaining() != n * 4) throw FormatError("depth payload length mismatch in " + path.string());
  d.values.resize(n);
  for (auto& v : d.values) v = in.f32();
  return d;
}

void write_depth_file(const std::filesystem::path& path, const DepthMap& depth) {
  if (depth.values.size() != std::size_t{depth.height} * depth.width)
    throw DimensionError("depth payload length mismatch");
  ByteWriter out;
  out.put_u32(depth.height);
  out.put_u32(depth.width);
  out.put_f32(static_cast<float>(depth.intrinsics.fx));
  out.put_f32(static_cast<float>(depth.intrinsics.fy));
  out.put_f32(static_cast<float>(depth.intrinsics.cx));
  out.put_f32(static_cast<float>(depth.intrinsics.cy));
  for (float v : depth.values) out.put_f32(v);
  dump(path, out.bytes());
}

}  // namespace cycorr
