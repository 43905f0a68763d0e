#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "cycorr/descriptor_io.hpp"
#include "cycorr/errors.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace cycorr;
using cycorr::testing::Rng;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

// Hand-assembled file: header (h, w, dim) plus `count` floats.
std::string afdg_bytes(std::uint32_t h, std::uint32_t w, std::uint32_t dim, std::size_t count) {
  std::string b = "AFDG";
  b.push_back(1);
  b.push_back(0);
  for (std::uint32_t v : {h, w, dim, 1u, 1u, h, w}) put_u32(b, v);
  for (std::size_t i = 0; i < count; ++i) put_f32(b, static_cast<float>(i) * 0.5f - 2.0f);
  return b;
}

bool bit_identical(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_SUITE("descriptor-io") {
  TEST_CASE("hand-assembled 2x2x3 file reads back every value") {
    TempDir dir("afdg_hand");
    write_bytes(dir / "g.afdg", afdg_bytes(2, 2, 3, 12));
    const DescriptorGrid g = read_descriptor_file(dir / "g.afdg");
    CHECK(g.height_patches() == 2);
    CHECK(g.width_patches() == 2);
    CHECK(g.dim() == 3);
    CHECK(!g.saliency().has_value());
    for (std::size_t i = 0; i < 12; ++i) CHECK(g.data()[i] == static_cast<float>(i) * 0.5f - 2.0f);
    CHECK(g.descriptor(3)[0] == g.data()[9]);
  }

  TEST_CASE("write then read is bit-identical, with and without saliency") {
    TempDir dir("afdg_roundtrip");
    Rng rng(1);
    for (int inst = 0; inst < 20; ++inst) {
      const std::uint32_t h = 1 + rng.below(6), w = 1 + rng.below(6), dim = 1 + rng.below(9);
      const std::uint32_t stride = 1 + rng.below(8);
      std::vector<float> data(std::size_t{h} * w * dim);
      for (float& v : data) v = static_cast<float>(rng.normal() * 1e3);
      data[0] = -0.0f;
      if (data.size() > 1) data[1] = std::numeric_limits<float>::denorm_min();
      std::optional<std::vector<float>> sal;
      if (inst % 2) {
        sal.emplace(std::size_t{h} * w);
        for (float& s : *sal) s = static_cast<float>(rng.uniform());
      }
      const DescriptorGrid g(h, w, dim, stride, stride, {h * stride + rng.below(stride), w * stride}, data, sal);
      write_descriptor_file(dir / "g.afdg", g);
      const DescriptorGrid back = read_descriptor_file(dir / "g.afdg");
      CHECK(bit_identical(back.data(), g.data()));
      CHECK(back.source_image_size() == g.source_image_size());
      CHECK(back.stride() == g.stride());
      CHECK(back.saliency().has_value() == g.saliency().has_value());
      if (sal) CHECK(bit_identical(*back.saliency(), *g.saliency()));
    }
  }

  TEST_CASE("file layout is little-endian with the documented header") {
    TempDir dir("afdg_layout");
    const DescriptorGrid g(1, 2, 1, 8, 8, {8, 16}, {1.0f, -1.0f}, std::vector<float>{0.25f, 1.0f});
    write_descriptor_file(dir / "g.afdg", g);
    const std::string b = read_bytes(dir / "g.afdg");
    REQUIRE(b.size() == 6 + 28 + 8 + 8);
    CHECK(b.substr(0, 4) == "AFDG");
    CHECK(b[4] == 1);
    CHECK(b[5] == 1);
    CHECK(static_cast<unsigned char>(b[10]) == 2);  // width_patches low byte
    CHECK(static_cast<unsigned char>(b[6 + 24 + 0]) == 16);  // image_W
    // 1.0f = 0x3f800000 stored low byte first
    CHECK(static_cast<unsigned char>(b[34 + 3]) == 0x3f);
    CHECK(static_cast<unsigned char>(b[34 + 2]) == 0x80);
  }

  TEST_CASE("malformed files are rejected") {
    TempDir dir("afdg_bad");
    SUBCASE("declared dim 3 but only 11 floats") {
      write_bytes(dir / "g.afdg", afdg_bytes(2, 2, 3, 11));
      CHECK_THROWS_AS(read_descriptor_file(dir / "g.afdg"), FormatError);
    }
    SUBCASE("trailing bytes") {
      write_bytes(dir / "g.afdg", afdg_bytes(2, 2, 3, 13));
      CHECK_THROWS_AS(read_descriptor_file(dir / "g.afdg"), FormatError);
    }
    SUBCASE("bad magic") {
      std::string b = afdg_bytes(2, 2, 3, 12);
      b[0] = 'X';
      write_bytes(dir / "g.afdg", b);
      CHECK_THROWS_AS(read_descriptor_file(dir / "g.afdg"), FormatError);
    }
    SUBCASE("unknown version") {
      std::string b = afdg_bytes(2, 2, 3, 12);
      b[4] = 2;
      write_bytes(dir / "g.afdg", b);
      CHECK_THROWS_AS(read_descriptor_file(dir / "g.afdg"), FormatError);
    }
    SUBCASE("non-finite value") {
      std::string b = afdg_bytes(1, 1, 1, 0);
      put_f32(b, std::numeric_limits<float>::quiet_NaN());
      write_bytes(dir / "g.afdg", b);
      CHECK_THROWS_AS(read_descriptor_file(dir / "g.afdg"), DataError);
    }
    SUBCASE("missing file") {
      CHECK_THROWS_AS(read_descriptor_file(dir / "absent.afdg"), IngestionError);
    }
  }

  TEST_CASE("grid invariants are enforced on construction") {
    CHECK_THROWS_AS(DescriptorGrid(0, 1, 1, 1, 1, {1, 1}, {}), DimensionError);
    CHECK_THROWS_AS(DescriptorGrid(1, 1, 2, 1, 1, {1, 1}, {1.0f}), DimensionError);
    CHECK_THROWS_AS(DescriptorGrid(1, 1, 1, 1, 1, {1, 1}, {INFINITY}), DataError);
    CHECK_THROWS_AS(DescriptorGrid(1, 1, 1, 1, 1, {1, 1}, {1.0f}, std::vector<float>{1.5f}), DataError);
  }

  TEST_CASE("downsample: all true, all false, one quadrant") {
    const DescriptorGrid g(2, 2, 1, 8, 8, {16, 16}, {1, 2, 3, 4});
    CHECK(downsample_mask(BinaryMask(16, 16, Resolution::Image, true), g).count() == 4);
    CHECK(downsample_mask(BinaryMask(16, 16, Resolution::Image, false), g).count() == 0);
    BinaryMask quad(16, 16, Resolution::Image);
    for (std::uint32_t y = 8; y < 16; ++y)
      for (std::uint32_t x = 0; x < 8; ++x) quad.set(y, x, true);
    const BinaryMask m = downsample_mask(quad, g);
    CHECK(m.count() == 1);
    CHECK(m.at(1, 0));
    CHECK(m.resolution == Resolution::Grid);
  }

  TEST_CASE("downsample: half coverage counts, remainder pixels belong to the last cell") {
    const DescriptorGrid g(1, 2, 1, 4, 4, {4, 10}, {1, 2});
    BinaryMask m(4, 10, Resolution::Image);
    for (std::uint32_t y = 0; y < 2; ++y)
      for (std::uint32_t x = 0; x < 4; ++x) m.set(y, x, true);  // 8 of 16 pixels in cell 0
    for (std::uint32_t y = 0; y < 4; ++y)
      for (std::uint32_t x = 4; x < 6; ++x) m.set(y, x, true);  // 8 of 24 pixels in cell 1 (6 columns wide)
    const BinaryMask d = downsample_mask(m, g);
    CHECK(d.at(0, 0));
    CHECK(!d.at(0, 1));
    CHECK(downsample_mask(m, g, 0.3).at(0, 1));
    CHECK_THROWS_AS(downsample_mask(m, g, 0.0), ConfigError);
    CHECK_THROWS_AS(downsample_mask(BinaryMask(4, 9, Resolution::Image), g), DimensionError);
  }

  TEST_CASE("upsample: single patch becomes a stride block") {
    BinaryMask g(3, 3, Resolution::Grid);
    g.set(1, 2, true);
    const BinaryMask up = upsample_mask(g, {24, 24}, 8);
    CHECK(up.count() == 64);
    for (std::uint32_t y = 8; y < 16; ++y)
      for (std::uint32_t x = 16; x < 24; ++x) CHECK(up.at(y, x));
    CHECK(upsample_mask(BinaryMask(3, 3, Resolution::Grid, true), {24, 24}, 8).count() == 24 * 24);
  }

  TEST_CASE("property: downsample(upsample(m)) == m for random grid masks") {
    Rng rng(2);
    for (int inst = 0; inst < 100; ++inst) {
      const std::uint32_t gh = 1 + rng.below(8), gw = 1 + rng.below(8), s = 1 + rng.below(6);
      const ImageSize img{gh * s + rng.below(s), gw * s + rng.below(s)};
      BinaryMask m(gh, gw, Resolution::Grid);
      for (auto& b : m.bits) b = rng.uniform() < 0.5;
      const DescriptorGrid grid(gh, gw, 1, s, s, img, std::vector<float>(std::size_t{gh} * gw, 1.0f));
      const double coverage = std::array{0.1, 0.5, 1.0}[rng.below(3)];
      CHECK(downsample_mask(upsample_mask(m, img, s), grid, coverage) == m);
    }
  }

  TEST_CASE("property: downsample is monotone in the image mask") {
    Rng rng(3);
    for (int inst = 0; inst < 100; ++inst) {
      const std::uint32_t gh = 1 + rng.below(5), gw = 1 + rng.below(5), s = 1 + rng.below(5);
      const ImageSize img{gh * s + rng.below(s), gw * s + rng.below(s)};
      const DescriptorGrid grid(gh, gw, 1, s, s, img, std::vector<float>(std::size_t{gh} * gw, 1.0f));
      BinaryMask a(img.height, img.width, Resolution::Image);
      for (auto& b : a.bits) b = rng.uniform() < 0.4;
      BinaryMask b = a;
      for (auto& bit : b.bits) bit = bit || rng.uniform() < 0.3;
      const BinaryMask da = downsample_mask(a, grid), db = downsample_mask(b, grid);
      for (std::size_t i = 0; i < da.bits.size(); ++i)
        if (da.bits[i]) CHECK(db.bits[i]);
    }
  }

  TEST_CASE("upsample_map copies patch values over their cells") {
    const std::vector<double> v{0.5, 1.5};
    const auto up = upsample_map(v, 1, 2, {3, 7}, 3);
    REQUIRE(up.size() == 21);
    CHECK(up[2] == 0.5);
    CHECK(up[3] == 1.5);
    CHECK(up[20] == 1.5);
  }

  TEST_CASE("saliency mask uses a strict threshold") {
    const DescriptorGrid g(1, 3, 1, 1, 1, {1, 3}, {1, 1, 1}, std::vector<float>{0.5f, 0.51f, 0.0f});
    const auto m = saliency_mask(g);
    REQUIRE(m.has_value());
    CHECK(m->bits == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(!saliency_mask(DescriptorGrid(1, 1, 1, 1, 1, {1, 1}, {1})).has_value());
  }

  TEST_CASE("depth maps round-trip and NaN marks invalid pixels") {
    TempDir dir("depth");
    DepthMap d{2, 3, {0.5f, NAN, 1.0f, 2.0f, -1.0f, 0.0f}, {500.0, 510.0, 1.5, 0.5}};
    write_depth_file(dir / "d.bin", d);
    const DepthMap back = read_depth_file(dir / "d.bin");
    CHECK(back.height == 2);
    CHECK(back.width == 3);
    CHECK(back.intrinsics.fy == 510.0);
    CHECK(back.at(0, 0) == 0.5f);
    CHECK(!back.valid(0, 1));
    CHECK(!back.valid(1, 1));
    CHECK(back.valid(1, 2));
  }
}
