#include "synthetic.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cycorr::testing {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kProtoCount> kPalette = {{
    {20, 20, 20},
    {210, 210, 210},
    {220, 40, 40},
    {40, 200, 40},
    {40, 60, 220},
}};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

Rect random_rect(Rng& rng, std::uint32_t grid, std::uint32_t h, std::uint32_t w) {
  return {1 + rng.below(grid - h - 1), 1 + rng.below(grid - w - 1), h, w};
}

SceneLayout random_layout(Rng& rng, std::uint32_t part_h, std::uint32_t part_w, bool distractor) {
  SceneLayout l;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::uint32_t bh = part_h + 2 + rng.below(5), bw = part_w + 2 + rng.below(5);
    l.body = random_rect(rng, l.grid, bh, bw);
    l.part = {l.body.row + 1 + rng.below(bh - part_h - 1), l.body.col + 1 + rng.below(bw - part_w - 1), part_h,
              part_w};
    l.has_distractor = distractor;
    if (!distractor) return l;
    l.distractor = random_rect(rng, l.grid, 4 + rng.below(5), 4 + rng.below(5));
    if (!l.distractor.overlaps(l.body, 1)) return l;
  }
  throw std::runtime_error("could not place synthetic layout");
}

bool inside(const Rect& r, std::uint32_t row, std::uint32_t col) {
  return row >= r.row && row < r.row + r.height && col >= r.col && col < r.col + r.width;
}

}  // namespace

double Rng::normal() {
  // Box-Muller; uniform() can return 0, so shift into (0, 1].
  const double u1 = 1.0 - uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rect::overlaps(const Rect& o, std::uint32_t margin) const {
  return row < o.row + o.height + margin && o.row < row + height + margin && col < o.col + o.width + margin &&
         o.col < col + width + margin;
}

std::vector<std::vector<double>> make_prototypes(std::uint32_t dim, Rng& rng, double max_cos) {
  if (dim < kProtoCount) throw std::invalid_argument("prototype dimension too small");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    // Orthonormal directions perturbed by a small random component.
    std::vector<std::vector<double>> basis;
    while (basis.size() < 2 * kProtoCount && basis.size() < dim) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.normal();
      for (const auto& b : basis) {
        const double d = dot(v, b);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= d * b[i];
      }
      normalize(v);
      basis.push_back(std::move(v));
    }
    std::vector<std::vector<double>> protos(kProtoCount, std::vector<double>(dim));
    for (int p = 0; p < kProtoCount; ++p) {
      for (std::size_t i = 0; i < dim; ++i) protos[p][i] = basis[p][i];
      for (std::size_t i = 0; i < dim; ++i) protos[p][i] += 0.25 * rng.normal() / std::sqrt(double(dim));
      normalize(protos[p]);
    }
    bool ok = true;
    for (int a = 0; a < kProtoCount && ok; ++a)
      for (int b = a + 1; b < kProtoCount && ok; ++b) ok = std::abs(dot(protos[a], protos[b])) <= max_cos;
    if (ok) return protos;
  }
  throw std::runtime_error("could not draw separated prototypes");
}

Scene render_scene(const SceneLayout& layout, const std::vector<std::vector<double>>& protos, double noise_sigma,
                   Rng& rng) {
  const std::uint32_t g = layout.grid, s = layout.stride, dim = static_cast<std::uint32_t>(protos[0].size());
  std::vector<int> labels(std::size_t{g} * g, kBackground);
  for (std::uint32_t r = 0; r < g; ++r)
    for (std::uint32_t c = 0; c < g; ++c) {
      int& l = labels[std::size_t{r} * g + c];
      if (inside(layout.body, r, c)) l = kBody;
      if (inside(layout.part, r, c)) l = (r < layout.part.row + layout.part.height / 2) ? kPartA : kPartB;
      if (layout.has_distractor && inside(layout.distractor, r, c)) l = kDistractor;
    }

  std::vector<float> data(std::size_t{g} * g * dim);
  for (std::size_t p = 0; p < labels.size(); ++p)
    for (std::uint32_t d = 0; d < dim; ++d) {
      const double noise = noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0;
      data[p * dim + d] = static_cast<float>(protos[static_cast<std::size_t>(labels[p])][d] + noise);
    }

  const std::uint32_t size = g * s;
  RgbImage img{size, size, std::vector<std::uint8_t>(std::size_t{size} * size * 3)};
  BinaryMask part(size, size, Resolution::Image);
  for (std::uint32_t y = 0; y < size; ++y)
    for (std::uint32_t x = 0; x < size; ++x) {
      const int l = labels[std::size_t{y / s} * g + x / s];
      for (int ch = 0; ch < 3; ++ch)
        img.pixels[(std::size_t{y} * size + x) * 3 + static_cast<std::size_t>(ch)] =
            kPalette[static_cast<std::size_t>(l)][static_cast<std::size_t>(ch)];
      part.set(y, x, l == kPartA || l == kPartB);
    }
  return {DescriptorGrid(g, g, dim, s, s, {size, size}, std::move(data)), std::move(img), std::move(part),
          std::move(labels)};
}

PlantedPair planted_pair(std::uint64_t seed, double noise_sigma, std::uint32_t dim) {
  Rng rng(seed * 7919 + 17);
  const auto protos = make_prototypes(dim, rng);
  const std::uint32_t part_h = 6 + 2 * rng.below(3), part_w = 4 + rng.below(5);
  const SceneLayout support = random_layout(rng, part_h, part_w, false);
  const SceneLayout target = random_layout(rng, part_h, part_w, true);
  Scene s = render_scene(support, protos, noise_sigma, rng);
  Scene t = render_scene(target, protos, noise_sigma, rng);
  return {std::move(s), std::move(t)};
}

void write_object(const fs::path& dir, const Scene& scene, const std::string& affordance) {
  fs::create_directories(dir / "masks");
  write_rgb_png(dir / "image.png", scene.image);
  write_descriptor_file(dir / "descriptors.afdg", scene.grid);
  write_mask_png(dir / "masks" / (affordance + ".png"), scene.part);
}

fs::path write_dataset(const fs::path& root, std::uint64_t seed,
                       const std::vector<std::pair<std::string, std::string>>& class_and_affordance,
                       double noise_sigma) {
  Rng rng(seed * 104729 + 3);
  const auto protos = make_prototypes(16, rng);
  std::vector<ObjectRecord> records;
  for (std::size_t i = 0; i < class_and_affordance.size(); ++i) {
    const auto& [cls, aff] = class_and_affordance[i];
    const std::uint32_t part_h = 6 + 2 * rng.below(3), part_w = 4 + rng.below(5);
    const Scene scene = render_scene(random_layout(rng, part_h, part_w, i % 2 == 1), protos, noise_sigma, rng);
    ObjectRecord r;
    r.object_id = "obj" + std::to_string(i);
    r.class_name = cls;
    r.directory = root / r.object_id;
    r.affordances = {aff};
    write_object(r.directory, scene, aff);
    records.push_back(std::move(r));
  }
  const fs::path index = root / "index.txt";
  write_index(index, records);
  return index;
}

fs::path write_planted_suite(const fs::path& root, std::size_t count, double noise_sigma) {
  std::vector<ObjectRecord> records;
  for (std::size_t i = 0; i < count; ++i) {
    const PlantedPair pair = planted_pair(i, noise_sigma);
    const std::string cls = fmt::format("c{:02}", i);
    for (const auto& [suffix, scene] : {std::pair{"_s", &pair.support}, std::pair{"_t", &pair.target}}) {
      ObjectRecord r{cls + suffix, cls, root / (cls + suffix), {"grasp"}};
      write_object(r.directory, *scene, "grasp");
      records.push_back(std::move(r));
    }
  }
  const fs::path index = root / "index.txt";
  write_index(index, records);
  return index;
}

}  // namespace cycorr::testing
