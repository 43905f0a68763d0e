#include "cycorr/permutohedral.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

// Lattice vertices are keyed by their first d integer coordinates (the last
// one is implied because coordinates sum to zero).
class VertexTable {
 public:
  explicit VertexTable(std::size_t d) : d_(d) {}

  int find(const std::vector<short>& key, bool insert) {
    std::string bytes(reinterpret_cast<const char*>(key.data()), d_ * sizeof(short));
    auto it = index_.find(bytes);
    if (it != index_.end()) return it->second;
    if (!insert) return -1;
    const int id = static_cast<int>(keys_.size() / d_);
    keys_.insert(keys_.end(), key.begin(), key.begin() + static_cast<std::ptrdiff_t>(d_));
    index_.emplace(std::move(bytes), id);
    return id;
  }

  std::size_t size() const { return keys_.size() / d_; }
  std::vector<short> key(std::size_t i) const {
    return {keys_.begin() + static_cast<std::ptrdiff_t>(i * d_),
            keys_.begin() + static_cast<std::ptrdiff_t>((i + 1) * d_)};
  }

 private:
  std::size_t d_;
  std::vector<short> keys_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace

PermutohedralLattice::PermutohedralLattice(std::span<const double> features, std::size_t point_count,
                                           std::size_t dims)
    : n_(point_count), d_(dims) {
  if (d_ == 0 || features.size() != n_ * d_) throw DimensionError("lattice feature size mismatch");
  const std::size_t d = d_;
  const int di = static_cast<int>(d);
  offset_.resize(n_ * (d + 1));
  barycentric_.resize(n_ * (d + 1));

  VertexTable table(d);
  std::vector<double> scale(d), elevated(d + 1), rem0(d + 1), bary(d + 2);
  std::vector<int> rank(d + 1);
  std::vector<short> key(d + 1);

  // canonical[r][i]: coordinate i of the remainder-r vertex of the canonical simplex
  std::vector<int> canonical((d + 1) * (d + 1));
  for (std::size_t r = 0; r <= d; ++r) {
    for (std::size_t j = 0; j <= d - r; ++j) canonical[r * (d + 1) + j] = static_cast<int>(r);
    for (std::size_t j = d - r + 1; j <= d; ++j) canonical[r * (d + 1) + j] = static_cast<int>(r) - (di + 1);
  }

  const double inv_std = std::sqrt(2.0 / 3.0) * static_cast<double>(d + 1);
  for (std::size_t i = 0; i < d; ++i) scale[i] = inv_std / std::sqrt(double((i + 2) * (i + 1)));

  for (std::size_t k = 0; k < n_; ++k) {
    const double* f = features.data() + k * d;
    // Elevate onto the hyperplane sum(x) = 0.
    double sm = 0.0;
    for (std::size_t j = d; j > 0; --j) {
      const double cf = f[j - 1] * scale[j - 1];
      elevated[j] = sm - static_cast<double>(j) * cf;
      sm += cf;
    }
    elevated[0] = sm;

    // Nearest remainder-0 point.
    int sum = 0;
    for (std::size_t i = 0; i <= d; ++i) {
      const double rd = std::round(elevated[i] / double(d + 1));
      rem0[i] = rd * double(d + 1);
      sum += static_cast<int>(rd);
    }
    std::fill(rank.begin(), rank.end(), 0);
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = elevated[i] - rem0[i];
      for (std::size_t j = i + 1; j <= d; ++j) {
        if (diff < elevated[j] - rem0[j])
          ++rank[i];
        else
          ++rank[j];
      }
    }
    for (std::size_t i = 0; i <= d; ++i) {
      rank[i] += sum;
      if (rank[i] < 0) {
        rank[i] += di + 1;
        rem0[i] += double(d + 1);
      } else if (rank[i] > di) {
        rank[i] -= di + 1;
        rem0[i] -= double(d + 1);
      }
    }

    std::fill(bary.begin(), bary.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      const double v = (elevated[i] - rem0[i]) / double(d + 1);
      bary[d - static_cast<std::size_t>(rank[i])] += v;
      bary[d - static_cast<std::size_t>(rank[i]) + 1] -= v;
    }
    bary[0] += 1.0 + bary[d + 1];

    for (std::size_t r = 0; r <= d; ++r) {
      for (std::size_t i = 0; i < d; ++i)
        key[i] = static_cast<short>(rem0[i] + canonical[r * (d + 1) + static_cast<std::size_t>(rank[i])]);
      offset_[k * (d + 1) + r] = table.find(key, true);
      barycentric_[k * (d + 1) + r] = bary[r];
    }
  }

  vertex_count_ = table.size();
  blur_lo_.assign((d + 1) * vertex_count_, -1);
  blur_hi_.assign((d + 1) * vertex_count_, -1);
  std::vector<short> lo(d + 1), hi(d + 1);
  for (std::size_t axis = 0; axis <= d; ++axis) {
    for (std::size_t v = 0; v < vertex_count_; ++v) {
      const auto kv = table.key(v);
      for (std::size_t i = 0; i < d; ++i) {
        lo[i] = static_cast<short>(kv[i] - 1);
        hi[i] = static_cast<short>(kv[i] + 1);
      }
      if (axis < d) {
        lo[axis] = static_cast<short>(kv[axis] + di);
        hi[axis] = static_cast<short>(kv[axis] - di);
      }
      blur_lo_[axis * vertex_count_ + v] = table.find(lo, false);
      blur_hi_[axis * vertex_count_ + v] = table.find(hi, false);
    }
  }
}

std::vector<double> PermutohedralLattice::filter(std::span<const double> values, std::size_t channels) const {
  if (values.size() != n_ * channels) throw DimensionError("lattice value size mismatch");
  const std::size_t d = d_;
  // Slot 0 is a permanent zero standing in for missing neighbours.
  std::vector<double> grid((vertex_count_ + 1) * channels, 0.0);
  std::vector<double> next(grid.size(), 0.0);

  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t r = 0; r <= d; ++r) {
      const std::size_t o = static_cast<std::size_t>(offset_[i * (d + 1) + r]) + 1;
      const double w = barycentric_[i * (d + 1) + r];
      for (std::size_t c = 0; c < channels; ++c) grid[o * channels + c] += w * values[i * channels + c];
    }
  }

  for (std::size_t axis = 0; axis <= d; ++axis) {
    for (std::size_t v = 0; v < vertex_count_; ++v) {
      const std::size_t lo = static_cast<std::size_t>(blur_lo_[axis * vertex_count_ + v] + 1);
      const std::size_t hi = static_cast<std::size_t>(blur_hi_[axis * vertex_count_ + v] + 1);
      const std::size_t self = v + 1;
      for (std::size_t c = 0; c < channels; ++c)
        next[self * channels + c] =
            grid[self * channels + c] + 0.5 * (grid[lo * channels + c] + grid[hi * channels + c]);
    }
    std::swap(grid, next);
  }

  const double alpha = 1.0 / (1.0 + std::pow(2.0, -static_cast<double>(d)));
  std::vector<double> out(n_ * channels, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t r = 0; r <= d; ++r) {
      const std::size_t o = static_cast<std::size_t>(offset_[i * (d + 1) + r]) + 1;
      const double w = barycentric_[i * (d + 1) + r] * alpha;
      for (std::size_t c = 0; c < channels; ++c) out[i * channels + c] += w * grid[o * channels + c];
    }
  }
  return out;
}

}  // namespace cycorr
