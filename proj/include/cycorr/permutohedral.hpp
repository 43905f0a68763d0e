#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cycorr {

/// Approximate high-dimensional Gaussian filtering on the permutohedral
/// lattice (splat, blur along each lattice axis, slice). Computes
/// out_i ~ sum_j exp(-|f_i - f_j|^2 / 2) * in_j for features f that are
/// already divided by their standard deviations.
class PermutohedralLattice {
 public:
  // features: point_count x dims, row-major.
  PermutohedralLattice(std::span<const double> features, std::size_t point_count, std::size_t dims);

  // values: point_count x channels, row-major.
  std::vector<double> filter(std::span<const double> values, std::size_t channels) const;

  std::size_t vertex_count() const { return vertex_count_; }

 private:
  std::size_t n_;
  std::size_t d_;
  std::size_t vertex_count_ = 0;
  std::vector<int> offset_;          // n x (d+1) vertex indices
  std::vector<double> barycentric_;  // n x (d+1)
  std::vector<int> blur_lo_;         // (d+1) x vertices, -1 when absent
  std::vector<int> blur_hi_;
};

}  // namespace cycorr
