#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cycorr/descriptor_io.hpp"
#include "cycorr/matrix.hpp"

namespace cycorr {

/// K mean descriptors of a masked region plus the patch -> centroid map.
struct CentroidSet {
  std::size_t k = 0;
  Matrix centroids;               // k x dim
  std::vector<int> assignment;    // grid resolution; -1 outside the mask
  std::uint32_t grid_height = 0;
  std::uint32_t grid_width = 0;
  std::vector<std::size_t> member_counts;
};

struct ClusterOptions {
  std::size_t max_iters = 300;
  // L2-normalise descriptors before clustering.
  bool normalize = false;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  std::vector<std::size_t> counts;
  std::size_t iterations = 0;
  bool converged = false;
  // Inertia after every assignment step, starting with the seeded centers.
  std::vector<double> inertia_trace;
};

// Deterministic uniform double in [0, 1) drawn from a 64-bit Mersenne twister.
// The engine is fully specified by the standard, unlike std::uniform_real_distribution.
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

// Row-wise squared Euclidean distance, accumulated in dimension order.
double squared_distance(std::span<const double> a, std::span<const double> b);

std::size_t count_distinct_rows(const Matrix& points);

/// k-means++ seeding. Requires 1 <= k <= count_distinct_rows(points); the
/// chosen seeds are then pairwise distinct.
Matrix kmeanspp_seeds(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Hamerly's bound-accelerated Lloyd iteration. Produces exactly the labels
/// plain Lloyd would produce from the same initial centers (ties go to the
/// lowest center index; empty clusters keep their previous center).
KMeansResult hamerly_kmeans(const Matrix& points, Matrix initial_centers, std::size_t max_iters);

// Masked descriptors in row-major patch order, optionally L2-normalised.
Matrix masked_descriptors(const DescriptorGrid& grid, const BinaryMask& mask, bool normalize = false);

/// Groups the masked descriptors into min(k, #distinct descriptors) clusters.
/// Throws EmptyRegionError when the mask selects nothing.
CentroidSet cluster(const DescriptorGrid& grid, const BinaryMask& mask, std::size_t k,
                    std::uint64_t seed, const ClusterOptions& options = {});

// Sum of squared distances of every masked descriptor to its centroid.
double cluster_inertia(const CentroidSet& set, const DescriptorGrid& grid, const BinaryMask& mask,
                       bool normalize = false);

}  // namespace cycorr
