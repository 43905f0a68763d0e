#include "cycorr/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

struct Nearest {
  int index = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  double second_sq = std::numeric_limits<double>::infinity();
};

Nearest nearest_two(std::span<const double> x, const Matrix& centers) {
  Nearest n;
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    const double d = squared_distance(x, centers.row(j));
    if (d < n.best_sq) {
      n.second_sq = n.best_sq;
      n.best_sq = d;
      n.index = static_cast<int>(j);
    } else if (d < n.second_sq) {
      n.second_sq = d;
    }
  }
  return n;
}

// Recomputes every center as the mean of its members. Empty clusters keep
// their previous position.
void update_means(const Matrix& points, const std::vector<int>& labels, Matrix& centers,
                  std::vector<std::size_t>& counts) {
  const std::size_t k = centers.rows();
  const std::size_t dim = centers.cols();
  Matrix sums(k, dim);
  counts.assign(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto dst = sums.row(static_cast<std::size_t>(labels[i]));
    auto src = points.row(i);
    for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    const double n = static_cast<double>(counts[j]);
    auto c = centers.row(j);
    auto s = sums.row(j);
    for (std::size_t d = 0; d < dim; ++d) c[d] = s[d] / n;
  }
}

double inertia_of(const Matrix& points, const std::vector<int>& labels, const Matrix& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    total += squared_distance(points.row(i), centers.row(static_cast<std::size_t>(labels[i])));
  return total;
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

std::size_t count_distinct_rows(const Matrix& points) {
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto r = points.row(i);
    seen.emplace(r.begin(), r.end());
  }
  return seen.size();
}

Matrix kmeanspp_seeds(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows();
  if (k == 0 || n == 0) throw EmptyRegionError("k-means++ needs at least one point and one center");
  SeededUniform uniform(seed);
  Matrix centers(k, points.cols());

  auto take = [&](std::size_t center, std::size_t point) {
    auto src = points.row(point);
    std::copy(src.begin(), src.end(), centers.row(center).begin());
  };

  take(0, std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))));
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = squared_distance(points.row(i), centers.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    std::vector<double> cumulative(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += closest[i];
      cumulative[i] = total;
    }
    if (!(total > 0.0)) throw DataError("fewer distinct points than requested centers");
    const double target = uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    std::size_t pick = static_cast<std::size_t>(it - cumulative.begin());
    if (pick >= n) {
      pick = n - 1;
      while (closest[pick] == 0.0) --pick;
    }
    take(c, pick);
    for (std::size_t i = 0; i < n; ++i)
      closest[i] = std::min(closest[i], squared_distance(points.row(i), centers.row(c)));
  }
  return centers;
}

KMeansResult hamerly_kmeans(const Matrix& points, Matrix initial_centers, std::size_t max_iters) {
  const std::size_t n = points.rows();
  const std::size_t k = initial_centers.rows();
  if (n == 0 || k == 0) throw EmptyRegionError("k-means needs points and centers");
  if (initial_centers.cols() != points.cols()) throw DimensionError("center dimension mismatch");

  KMeansResult res;
  res.centers = std::move(initial_centers);
  Matrix& centers = res.centers;
  res.labels.assign(n, 0);

  std::vector<double> upper(n), lower(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Nearest nb = nearest_two(points.row(i), centers);
    res.labels[i] = nb.index;
    upper[i] = std::sqrt(nb.best_sq);
    lower[i] = std::sqrt(nb.second_sq);
  }
  res.inertia_trace.push_back(inertia_of(points, res.labels, centers));

  // Slack absorbing rounding drift in the incrementally updated bounds.
  double extent = 0.0;
  for (double v : points.data()) extent = std::max(extent, std::abs(v));
  extent *= std::sqrt(static_cast<double>(points.cols()));

  std::vector<double> moved(k), half_gap(k);
  Matrix previous;
  for (std::size_t iter = 1; iter <= max_iters; ++iter) {
    res.iterations = iter;
    previous = centers;
    update_means(points, res.labels, centers, res.counts);
    if (k == 1) {
      res.inertia_trace.push_back(inertia_of(points, res.labels, centers));
      res.converged = true;
      break;
    }

    for (std::size_t j = 0; j < k; ++j) moved[j] = std::sqrt(squared_distance(previous.row(j), centers.row(j)));
    std::size_t far = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (moved[j] > moved[far]) far = j;
    double second_far = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != far) second_far = std::max(second_far, moved[j]);

    for (std::size_t j = 0; j < k; ++j) {
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < k; ++o)
        if (o != j) gap = std::min(gap, squared_distance(centers.row(j), centers.row(o)));
      half_gap[j] = 0.5 * std::sqrt(gap);
    }

    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::size_t>(res.labels[i]);
      upper[i] += moved[a];
      lower[i] -= (a == far) ? second_far : moved[far];

      const double bound = std::max(half_gap[a], lower[i]);
      const double slack = 1e-9 * (extent + std::abs(upper[i]) + std::abs(bound));
      if (upper[i] + slack < bound) continue;
      upper[i] = std::sqrt(squared_distance(points.row(i), centers.row(a)));
      if (upper[i] + slack < bound) continue;

      const Nearest nb = nearest_two(points.row(i), centers);
      upper[i] = std::sqrt(nb.best_sq);
      lower[i] = std::sqrt(nb.second_sq);
      if (nb.index != res.labels[i]) {
        res.labels[i] = nb.index;
        changed = true;
      }
    }
    res.inertia_trace.push_back(inertia_of(points, res.labels, centers));
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  update_means(points, res.labels, centers, res.counts);
  return res;
}

Matrix masked_descriptors(const DescriptorGrid& grid, const BinaryMask& mask, bool normalize) {
  if (mask.height != grid.height_patches() || mask.width != grid.width_patches())
    throw DimensionError("mask is not at the grid's resolution");
  const std::size_t dim = grid.dim();
  Matrix out(mask.count(), dim);
  std::size_t row = 0;
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    if (!mask.bits[p]) continue;
    auto src = grid.descriptor(p);
    auto dst = out.row(row++);
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      dst[d] = src[d];
      norm += dst[d] * dst[d];
    }
    if (normalize && norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& v : dst) v /= norm;
    }
  }
  return out;
}

CentroidSet cluster(const DescriptorGrid& grid, const BinaryMask& mask, std::size_t k,
                    std::uint64_t seed, const ClusterOptions& options) {
  if (k == 0) throw ConfigError("cluster count must be at least 1");
  const Matrix points = masked_descriptors(grid, mask, options.normalize);
  if (points.rows() == 0) throw EmptyRegionError("cannot cluster an empty region");

  const std::size_t effective_k = std::min(k, count_distinct_rows(points));
  KMeansResult km = hamerly_kmeans(points, kmeanspp_seeds(points, effective_k, seed), options.max_iters);

  CentroidSet set;
  set.k = effective_k;
  set.centroids = std::move(km.centers);
  set.member_counts = std::move(km.counts);
  set.grid_height = grid.height_patches();
  set.grid_width = grid.width_patches();
  set.assignment.assign(grid.patch_count(), -1);
  std::size_t row = 0;
  for (std::size_t p = 0; p < grid.patch_count(); ++p)
    if (mask.bits[p]) set.assignment[p] = km.labels[row++];
  return set;
}

double cluster_inertia(const CentroidSet& set, const DescriptorGrid& grid, const BinaryMask& mask,
                       bool normalize) {
  const Matrix points = masked_descriptors(grid, mask, normalize);
  double total = 0.0;
  std::size_t row = 0;
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    if (!mask.bits[p]) continue;
    const int label = set.assignment[p];
    if (label < 0) throw DimensionError("assignment inconsistent with mask");
    total += squared_distance(points.row(row++), set.centroids.row(static_cast<std::size_t>(label)));
  }
  return total;
}

}  // namespace cycorr
