#include "cycorr/skills.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cycorr/errors.hpp"

namespace cycorr {

namespace {

std::vector<Point3> valid_points(const Component& component, const DepthMap& depth) {
  std::vector<Point3> pts;
  pts.reserve(component.pixels.size());
  for (const auto& px : component.pixels) {
    if (px.row >= depth.height || px.col >= depth.width) throw DimensionError("component outside depth map");
    if (depth.valid(px.row, px.col)) pts.push_back(back_project(px, depth.at(px.row, px.col), depth.intrinsics));
  }
  return pts;
}

Point3 mean_of(const std::vector<Point3>& pts) {
  Point3 m;
  for (const auto& p : pts) {
    m.x += p.x;
    m.y += p.y;
    m.z += p.z;
  }
  const double n = static_cast<double>(pts.size());
  return {m.x / n, m.y / n, m.z / n};
}

}  // namespace

ComponentSet connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw ConfigError("connectivity must be 4 or 8");
  ComponentSet set;
  set.height = mask.height;
  set.width = mask.width;
  const int h = static_cast<int>(mask.height), w = static_cast<int>(mask.width);
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<std::pair<int, int>> stack;

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const auto start = static_cast<std::size_t>(r * w + c);
      if (!mask.bits[start] || label[start] >= 0) continue;
      Component comp;
      comp.id = set.components.size();
      label[start] = static_cast<int>(comp.id);
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        comp.pixels.push_back({static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x)});
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (connectivity == 4 && dy != 0 && dx != 0) continue;
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const auto j = static_cast<std::size_t>(yy * w + xx);
            if (!mask.bits[j] || label[j] >= 0) continue;
            label[j] = static_cast<int>(comp.id);
            stack.emplace_back(yy, xx);
          }
      }
      std::sort(comp.pixels.begin(), comp.pixels.end(), [](const PixelCoord& a, const PixelCoord& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      set.components.push_back(std::move(comp));
    }
  return set;
}

Point3 back_project(PixelCoord px, double z, const CameraIntrinsics& k) {
  return {(double(px.col) - k.cx) * z / k.fx, (double(px.row) - k.cy) * z / k.fy, z};
}

GraspPose grasp_pose(const Component& component, const DepthMap& depth) {
  const auto pts = valid_points(component, depth);
  if (pts.size() < 3) throw DegenerateGeometryError("grasp pose needs at least 3 pixels with valid depth");

  GraspPose pose;
  pose.position = mean_of(pts);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pts) {
    const double dx = p.x - pose.position.x, dy = p.y - pose.position.y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double n = static_cast<double>(pts.size());
  sxx /= n;
  sxy /= n;
  syy /= n;

  // Eigenvalue gap of the 2x2 covariance.
  const double gap = std::hypot(sxx - syy, 2.0 * sxy);
  if (gap <= 1e-12 * (sxx + syy)) {
    pose.yaw = 0.0;
    pose.isotropic = true;
    return pose;
  }
  double yaw = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  if (yaw >= std::numbers::pi / 2) yaw -= std::numbers::pi;
  if (yaw < -std::numbers::pi / 2) yaw += std::numbers::pi;
  pose.yaw = yaw;
  return pose;
}

PlanarPoint containment_point(const Component& component, const DepthMap& depth) {
  const auto pts = valid_points(component, depth);
  if (pts.empty()) throw DegenerateGeometryError("containment point needs a pixel with valid depth");
  const Point3 m = mean_of(pts);
  return {m.x, m.y};
}

std::size_t select_next(const ComponentSet& components, const DepthMap& depth,
                        const std::optional<SupportPlane>& plane) {
  const SupportPlane p = plane.value_or(SupportPlane{});
  std::size_t best = components.components.size();
  double best_height = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < components.components.size(); ++i) {
    for (const auto& pt : valid_points(components.components[i], depth)) {
      const double height = p.normal.x * pt.x + p.normal.y * pt.y + p.normal.z * pt.z + p.offset;
      if (height > best_height) {
        best_height = height;
        best = i;
      }
    }
  }
  if (best == components.components.size())
    throw DegenerateGeometryError("no component has a pixel with valid depth");
  return best;
}

}  // namespace cycorr
