#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cycorr/descriptor_io.hpp"

namespace cycorr {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PixelCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

struct Component {
  std::size_t id = 0;
  std::vector<PixelCoord> pixels;  // raster order
};

// Components are numbered in the raster order of their first (top-left) pixel.
struct ComponentSet {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<Component> components;
};

ComponentSet connected_components(const BinaryMask& mask, int connectivity = 8);

// Pinhole back-projection of pixel (row, col) at metric depth z.
Point3 back_project(PixelCoord px, double z, const CameraIntrinsics& k);

/// Top-down grasp: centroid of the back-projected part and the direction of
/// the largest principal axis of its XY footprint.
struct GraspPose {
  Point3 position;
  double yaw = 0.0;        // radians in [-pi/2, pi/2); an axis, not a direction
  bool isotropic = false;  // equal principal variances, yaw fixed to 0
};

GraspPose grasp_pose(const Component& component, const DepthMap& depth);

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;
};

// XY centroid of the back-projected part; the gripper opens above it.
PlanarPoint containment_point(const Component& component, const DepthMap& depth);

// height(p) = normal . p + offset. Without a plane the camera is assumed to look
// straight down, so height is -z.
struct SupportPlane {
  Point3 normal{0.0, 0.0, -1.0};
  double offset = 0.0;
};

/// Index (into components) of the component holding the highest valid point.
/// Ties go to the lower component id.
std::size_t select_next(const ComponentSet& components, const DepthMap& depth,
                        const std::optional<SupportPlane>& plane = std::nullopt);

}  // namespace cycorr
