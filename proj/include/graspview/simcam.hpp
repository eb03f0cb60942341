#pragma once

#include <cstdint>
#include <vector>

#include "graspview/geometry.hpp"

namespace gv {

/// Pinhole depth camera. Points outside [min_depth, max_depth] are dropped.
struct CameraModel {
  int width = 160;
  int height = 120;
  double focal_length = 120.0;  // pixels
  double min_depth = 0.20;      // meters
  double max_depth = 1.5;       // meters
  double noise_sigma = 0.001;   // meters, per-point depth noise std

  void validate() const;
};

/// Camera placement on a sphere around a target point. The optical axis
/// always points at the target.
struct ViewpointSpec {
  double azimuth = 0.0;    // radians, (-pi, pi]
  double elevation = 0.0;  // radians, [-pi/2, pi/2]
  double radius = 0.4;     // meters
  Vec3 target = Vec3::Zero();
  Vec3 up_hint = Vec3::UnitZ();

  Vec3 position() const;
};

Pose viewpoint_to_pose(const ViewpointSpec& v);

struct SceneObject {
  TriangleMesh mesh;
  Pose pose;
};

PointCloud render_cloud(const std::vector<SceneObject>& scene, const CameraModel& cam,
                        const Pose& cam_pose, std::uint64_t seed);

std::vector<ViewpointSpec> sample_view_sphere(int n, double elevation_lo,
                                              double elevation_hi, std::uint64_t seed,
                                              double radius = 0.4,
                                              const Vec3& target = Vec3::Zero());

}  // namespace gv
