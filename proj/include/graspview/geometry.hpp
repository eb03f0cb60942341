#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graspview/common.hpp"

namespace gv {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform in SE(3). Rotation is kept orthonormal with det +1.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
};

Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);
Vec3 transform_point(const Pose& p, const Vec3& x);
Vec3 transform_direction(const Pose& p, const Vec3& d);

/// Depth-sensor point cloud. Normals, when present, are unit length and
/// oriented toward view_origin (the sensor position).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or same size as points
  Vec3 view_origin = Vec3::Zero();

  bool has_normals() const { return !normals.empty(); }
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class ShapeClass { BoxLike, CylinderLike };

std::string to_string(ShapeClass c);
ShapeClass shape_class_from_string(const std::string& s);

/// Closed triangle mesh. The force-closure oracle requires watertightness
/// (every edge shared by exactly two triangles).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  ShapeClass shape_class = ShapeClass::BoxLike;

  bool empty() const { return triangles.empty(); }
};

bool is_watertight(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);
TriangleMesh transformed(const TriangleMesh& mesh, const Pose& p);

/// Darboux-style surface frame: normal plus minor principal curvature
/// direction, right-handed with the binormal.
struct LocalFrame {
  Vec3 origin;
  Vec3 normal;
  Vec3 curvature_axis;
  Vec3 binormal;
  // True when the neighborhood has no distinguished curvature direction and
  // curvature_axis is the arbitrary in-plane fallback.
  bool planar = false;
};

LocalFrame estimate_local_frame(const PointCloud& cloud, const Vec3& center,
                                double radius);

constexpr double kDefaultFrameRadius = 0.01;  // meters

std::vector<std::pair<Vec3, Vec3>> sample_mesh_surface(const TriangleMesh& mesh,
                                                       int n, std::uint64_t seed);

/// First intersection of a ray with a mesh. Returns hit distance t along the
/// (unit) direction, the triangle index, and the outward geometric normal.
struct RayHit {
  double t = 0.0;
  int triangle = -1;
  Vec3 normal = Vec3::Zero();
};

std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir,
                                         const Vec3& a, const Vec3& b, const Vec3& c);

std::optional<RayHit> raycast(const TriangleMesh& mesh, const Vec3& origin,
                              const Vec3& dir, double t_min = 0.0,
                              double t_max = std::numeric_limits<double>::infinity());

// Mesh/cloud file formats: ASCII OBJ (triangles only) and binary
// little-endian PLY with float32 x,y,z,nx,ny,nz.
void save_obj(const TriangleMesh& mesh, const std::string& path);
TriangleMesh load_obj(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path);
PointCloud load_ply(const std::string& path);

}  // namespace gv
