#include "graspview/simcam.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace gv {

namespace {
constexpr double kPi = std::numbers::pi;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  // Slab test for a ray from the origin.
  bool hit(const Vec3& inv_dir, double t_max) const {
    double t0 = 0.0, t1 = t_max;
    for (int k = 0; k < 3; ++k) {
      double a = lo[k] * inv_dir[k];
      double b = hi[k] * inv_dir[k];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
      if (t0 > t1) return false;
    }
    return true;
  }
};
}  // namespace

void CameraModel::validate() const {
  if (!(min_depth > 0.0 && min_depth < max_depth)) {
    throw ConfigError("camera requires 0 < min_depth < max_depth");
  }
  if (!(focal_length > 0.0) || width < 1 || height < 1 || noise_sigma < 0.0) {
    throw ConfigError("invalid camera parameters");
  }
}

Vec3 ViewpointSpec::position() const {
  return target + radius * Vec3(std::cos(elevation) * std::cos(azimuth),
                                std::cos(elevation) * std::sin(azimuth),
                                std::sin(elevation));
}

Pose viewpoint_to_pose(const ViewpointSpec& v) {
  const Vec3 pos = v.position();
  const Vec3 z_cam = (pos - v.target).normalized();  // optical axis is -z
  if (std::abs(z_cam.dot(v.up_hint)) > 1.0 - 1e-6) {
    throw GimbalDegenerate("viewing direction parallel to up hint");
  }
  const Vec3 x_cam = v.up_hint.cross(z_cam).normalized();
  const Vec3 y_cam = z_cam.cross(x_cam);
  Pose p;
  p.rotation.col(0) = x_cam;
  p.rotation.col(1) = y_cam;
  p.rotation.col(2) = z_cam;
  p.translation = pos;
  return p;
}

PointCloud render_cloud(const std::vector<SceneObject>& scene, const CameraModel& cam,
                        const Pose& cam_pose, std::uint64_t seed) {
  cam.validate();
  const Pose world_to_cam = invert(cam_pose);

  // Transform the scene into the camera frame once; rays start at the origin.
  std::vector<TriangleMesh> meshes;
  std::vector<Aabb> boxes;
  meshes.reserve(scene.size());
  for (const auto& obj : scene) {
    meshes.push_back(transformed(obj.mesh, compose(world_to_cam, obj.pose)));
    Aabb box;
    for (const auto& v : meshes.back().vertices) box.grow(v);
    boxes.push_back(box);
  }

  const double cx = 0.5 * (cam.width - 1);
  const double cy = 0.5 * (cam.height - 1);
  const int n_px = cam.width * cam.height;
  std::vector<Vec3> buffer(n_px, Vec3::Zero());
  std::vector<char> valid(n_px, 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      Vec3 dir((col - cx) / cam.focal_length, (row - cy) / cam.focal_length, -1.0);
      dir.normalize();
      const Vec3 inv_dir = dir.cwiseInverse();
      // depth (distance along -z) bounds converted to ray-parameter bounds
      const double t_lo = cam.min_depth / -dir.z();
      const double t_hi = cam.max_depth / -dir.z();
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < meshes.size(); ++m) {
        if (!boxes[m].hit(inv_dir, std::min(best, t_hi))) continue;
        auto hit = raycast(meshes[m], Vec3::Zero(), dir, t_lo, std::min(best, t_hi));
        if (hit && hit->t < best) best = hit->t;
      }
      if (!std::isfinite(best)) continue;
      double t = best;
      if (cam.noise_sigma > 0.0) t += cam.noise_sigma * noise(rng);
      const int idx = row * cam.width + col;
      buffer[idx] = t * dir;
      valid[idx] = 1;
    }
  }

  // Normals from neighboring-pixel cross products, oriented toward the camera.
  PointCloud cloud;
  cloud.view_origin = cam_pose.translation;
  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      const int idx = row * cam.width + col;
      if (!valid[idx]) continue;
      const Vec3& p = buffer[idx];
      auto neighbor = [&](int dr, int dc) -> const Vec3* {
        int r = row + dr, c = col + dc;
        if (r < 0 || c < 0 || r >= cam.height || c >= cam.width) return nullptr;
        int i = r * cam.width + c;
        return valid[i] ? &buffer[i] : nullptr;
      };
      const Vec3* px = neighbor(0, 1);
      if (!px) px = neighbor(0, -1);
      const Vec3* py = neighbor(1, 0);
      if (!py) py = neighbor(-1, 0);
      Vec3 n;
      if (px && py) {
        n = (*px - p).cross(*py - p);
        if (n.norm() < 1e-12) n = -p;
      } else {
        n = -p;
      }
      n.normalize();
      if (n.dot(-p) < 0) n = -n;
      cloud.points.push_back(transform_point(cam_pose, p));
      cloud.normals.push_back(transform_direction(cam_pose, n));
    }
  }
  return cloud;
}

std::vector<ViewpointSpec> sample_view_sphere(int n, double elevation_lo,
                                              double elevation_hi, std::uint64_t seed,
                                              double radius, const Vec3& target) {
  if (n < 1) throw ConfigError("sample_view_sphere requires n >= 1");
  if (elevation_hi < elevation_lo || elevation_lo < -kPi / 2 ||
      elevation_hi > kPi / 2) {
    throw EmptyRange("invalid elevation band");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double z_lo = std::sin(elevation_lo);
  const double z_hi = std::sin(elevation_hi);
  std::vector<ViewpointSpec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    ViewpointSpec v;
    // (-pi, pi]
    v.azimuth = kPi - 2.0 * kPi * uni(rng);
    // area-uniform on the band: z uniform
    const double z = z_lo + (z_hi - z_lo) * uni(rng);
    v.elevation = (z_hi == z_lo) ? elevation_lo : std::asin(std::clamp(z, -1.0, 1.0));
    v.radius = radius;
    v.target = target;
    out.push_back(v);
  }
  return out;
}

}  // namespace gv
