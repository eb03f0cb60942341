#include "graspview/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace gv {

namespace {

Mat3 reorthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 out = u * v.transpose();
  if (out.determinant() < 0) {
    u.col(2) *= -1.0;
    out = u * v.transpose();
  }
  return out;
}

double orthonormal_drift(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

// Deterministic sign convention for axes that are only defined up to sign:
// first component larger than 1e-12 in magnitude is made positive.
Vec3 canonical_sign(const Vec3& v) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v[i]) > 1e-12) return v[i] > 0 ? v : Vec3(-v);
  }
  return v;
}

}  // namespace

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  if (orthonormal_drift(out.rotation) > 1e-12) {
    out.rotation = reorthonormalize(out.rotation);
  }
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Vec3 transform_point(const Pose& p, const Vec3& x) {
  return p.rotation * x + p.translation;
}

Vec3 transform_direction(const Pose& p, const Vec3& d) { return p.rotation * d; }

std::string to_string(ShapeClass c) {
  return c == ShapeClass::BoxLike ? "box" : "cylinder";
}

ShapeClass shape_class_from_string(const std::string& s) {
  if (s == "box") return ShapeClass::BoxLike;
  if (s == "cylinder") return ShapeClass::CylinderLike;
  throw ConfigError("unknown shape class: " + s);
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return false;
  // Directed-edge count: closed and consistently oriented iff each directed
  // edge appears exactly once and its reverse also appears exactly once.
  std::map<std::pair<int, int>, int> edges;
  const int nv = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a < 0 || b < 0 || a >= nv || b >= nv || a == b) return false;
      if (++edges[{a, b}] > 1) return false;
    }
  }
  for (const auto& [e, n] : edges) {
    auto rev = edges.find({e.second, e.first});
    if (rev == edges.end() || rev->second != 1) return false;
  }
  return true;
}

double surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Pose& p) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = transform_point(p, v);
  return out;
}

LocalFrame estimate_local_frame(const PointCloud& cloud, const Vec3& center,
                                double radius) {
  std::vector<int> nbrs;
  const double r2 = radius * radius;
  for (int i = 0; i < static_cast<int>(cloud.points.size()); ++i) {
    if ((cloud.points[i] - center).squaredNorm() <= r2) nbrs.push_back(i);
  }
  if (nbrs.size() < 8) {
    throw InsufficientNeighbors("local frame needs >= 8 neighbors, got " +
                                std::to_string(nbrs.size()));
  }

  Vec3 mean = Vec3::Zero();
  for (int i : nbrs) mean += cloud.points[i];
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (int i : nbrs) {
    Vec3 d = cloud.points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> cov_eig(cov);
  const Vec3 cov_vals = cov_eig.eigenvalues();  // ascending
  if (cov_vals[1] <= 1e-12 * std::max(cov_vals[2], 1e-300)) {
    throw DegenerateNeighborhood("collinear neighborhood around (" +
                                 std::to_string(center.x()) + ", " +
                                 std::to_string(center.y()) + ", " +
                                 std::to_string(center.z()) + ")");
  }

  LocalFrame f;
  f.origin = center;
  f.normal = cov_eig.eigenvectors().col(0);
  if (f.normal.dot(cloud.view_origin - center) < 0) f.normal = -f.normal;

  // Minor principal curvature direction: the direction along which the
  // neighbor normals vary least. Falls back to the largest-spread covariance
  // eigenvector on planar/umbilic patches, and when the cloud has no normals.
  Vec3 axis;
  bool have_axis = false;
  if (cloud.has_normals()) {
    Mat3 nn = Mat3::Zero();
    for (int i : nbrs) nn += cloud.normals[i] * cloud.normals[i].transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> nn_eig(nn);
    const Vec3 nn_vals = nn_eig.eigenvalues();
    if (nn_vals[1] > 1e-6 * nn_vals[2]) {
      axis = nn_eig.eigenvectors().col(0);
      have_axis = true;
    }
  }
  if (!have_axis) axis = cov_eig.eigenvectors().col(2);
  f.planar = !have_axis;

  axis -= axis.dot(f.normal) * f.normal;
  if (axis.norm() < 1e-9) {
    axis = cov_eig.eigenvectors().col(2);
    f.planar = true;
  }
  axis -= axis.dot(f.normal) * f.normal;
  f.curvature_axis = canonical_sign(axis.normalized());
  f.binormal = f.curvature_axis.cross(f.normal);
  return f;
}

std::vector<std::pair<Vec3, Vec3>> sample_mesh_surface(const TriangleMesh& mesh,
                                                       int n, std::uint64_t seed) {
  if (mesh.empty()) throw EmptyMesh("cannot sample an empty mesh");
  if (!is_watertight(mesh)) throw Error("mesh is not watertight");
  std::vector<double> areas;
  areas.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    areas.push_back(0.5 * (b - a).cross(c - a).norm());
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<std::pair<Vec3, Vec3>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[pick(rng)];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    Vec3 p = a + u * (b - a) + v * (c - a);
    Vec3 normal = (b - a).cross(c - a).normalized();
    out.emplace_back(p, normal);
  }
  return out;
}

std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir,
                                         const Vec3& a, const Vec3& b, const Vec3& c) {
  // Moller-Trumbore.
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < -1e-12 || u + v > 1.0 + 1e-12) return std::nullopt;
  return e2.dot(q) * inv;
}

std::optional<RayHit> raycast(const TriangleMesh& mesh, const Vec3& origin,
                              const Vec3& dir, double t_min, double t_max) {
  std::optional<RayHit> best;
  for (int i = 0; i < static_cast<int>(mesh.triangles.size()); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    auto hit = intersect_triangle(origin, dir, a, b, c);
    if (!hit || *hit < t_min || *hit > t_max) continue;
    if (!best || *hit < best->t) {
      best = RayHit{*hit, i, (b - a).cross(c - a).normalized()};
    }
  }
  return best;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# shape_class " << to_string(mesh.shape_class) << "\n";
  out.precision(17);
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> t{};
      std::string extra;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        // allow "i", "i/j", "i//k" forms; vertex index only
        t[k] = std::stoi(tok) - 1;
      }
      if (ss >> extra) throw IoError("non-triangle face in " + path);
      mesh.triangles.push_back(t);
    } else if (tag == "#") {
      std::string key, val;
      ss >> key >> val;
      if (key == "shape_class") mesh.shape_class = shape_class_from_string(val);
    }
  }
  return mesh;
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "comment view_origin " << cloud.view_origin.x() << " "
      << cloud.view_origin.y() << " " << cloud.view_origin.z() << "\n";
  out << "element vertex " << cloud.points.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz"}) {
    out << "property float " << p << "\n";
  }
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    float row[6];
    for (int k = 0; k < 3; ++k) row[k] = static_cast<float>(cloud.points[i][k]);
    Vec3 n = cloud.has_normals() ? cloud.normals[i] : Vec3::Zero();
    for (int k = 0; k < 3; ++k) row[3 + k] = static_cast<float>(n[k]);
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!out) throw IoError("write failed: " + path);
}

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  PointCloud cloud;
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "comment") {
      std::string key;
      ss >> key;
      if (key == "view_origin") {
        ss >> cloud.view_origin.x() >> cloud.view_origin.y() >> cloud.view_origin.z();
      }
    } else if (tag == "element") {
      std::string what;
      ss >> what >> count;
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw CorruptFile("missing end_header: " + path);
  cloud.points.reserve(count);
  cloud.normals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    float row[6];
    in.read(reinterpret_cast<char*>(row), sizeof(row));
    if (!in) throw CorruptFile("truncated PLY: " + path);
    cloud.points.emplace_back(row[0], row[1], row[2]);
    cloud.normals.emplace_back(row[3], row[4], row[5]);
  }
  return cloud;
}

}  // namespace gv
