#include <doctest.h>

#include <numbers>
#include <random>

#include "graspview/harness.hpp"
#include "test_util.hpp"

using namespace gv;
constexpr double kPi = std::numbers::pi;

namespace {

Pose translate(double x, double y, double z) {
  Pose p;
  p.translation = Vec3(x, y, z);
  return p;
}

}  // namespace

TEST_CASE("compose identity and inverse") {
  std::mt19937_64 rng(1);
  const Pose p = test::random_pose(rng);
  const Pose ip = compose(Pose::identity(), p);
  CHECK((ip.rotation - p.rotation).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((ip.translation - p.translation).norm() == doctest::Approx(0.0));

  const Pose id = compose(p, invert(p));
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(id.translation.norm() < 1e-9);
}

TEST_CASE("compose quarter turn then translate maps origin to (0,1,0)") {
  const Pose rz = test::rotation_about(Vec3::UnitZ(), kPi / 2);
  const Pose combined = compose(rz, translate(1, 0, 0));
  const Vec3 out = transform_point(combined, Vec3::Zero());
  CHECK((out - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("invert examples") {
  const Pose id = invert(Pose::identity());
  CHECK((id.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);

  const Pose it = invert(translate(1, 2, 3));
  CHECK((it.translation - Vec3(-1, -2, -3)).norm() < 1e-12);
}

TEST_CASE("invert is an involution on random poses") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose p = test::random_pose(rng);
    const Pose q = invert(invert(p));
    CHECK((q.rotation - p.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((q.translation - p.translation).norm() < 1e-9);
  }
}

TEST_CASE("transform_point examples") {
  CHECK((transform_point(Pose::identity(), Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() <
        1e-12);
  const Pose rz = test::rotation_about(Vec3::UnitZ(), kPi / 2);
  CHECK((transform_point(rz, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((transform_point(translate(0, 0, 5), Vec3(1, 1, 1)) - Vec3(1, 1, 6)).norm() <
        1e-12);
}

TEST_CASE("pose round trip property") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Pose p = test::random_pose(rng);
    const Vec3 x(normal(rng), normal(rng), normal(rng));
    const Vec3 back = transform_point(p, transform_point(invert(p), x));
    CHECK((back - x).norm() < 1e-9);
  }
}

TEST_CASE("local frame on a planar patch") {
  const PointCloud cloud = test::plane_cloud(0.05, 0.005);
  const LocalFrame f = estimate_local_frame(cloud, Vec3::Zero(), 0.02);
  CHECK((f.normal - Vec3(0, 0, 1)).norm() < 1e-9);
  // degenerate curvature: the fallback axis lies in the plane
  CHECK(std::abs(f.curvature_axis.z()) < 1e-9);
  CHECK(f.curvature_axis.norm() == doctest::Approx(1.0));
}

TEST_CASE("local frame recovers the cylinder axis") {
  const PointCloud cloud = test::cylinder_side_cloud(0.04, 0.05, 0.05, 0.004);
  const LocalFrame f = estimate_local_frame(cloud, Vec3(0.04, 0, 0), 0.012);
  const double align = std::abs(f.curvature_axis.dot(Vec3::UnitZ()));
  CHECK(std::acos(std::min(align, 1.0)) < 5.0 * kPi / 180.0);
}

TEST_CASE("local frame error paths") {
  PointCloud tiny;
  tiny.view_origin = Vec3(0, 0, 1);
  for (int i = 0; i < 5; ++i) tiny.points.emplace_back(0.001 * i, 0, 0);
  CHECK_THROWS_AS(estimate_local_frame(tiny, Vec3::Zero(), 0.05),
                  InsufficientNeighbors);

  PointCloud collinear;
  collinear.view_origin = Vec3(0, 0, 1);
  for (int i = 0; i < 20; ++i) collinear.points.emplace_back(0.001 * i, 0, 0);
  CHECK_THROWS_AS(estimate_local_frame(collinear, Vec3(0.01, 0, 0), 0.05),
                  DegenerateNeighborhood);
}

TEST_CASE("local frame triads are right-handed orthonormal") {
  const PointCloud cloud = test::cylinder_side_cloud(0.03, 0.06, 0.07, 0.005);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  for (int i = 0; i < 50; ++i) {
    const LocalFrame f = estimate_local_frame(cloud, cloud.points[pick(rng)], 0.012);
    CHECK(std::abs(f.normal.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.curvature_axis.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.binormal.norm() - 1.0) < 1e-6);
    CHECK(std::abs(f.normal.dot(f.curvature_axis)) < 1e-6);
    CHECK((f.curvature_axis.cross(f.normal) - f.binormal).norm() < 1e-6);
  }
}

TEST_CASE("mesh surface sampling is area uniform on the cube") {
  const TriangleMesh cube = make_box_mesh(1, 1, 1);
  const auto samples = sample_mesh_surface(cube, 6000, 11);
  // per-face counts within 3 sigma of 1000 (multinomial, p = 1/6)
  const double sigma = std::sqrt(6000.0 * (1.0 / 6) * (5.0 / 6));
  int counts[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& [p, n] : samples) {
    if (std::abs(p.x() - 0.5) < 1e-9) counts[0]++;
    else if (std::abs(p.x() + 0.5) < 1e-9) counts[1]++;
    else if (std::abs(p.y() - 0.5) < 1e-9) counts[2]++;
    else if (std::abs(p.y() + 0.5) < 1e-9) counts[3]++;
    else if (std::abs(p.z() - 0.5) < 1e-9) counts[4]++;
    else counts[5]++;
  }
  for (int c : counts) CHECK(std::abs(c - 1000.0) <= 3 * sigma);
}

TEST_CASE("mesh surface sampling determinism and point-on-triangle") {
  const TriangleMesh cube = make_box_mesh(0.3, 0.2, 0.1);
  const auto a = sample_mesh_surface(cube, 500, 42);
  const auto b = sample_mesh_surface(cube, 500, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    // on some triangle's plane
    double min_dist = 1.0;
    for (const auto& t : cube.triangles) {
      const Vec3 n = (cube.vertices[t[1]] - cube.vertices[t[0]])
                         .cross(cube.vertices[t[2]] - cube.vertices[t[0]])
                         .normalized();
      min_dist = std::min(min_dist,
                          std::abs(n.dot(a[i].first - cube.vertices[t[0]])));
    }
    CHECK(min_dist < 1e-9);
  }
}

TEST_CASE("non-watertight meshes are rejected for sampling") {
  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.triangles = {{0, 1, 2}};
  CHECK(!is_watertight(tri));
  CHECK_THROWS_AS(sample_mesh_surface(tri, 1, 0), Error);
  TriangleMesh empty;
  CHECK_THROWS_AS(sample_mesh_surface(empty, 1, 0), EmptyMesh);
}

TEST_CASE("obj round trip") {
  const TriangleMesh m = make_cylinder_mesh(0.03, 0.1, 12);
  save_obj(m, "/tmp/gv_test_mesh.obj");
  const TriangleMesh back = load_obj("/tmp/gv_test_mesh.obj");
  REQUIRE(back.vertices.size() == m.vertices.size());
  REQUIRE(back.triangles.size() == m.triangles.size());
  CHECK(back.shape_class == ShapeClass::CylinderLike);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-15);
  }
  CHECK(is_watertight(back));
}

TEST_CASE("ply round trip preserves float32 payload") {
  PointCloud cloud;
  cloud.view_origin = Vec3(0.1, 0.2, 0.3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    cloud.points.emplace_back(normal(rng), normal(rng), normal(rng));
    cloud.normals.push_back(Vec3(normal(rng), normal(rng), normal(rng)).normalized());
  }
  save_ply(cloud, "/tmp/gv_test_cloud.ply");
  const PointCloud back = load_ply("/tmp/gv_test_cloud.ply");
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      CHECK(static_cast<float>(cloud.points[i][k]) ==
            static_cast<float>(back.points[i][k]));
      CHECK(static_cast<float>(cloud.normals[i][k]) ==
            static_cast<float>(back.normals[i][k]));
    }
  }
}
