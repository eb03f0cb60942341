#include "graspview/grasping.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

namespace gv {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kBoxEps = 1e-9;
// cos(70 deg): minimum normal/closing-axis alignment for graspable support
constexpr double kMinClosingAlignment = 0.342;

bool inside(double v, double lo, double hi) {
  return v >= lo - kBoxEps && v <= hi + kBoxEps;
}

// Boxes in the grasp frame, origin at the closing-region center.
struct HandBoxes {
  double fd2, ap2, hh2, fw;

  explicit HandBoxes(const HandGeometry& h)
      : fd2(h.finger_depth / 2), ap2(h.aperture / 2), hh2(h.hand_height / 2),
        fw(h.finger_width) {}

  bool in_closing_region(const Vec3& q) const {
    return inside(q.x(), -fd2, fd2) && inside(q.y(), -ap2, ap2) &&
           inside(q.z(), -hh2, hh2);
  }

  bool in_hand_body(const Vec3& q) const {
    if (!inside(q.z(), -hh2, hh2)) return false;
    // fingers
    if (inside(q.x(), -fd2, fd2) && inside(std::abs(q.y()), ap2, ap2 + fw)) {
      return true;
    }
    // base plate behind the fingers (thickness = finger_width)
    return inside(q.x(), -fd2 - fw, -fd2) && inside(q.y(), -ap2 - fw, ap2 + fw);
  }
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sample_beta(std::mt19937_64& rng, double alpha, double beta) {
  std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
  const double a = ga(rng);
  const double b = gb(rng);
  return a / (a + b);
}

std::vector<GraspHypothesis> generate_impl(const PointCloud& cloud,
                                           const HandGeometry& hand,
                                           const CandidateParams& params,
                                           std::uint64_t seed,
                                           const std::vector<int>& pool) {
  hand.validate();
  params.validate();
  std::vector<GraspHypothesis> out;
  if (pool.empty()) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const HandBoxes boxes(hand);

  for (int s = 0; s < params.n_samples; ++s) {
    const Vec3 seed_pt = cloud.points[pool[pick(rng)]];
    LocalFrame frame;
    try {
      frame = estimate_local_frame(cloud, seed_pt, params.frame_radius);
    } catch (const Error&) {
      continue;  // thin or degenerate neighborhood
    }

    // On planar patches the fallback curvature axis is arbitrary; spinning
    // about it would tilt the approach into directions the surface does not
    // support, so degrade to normal-axis orientations there.
    const Vec3 spin_axis =
        params.variant == CandidateVariant::CurvatureAxis && !frame.planar
            ? frame.curvature_axis
            : frame.normal;
    for (int k = 0; k < params.orientation_steps; ++k) {
      const double angle = -kPi / 2 + kPi * k / params.orientation_steps;
      const Mat3 spin = Eigen::AngleAxisd(angle, spin_axis).toRotationMatrix();
      Mat3 rot;
      rot.col(0) = spin * (-frame.normal);                       // approach
      rot.col(1) = spin * frame.curvature_axis.cross(frame.normal);  // closing
      rot.col(2) = rot.col(0).cross(rot.col(1));

      // Slide along the approach axis until contact: the hand advances until
      // its base plane reaches the nearest cloud point inside the jaw
      // footprint, so the closing region spans finger_depth past that point.
      const Mat3 rot_t = rot.transpose();
      double min_x = std::numeric_limits<double>::infinity();
      for (const Vec3& p : cloud.points) {
        const Vec3 q = rot_t * (p - seed_pt);
        if (inside(q.y(), -boxes.ap2, boxes.ap2) &&
            inside(q.z(), -boxes.hh2, boxes.hh2) && q.x() < min_x) {
          min_x = q.x();
        }
      }
      if (!std::isfinite(min_x)) continue;

      GraspHypothesis g;
      g.pose.rotation = rot;
      g.pose.translation = seed_pt + rot.col(0) * (min_x + boxes.fd2 - 1e-6);

      if (check_hand_collision(g, cloud, hand)) continue;
      const auto region = closing_region_points(g, cloud, hand);
      if (static_cast<int>(region.size()) < params.min_points_in_closing_region) {
        continue;
      }
      // The jaws must be able to squeeze something: at least one point in
      // the closing region whose normal is not almost orthogonal to the
      // closing axis. Rejects e.g. a flat patch pinched edge-on, where the
      // fingers would close through free space.
      if (cloud.has_normals()) {
        const Vec3 closing = g.closing_axis();
        double best = 0.0;
        for (int idx : region) {
          best = std::max(best, std::abs(cloud.normals[idx].dot(closing)));
        }
        if (best < kMinClosingAlignment) continue;
      }
      out.push_back(g);
    }
  }
  return out;
}

}  // namespace

void HandGeometry::validate() const {
  if (!(aperture > 0 && finger_depth > 0 && finger_width > 0 && hand_height > 0)) {
    throw ConfigError("hand dimensions must be positive");
  }
  if (!(aperture > 2 * finger_width)) {
    throw ConfigError("hand aperture must exceed twice the finger width");
  }
}

void CandidateParams::validate() const {
  if (n_samples < 1 || orientation_steps < 1) {
    throw ConfigError("candidate params require n_samples >= 1, orientation_steps >= 1");
  }
}

GraspHypothesis flipped(const GraspHypothesis& g) {
  GraspHypothesis out = g;
  out.pose.rotation.col(1) *= -1.0;
  out.pose.rotation.col(2) *= -1.0;
  return out;
}

std::vector<GraspHypothesis> generate_candidates(const PointCloud& cloud,
                                                 const HandGeometry& hand,
                                                 const CandidateParams& params,
                                                 std::uint64_t seed) {
  std::vector<int> pool(cloud.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
  return generate_impl(cloud, hand, params, seed, pool);
}

std::vector<GraspHypothesis> generate_candidates_near(const PointCloud& cloud,
                                                      const HandGeometry& hand,
                                                      const CandidateParams& params,
                                                      std::uint64_t seed,
                                                      const Vec3& center,
                                                      double radius) {
  std::vector<int> pool;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((cloud.points[i] - center).squaredNorm() <= r2) {
      pool.push_back(static_cast<int>(i));
    }
  }
  return generate_impl(cloud, hand, params, seed, pool);
}

std::vector<int> closing_region_points(const GraspHypothesis& g,
                                       const PointCloud& cloud,
                                       const HandGeometry& hand) {
  const HandBoxes boxes(hand);
  const Pose to_grasp = invert(g.pose);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    if (boxes.in_closing_region(transform_point(to_grasp, cloud.points[i]))) {
      out.push_back(i);
    }
  }
  return out;
}

bool check_hand_collision(const GraspHypothesis& g, const PointCloud& cloud,
                          const HandGeometry& hand) {
  const HandBoxes boxes(hand);
  const Pose to_grasp = invert(g.pose);
  for (const Vec3& p : cloud.points) {
    if (boxes.in_hand_body(transform_point(to_grasp, p))) return true;
  }
  return false;
}

bool evaluate_force_closure(const TriangleMesh& mesh, const Pose& object_pose,
                            const GraspHypothesis& g, const HandGeometry& hand,
                            double mu) {
  if (!(mu > 0)) throw ConfigError("friction coefficient must be positive");
  const HandBoxes boxes(hand);
  const TriangleMesh local = transformed(mesh, compose(invert(g.pose), object_pose));

  // Close the jaws: a 3x3 ray grid per finger face, rays along +/- closing
  // axis, first hit per ray, contact = average over hitting rays.
  auto contact = [&](double y_start, double dir_y)
      -> std::optional<std::pair<Vec3, Vec3>> {
    Vec3 sum_p = Vec3::Zero(), sum_n = Vec3::Zero();
    int hits = 0;
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const double x = -boxes.fd2 + hand.finger_depth * (2 * j + 1) / 6.0;
        const double z = -boxes.hh2 + hand.hand_height * (2 * k + 1) / 6.0;
        const Vec3 origin(x, y_start, z);
        const Vec3 dir(0.0, dir_y, 0.0);
        auto hit = raycast(local, origin, dir, 0.0, hand.aperture);
        if (!hit) continue;
        sum_p += origin + hit->t * dir;
        Vec3 n = hit->normal;
        if (n.dot(dir) > 0) n = -n;  // outward: must oppose the closing ray
        sum_n += n;
        ++hits;
      }
    }
    if (hits == 0) return std::nullopt;
    Vec3 n = sum_n / hits;
    if (n.norm() < 1e-9) return std::nullopt;
    return std::make_pair(Vec3(sum_p / hits), Vec3(n.normalized()));
  };

  const auto ca = contact(boxes.ap2, -1.0);   // finger at +y closes toward -y
  const auto cb = contact(-boxes.ap2, 1.0);   // finger at -y closes toward +y
  if (!ca || !cb) return false;               // NoContact

  const double cone = std::atan(mu);
  const double ang_a = std::acos(std::clamp(ca->second.dot(Vec3::UnitY()), -1.0, 1.0));
  const double ang_b = std::acos(std::clamp(cb->second.dot(-Vec3::UnitY()), -1.0, 1.0));
  const double separation = std::abs(ca->first.y() - cb->first.y());
  return ang_a <= cone && ang_b <= cone && separation <= hand.aperture + kBoxEps;
}

std::string ScorerSpec::id() const {
  if (kind == ScorerKind::NoisyOracle) {
    return "noisy_oracle(" + std::to_string(pos_alpha) + "," +
           std::to_string(pos_beta) + ")";
  }
  return "geometric";
}

double score_candidate(const GraspHypothesis& g, const PointCloud& cloud,
                       const HandGeometry& hand, const ScorerSpec& scorer,
                       std::uint64_t seed) {
  if (scorer.kind == ScorerKind::NoisyOracle) {
    if (!g.label.has_value()) {
      throw MissingLabel("NoisyOracle scorer requires a ground-truth label");
    }
    std::mt19937_64 rng(seed);
    return *g.label ? sample_beta(rng, scorer.pos_alpha, scorer.pos_beta)
                    : sample_beta(rng, scorer.pos_beta, scorer.pos_alpha);
  }

  const auto region = closing_region_points(g, cloud, hand);
  double f_antipodal = 0.0, f_count = 0.0, f_margin = 0.0;
  if (!region.empty()) {
    const Vec3 closing_world = g.closing_axis();
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    const Pose to_grasp = invert(g.pose);
    double align = 0.0;
    for (int i : region) {
      if (cloud.has_normals()) align += std::abs(cloud.normals[i].dot(closing_world));
      const double y = transform_point(to_grasp, cloud.points[i]).y();
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    f_antipodal = cloud.has_normals() ? align / region.size() : 0.0;
    f_count = std::min(region.size() / 30.0, 1.0);
    f_margin = 1.0 - (ymax - ymin) / hand.aperture;
  }
  return logistic(scorer.bias + scorer.w_antipodal * f_antipodal +
                  scorer.w_point_count * f_count + scorer.w_free_margin * f_margin);
}

}  // namespace gv
