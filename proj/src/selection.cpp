#include "graspview/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

namespace gv {

namespace {

double rotation_angle(const Mat3& a, const Mat3& b) {
  const double tr = (a.transpose() * b).trace();
  return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
}

double rotation_distance(const GraspHypothesis& a, const GraspHypothesis& b,
                         bool identify_flip) {
  double d = rotation_angle(a.pose.rotation, b.pose.rotation);
  if (identify_flip) {
    d = std::min(d, rotation_angle(a.pose.rotation, flipped(b).pose.rotation));
  }
  return d;
}

// Stable byte order on the pose, used to break score ties deterministically.
int compare_pose_bytes(const Pose& a, const Pose& b) {
  double da[12], db[12];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      da[r * 3 + c] = a.rotation(r, c);
      db[r * 3 + c] = b.rotation(r, c);
    }
  }
  for (int k = 0; k < 3; ++k) {
    da[9 + k] = a.translation[k];
    db[9 + k] = b.translation[k];
  }
  return std::memcmp(da, db, sizeof(da));
}

}  // namespace

void NeighborhoodSpec::validate() const {
  if (!(max_translation > 0) || !(max_rotation > 0)) {
    throw ConfigError("neighborhood bounds must be positive");
  }
}

ViewpointSpec select_viewpoint(const StrategySpec& strategy,
                               const GraspHypothesis& target,
                               const std::vector<ViewpointSpec>& available) {
  if (available.empty()) throw EmptyAvailableSet("no viewpoints to select from");

  if (strategy.kind == StrategyKind::Random) {
    std::mt19937_64 rng(strategy.seed);
    std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
    return available[pick(rng)];
  }

  if (strategy.kind == StrategyKind::HeadOn) {
    // Closest to seeing the grasp along its approach axis, i.e. angles (0,0).
    std::size_t best = 0;
    double best_angle = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < available.size(); ++i) {
      const Vec3 v = -project_viewpoint(available[i].position(), target.pose);
      if (v.norm() < 1e-9) continue;
      const double angle = std::acos(std::clamp(v.normalized().x(), -1.0, 1.0));
      if (angle < best_angle) {
        best_angle = angle;
        best = i;
      }
    }
    return available[best];
  }

  if (strategy.map == nullptr) {
    throw MissingMap("smart strategy requires a viewpoint quality map");
  }
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  double best_abs_phi = 0.0, best_abs_theta = 0.0;
  bool found = false;
  for (std::size_t i = 0; i < available.size(); ++i) {
    const Vec3 v = -project_viewpoint(available[i].position(), target.pose);
    double value = -std::numeric_limits<double>::infinity();
    double theta = 0.0, phi = 0.0;
    if (v.norm() >= 1e-9) {
      std::tie(theta, phi) = direction_to_angles(v);
      value = strategy.map->interpolate(MapChannel::TpMinusFp, theta, phi);
    }
    const bool better =
        !found || value > best_value ||
        (value == best_value &&
         (std::abs(phi) < best_abs_phi ||
          (std::abs(phi) == best_abs_phi && std::abs(theta) < best_abs_theta)));
    if (better) {
      found = true;
      best = i;
      best_value = value;
      best_abs_phi = std::abs(phi);
      best_abs_theta = std::abs(theta);
    }
  }
  return available[best];
}

std::pair<double, double> grasp_distance(const GraspHypothesis& a,
                                         const GraspHypothesis& b) {
  return {(a.pose.translation - b.pose.translation).norm(),
          rotation_angle(a.pose.rotation, b.pose.rotation)};
}

std::vector<GraspHypothesis> prune_to_neighborhood(
    const std::vector<GraspHypothesis>& grasps, const GraspHypothesis& target,
    const NeighborhoodSpec& spec) {
  spec.validate();
  std::vector<GraspHypothesis> out;
  for (const auto& g : grasps) {
    const double dt = (g.pose.translation - target.pose.translation).norm();
    const double dr = rotation_distance(target, g, spec.identify_finger_swap);
    if (dt <= spec.max_translation && dr <= spec.max_rotation) out.push_back(g);
  }
  return out;
}

std::optional<double> top_n_accuracy(const std::vector<GraspHypothesis>& grasps,
                                     int n) {
  if (n < 1) throw ConfigError("top_n_accuracy requires n >= 1");
  if (grasps.empty()) return std::nullopt;
  for (const auto& g : grasps) {
    if (!g.label.has_value()) throw MissingLabel("top_n_accuracy needs labels");
  }
  std::vector<const GraspHypothesis*> sorted;
  sorted.reserve(grasps.size());
  for (const auto& g : grasps) sorted.push_back(&g);
  std::sort(sorted.begin(), sorted.end(),
            [](const GraspHypothesis* a, const GraspHypothesis* b) {
              if (a->score != b->score) return a->score > b->score;
              return compare_pose_bytes(a->pose, b->pose) < 0;
            });
  const int take = std::min<int>(n, static_cast<int>(sorted.size()));
  int correct = 0;
  for (int i = 0; i < take; ++i) correct += *sorted[i]->label ? 1 : 0;
  return static_cast<double>(correct) / take;
}

GraspHypothesis alignment_refine(const PointCloud& cloud,
                                 const GraspHypothesis& target,
                                 const HandGeometry& hand,
                                 const CandidateParams& params, double radius,
                                 std::uint64_t seed, bool identify_finger_swap) {
  if (cloud.empty()) throw NoCandidatesFound("empty cloud");
  const auto candidates = generate_candidates_near(
      cloud, hand, params, seed, target.pose.translation, radius);
  if (candidates.empty()) {
    throw NoCandidatesFound("no candidates within the refinement ball");
  }
  std::size_t best = 0;
  double best_rot = std::numeric_limits<double>::infinity();
  double best_trans = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double dr = rotation_distance(target, candidates[i], identify_finger_swap);
    const double dt =
        (candidates[i].pose.translation - target.pose.translation).norm();
    if (dr < best_rot || (dr == best_rot && dt < best_trans)) {
      best = i;
      best_rot = dr;
      best_trans = dt;
    }
  }
  return candidates[best];
}

}  // namespace gv
