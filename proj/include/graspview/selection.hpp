#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "graspview/grasping.hpp"
#include "graspview/simcam.hpp"
#include "graspview/viewmap.hpp"

namespace gv {

struct NeighborhoodSpec {
  double max_translation = 0.02;             // meters
  double max_rotation = 20.0 * 3.14159265358979323846 / 180.0;  // radians
  // The hand is symmetric under a finger swap; when set, the rotation
  // distance is the minimum over the grasp and its 180-degree flip about
  // the approach axis.
  bool identify_finger_swap = true;

  void validate() const;
};

enum class StrategyKind { Smart, HeadOn, Random };

struct StrategySpec {
  StrategyKind kind = StrategyKind::Random;
  const ViewMapGrid* map = nullptr;  // required for Smart
  std::uint64_t seed = 0;            // used by Random
};

ViewpointSpec select_viewpoint(const StrategySpec& strategy,
                               const GraspHypothesis& target,
                               const std::vector<ViewpointSpec>& available);

/// (translation, rotation) distance between two grasp poses; rotation is
/// the geodesic angle on SO(3).
std::pair<double, double> grasp_distance(const GraspHypothesis& a,
                                         const GraspHypothesis& b);

std::vector<GraspHypothesis> prune_to_neighborhood(
    const std::vector<GraspHypothesis>& grasps, const GraspHypothesis& target,
    const NeighborhoodSpec& spec);

/// Fraction of true labels among the top min(n, size) grasps by score.
/// Empty input yields nullopt, distinguishable from 0.0.
std::optional<double> top_n_accuracy(const std::vector<GraspHypothesis>& grasps,
                                     int n);

/// Candidate generation near the target, snapping to the candidate best
/// aligned in rotation (the close-range alignment view, no scoring).
GraspHypothesis alignment_refine(const PointCloud& cloud,
                                 const GraspHypothesis& target,
                                 const HandGeometry& hand,
                                 const CandidateParams& params, double radius,
                                 std::uint64_t seed,
                                 bool identify_finger_swap = true);

}  // namespace gv
