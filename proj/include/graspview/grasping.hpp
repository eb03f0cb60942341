#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graspview/geometry.hpp"

namespace gv {

/// Two-finger parallel-jaw hand. The closing region is the
/// aperture x finger_depth x hand_height box between the jaws.
struct HandGeometry {
  double aperture = 0.085;      // max jaw opening, meters
  double finger_depth = 0.06;   // finger extent past the hand base, meters
  double finger_width = 0.01;   // meters
  double hand_height = 0.02;    // extent along the z axis of the grasp frame

  void validate() const;
};

/// 6-DOF grasp. Frame convention: x = approach axis (hand toward object),
/// y = closing axis (finger travel), z = x cross y.
struct GraspHypothesis {
  Pose pose;
  double score = 0.0;
  std::optional<bool> label;

  Vec3 approach_axis() const { return pose.rotation.col(0); }
  Vec3 closing_axis() const { return pose.rotation.col(1); }
};

/// 180 degree rotation about the approach axis (finger swap).
GraspHypothesis flipped(const GraspHypothesis& g);

enum class CandidateVariant { CurvatureAxis, NormalAxis };

struct CandidateParams {
  int n_samples = 60;
  int orientation_steps = 8;
  CandidateVariant variant = CandidateVariant::CurvatureAxis;
  int min_points_in_closing_region = 10;
  double frame_radius = kDefaultFrameRadius;

  void validate() const;
};

std::vector<GraspHypothesis> generate_candidates(const PointCloud& cloud,
                                                 const HandGeometry& hand,
                                                 const CandidateParams& params,
                                                 std::uint64_t seed);

/// Candidate generation restricted to seed points within `radius` of
/// `center`. Used by the alignment view and the second-look re-detection.
std::vector<GraspHypothesis> generate_candidates_near(const PointCloud& cloud,
                                                      const HandGeometry& hand,
                                                      const CandidateParams& params,
                                                      std::uint64_t seed,
                                                      const Vec3& center,
                                                      double radius);

std::vector<int> closing_region_points(const GraspHypothesis& g,
                                       const PointCloud& cloud,
                                       const HandGeometry& hand);

bool check_hand_collision(const GraspHypothesis& g, const PointCloud& cloud,
                          const HandGeometry& hand);

/// Two-contact antipodal force-closure test against the object mesh.
/// Returns false when one or both fingers touch nothing.
bool evaluate_force_closure(const TriangleMesh& mesh, const Pose& object_pose,
                            const GraspHypothesis& g, const HandGeometry& hand,
                            double mu);

enum class ScorerKind { Geometric, NoisyOracle };

/// Surrogate confidence scorer standing in for a trained classifier.
/// Geometric: logistic over closing-region shape features. NoisyOracle:
/// Beta(pos_alpha, pos_beta) when the label is true, parameters swapped
/// when false.
struct ScorerSpec {
  ScorerKind kind = ScorerKind::NoisyOracle;
  // NoisyOracle
  double pos_alpha = 8.0;
  double pos_beta = 2.0;
  // Geometric: score = logistic(bias + w . features), weights fitted by
  // logistic regression on a held-out procedural corpus (~0.74 accuracy;
  // deliberately imperfect so false positives exist)
  double bias = -10.5;
  double w_antipodal = 1.5;
  double w_point_count = 7.0;
  double w_free_margin = 5.5;

  std::string id() const;
};

double score_candidate(const GraspHypothesis& g, const PointCloud& cloud,
                       const HandGeometry& hand, const ScorerSpec& scorer,
                       std::uint64_t seed);

}  // namespace gv
