#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graspview/geometry.hpp"

namespace gv {

/// One viewpoint expressed in a grasp's reference frame, with the score and
/// ground-truth label of that grasp.
struct ViewSample {
  double azimuth = 0.0;    // theta, (-pi, pi]
  double elevation = 0.0;  // phi, [-pi/2, pi/2]
  double score = 0.0;
  bool label = false;
};

struct SmoothingParams {
  double variance = 0.2;  // rad^2
  double spacing = 0.05;  // rad
  double extent = 1.05;   // rad, grid covers [-extent, extent] per axis

  void validate() const;
  int cells_per_axis() const;
};

Vec3 project_viewpoint(const Vec3& view_position, const Pose& grasp_pose);

/// (azimuth, elevation) of the direction toward a viewpoint in the grasp
/// frame. Head-on (along the approach axis) maps to (0, 0); at the poles
/// azimuth is defined as 0.
std::pair<double, double> direction_to_angles(const Vec3& v);

/// Angular coordinates of a camera position relative to a grasp, measured on
/// the camera's viewing ray: a camera placed in front of the grasp and
/// looking along its approach axis (head-on) maps to (0, 0). Cameras behind
/// the grasped surface land near azimuth +/- pi, outside the default map
/// extent. Throws ZeroVector when the camera coincides with the grasp origin.
std::pair<double, double> viewpoint_angles(const Vec3& view_position,
                                           const Pose& grasp_pose);

/// Classified view samples prior to smoothing. Mergeable value with an
/// empty identity.
struct RawSampleSet {
  struct Entry {
    double azimuth;
    double elevation;
    double score;
    bool label;
    bool predicted_positive;
  };
  double threshold = 0.5;
  std::vector<Entry> entries;

  std::size_t tp() const;
  std::size_t fp() const;
  std::size_t tn() const;
  std::size_t fn() const;
};

RawSampleSet accumulate(const std::vector<ViewSample>& samples, double threshold);
RawSampleSet merge(const RawSampleSet& a, const RawSampleSet& b);

enum class MapChannel : int {
  CandidateDensity = 0,
  TpDensity = 1,
  FpDensity = 2,
  Accuracy = 3,
  TpMinusFp = 4,
};
constexpr int kNumChannels = 5;

/// The five smoothed map channels over the (azimuth, elevation) grid.
/// Cells where the accuracy denominator has no kernel mass hold NaN.
struct ViewMapGrid {
  SmoothingParams params;
  double threshold = 0.5;
  int n_azimuth = 0;
  int n_elevation = 0;
  std::uint64_t sample_count = 0;
  std::string meta;  // UTF-8 JSON
  // row-major, azimuth fastest
  std::vector<double> channels[kNumChannels];

  double cell_coord(int idx) const { return -params.extent + idx * params.spacing; }
  double at(MapChannel c, int azimuth_idx, int elevation_idx) const;

  /// Bilinear interpolation; -inf outside the grid extent.
  double interpolate(MapChannel c, double azimuth, double elevation) const;
};

ViewMapGrid smooth(const RawSampleSet& raw, const SmoothingParams& p);

/// Channel-wise average with equal weight per map; accuracy averages over
/// the maps where it is defined.
ViewMapGrid average_maps(const std::vector<ViewMapGrid>& maps);

void save_map(const ViewMapGrid& m, const std::string& path);
ViewMapGrid load_map(const std::string& path);
void export_map_csv(const ViewMapGrid& m, const std::string& path);

}  // namespace gv
