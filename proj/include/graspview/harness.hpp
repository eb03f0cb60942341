#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "graspview/selection.hpp"

namespace gv {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  void validate(const std::string& name) const;
};

/// Procedural object corpus: boxes and capped cylinders with dimensions
/// drawn uniformly from the intervals.
struct CorpusSpec {
  int n_box = 25;
  int n_cylinder = 14;
  Interval box_x{0.02, 0.06};
  Interval box_y{0.05, 0.12};
  Interval box_z{0.08, 0.20};
  Interval cylinder_radius{0.015, 0.035};
  Interval cylinder_height{0.08, 0.20};
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<TriangleMesh> build_corpus(const CorpusSpec& spec);

TriangleMesh make_box_mesh(double sx, double sy, double sz);
TriangleMesh make_cylinder_mesh(double radius, double height, int segments = 24);

struct ExperimentConfig {
  CorpusSpec corpus;
  CameraModel camera;
  HandGeometry hand;
  CandidateParams candidate_params;
  ScorerSpec scorer;
  SmoothingParams smoothing;
  NeighborhoodSpec neighborhood;
  double threshold = 0.5;     // predicted positive iff score >= threshold
  double friction_mu = 0.5;
  int views_per_object = 80;  // map-building views per object
  int eval_view_pool = 600;   // selectable viewpoints per eval trial
  int eval_trials = 50;       // offline-eval trials per shape class
  std::vector<int> n_values = {5, 10, 25, 50, 100};
  double view_radius = 0.4;        // meters
  double elevation_lo = 0.05;      // view-sphere band, radians
  double elevation_hi = 1.50;
  std::uint64_t master_seed = 0;

  void validate() const;
  /// Sorted key=value listing of every effective field.
  std::string canonical_text() const;
  /// SHA-256 hex digest of canonical_text().
  std::string hash() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct Histogram {
  std::vector<double> edges;   // size counts.size() + 1
  std::vector<long> counts;
};

struct TopNPoint {
  int n;
  double accuracy;
};

struct ResultsRow {
  std::string strategy;
  std::string shape_class;
  long positives = 0;
  long true_positives = 0;
  double accuracy = 0.0;  // true_positives / positives over all trials
  std::vector<TopNPoint> curve;
};

struct ResultsTable {
  std::vector<ResultsRow> rows;
  int skipped_trials = 0;  // trials with no force-closure-positive target
};

struct OfflineEvalResult {
  ResultsTable table;
  std::map<std::string, Histogram> histograms;  // positive-score histograms
  std::vector<std::string> trial_traces;        // JSON lines
};

ViewMapGrid build_map(const ExperimentConfig& config, ShapeClass shape_class,
                      int jobs = 1);

OfflineEvalResult run_offline_eval(const ExperimentConfig& config,
                                   const ViewMapGrid& map,
                                   const std::vector<StrategyKind>& strategies,
                                   ShapeClass shape_class, int jobs = 1);

enum class ViewOrder { V1, V1_V2, V1_V3, V1_V2_V3 };

std::string to_string(ViewOrder order);

struct SequenceResult {
  ViewOrder order;
  int attempts = 0;
  int failures = 0;
  double success_rate = 0.0;
  std::vector<std::string> traces;  // JSON lines, one per trial
};

SequenceResult run_sequence_eval(const ExperimentConfig& config,
                                 const ViewMapGrid& map, ViewOrder order,
                                 int trials, int jobs = 1);

void emit_report(const OfflineEvalResult& result, const ViewMapGrid* map,
                 const ExperimentConfig& config, const std::string& out_dir);
void emit_sequence_report(const std::vector<SequenceResult>& results,
                          const ExperimentConfig& config,
                          const std::string& out_dir);

std::string grasp_to_json(const GraspHypothesis& g);

void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

std::string sha256_hex(const std::string& data);

}  // namespace gv
