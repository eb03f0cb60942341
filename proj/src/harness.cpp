#include "graspview/harness.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gv {

namespace {
constexpr double kPi = std::numbers::pi;

// Stream tags so every RNG use in the pipeline has its own derived seed.
enum SeedTag : std::uint64_t {
  kTagCorpus = 0x10,
  kTagMapViews = 0x20,
  kTagMapRender = 0x21,
  kTagMapCandidates = 0x22,
  kTagMapScore = 0x23,
  kTagEvalBase = 0x30,
  kTagSeqBase = 0x40,
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Smart: return "smart";
    case StrategyKind::HeadOn: return "head-on";
    case StrategyKind::Random: return "random";
  }
  return "?";
}

double sample_interval(const Interval& iv, std::mt19937_64& rng) {
  if (iv.hi == iv.lo) return iv.lo;
  std::uniform_real_distribution<double> d(iv.lo, iv.hi);
  return d(rng);
}

const GraspHypothesis* best_scored(const std::vector<GraspHypothesis>& grasps) {
  const GraspHypothesis* best = nullptr;
  for (const auto& g : grasps) {
    if (!best || g.score > best->score) best = &g;
  }
  return best;
}

// Label (force closure) and score every candidate in place.
void label_and_score(std::vector<GraspHypothesis>& grasps, const TriangleMesh& mesh,
                     const PointCloud& cloud, const ExperimentConfig& cfg,
                     std::uint64_t score_seed) {
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    grasps[i].label =
        evaluate_force_closure(mesh, Pose::identity(), grasps[i], cfg.hand,
                               cfg.friction_mu);
    grasps[i].score = score_candidate(grasps[i], cloud, cfg.hand, cfg.scorer,
                                      derive_seed(score_seed, i));
  }
}

ViewpointSpec headon_close_view(const GraspHypothesis& target, double radius) {
  ViewpointSpec v;
  v.target = target.pose.translation;
  v.radius = radius;
  const Vec3 d = -target.approach_axis();  // viewpoint direction, grasp to camera
  v.elevation = std::clamp(std::asin(std::clamp(d.z(), -1.0, 1.0)), -1.45, 1.45);
  v.azimuth = std::atan2(d.y(), d.x());
  return v;
}

Histogram score_histogram(const std::vector<double>& scores) {
  Histogram h;
  const int bins = 20;
  h.counts.assign(bins, 0);
  for (int i = 0; i <= bins; ++i) h.edges.push_back(i / static_cast<double>(bins));
  for (double s : scores) {
    int b = std::min(static_cast<int>(s * bins), bins - 1);
    h.counts[std::max(b, 0)]++;
  }
  return h;
}

void write_footer(std::ofstream& out, const ExperimentConfig& cfg) {
  out << "# config_hash=" << cfg.hash() << " master_seed=" << cfg.master_seed
      << "\n";
}

}  // namespace

void Interval::validate(const std::string& name) const {
  if (!(lo > 0) || hi < lo) {
    throw ConfigError("interval " + name + " must be positive and ordered");
  }
}

void CorpusSpec::validate() const {
  if (n_box < 0 || n_cylinder < 0) throw ConfigError("corpus counts must be >= 0");
  box_x.validate("box_x");
  box_y.validate("box_y");
  box_z.validate("box_z");
  cylinder_radius.validate("cylinder_radius");
  cylinder_height.validate("cylinder_height");
}

TriangleMesh make_box_mesh(double sx, double sy, double sz) {
  TriangleMesh m;
  m.shape_class = ShapeClass::BoxLike;
  const double x = sx / 2, y = sy / 2, z = sz / 2;
  m.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z}};
  m.triangles = {{0, 3, 2}, {0, 2, 1},   // -z
                 {4, 5, 6}, {4, 6, 7},   // +z
                 {0, 1, 5}, {0, 5, 4},   // -y
                 {3, 7, 6}, {3, 6, 2},   // +y
                 {0, 4, 7}, {0, 7, 3},   // -x
                 {1, 2, 6}, {1, 6, 5}};  // +x
  return m;
}

TriangleMesh make_cylinder_mesh(double radius, double height, int segments) {
  TriangleMesh m;
  m.shape_class = ShapeClass::CylinderLike;
  const double z = height / 2;
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * kPi * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -z);
  }
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * kPi * i / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
  }
  const int cb = 2 * segments;      // bottom cap center
  const int ct = 2 * segments + 1;  // top cap center
  m.vertices.emplace_back(0, 0, -z);
  m.vertices.emplace_back(0, 0, z);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.triangles.push_back({i, j, segments + j});
    m.triangles.push_back({i, segments + j, segments + i});
    m.triangles.push_back({cb, j, i});
    m.triangles.push_back({ct, segments + i, segments + j});
  }
  return m;
}

std::vector<TriangleMesh> build_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, kTagCorpus));
  std::vector<TriangleMesh> out;
  out.reserve(spec.n_box + spec.n_cylinder);
  for (int i = 0; i < spec.n_box; ++i) {
    const double sx = sample_interval(spec.box_x, rng);
    const double sy = sample_interval(spec.box_y, rng);
    const double sz = sample_interval(spec.box_z, rng);
    out.push_back(make_box_mesh(sx, sy, sz));
  }
  for (int i = 0; i < spec.n_cylinder; ++i) {
    const double r = sample_interval(spec.cylinder_radius, rng);
    const double h = sample_interval(spec.cylinder_height, rng);
    out.push_back(make_cylinder_mesh(r, h));
  }
  return out;
}

void ExperimentConfig::validate() const {
  corpus.validate();
  camera.validate();
  hand.validate();
  candidate_params.validate();
  smoothing.validate();
  neighborhood.validate();
  if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("threshold in [0,1]");
  if (!(friction_mu > 0)) throw ConfigError("friction_mu must be positive");
  if (views_per_object < 1 || eval_view_pool < 1 || eval_trials < 1) {
    throw ConfigError("views_per_object, eval_view_pool, eval_trials must be >= 1");
  }
  if (n_values.empty()) throw ConfigError("n_values must be nonempty");
  for (int n : n_values) {
    if (n < 1) throw ConfigError("n_values entries must be >= 1");
  }
  if (!(view_radius >= camera.min_depth)) {
    throw ConfigError("view_radius must be >= camera min_depth");
  }
  if (elevation_hi < elevation_lo) throw ConfigError("bad elevation band");
}

std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["corpus.n_box"] = std::to_string(corpus.n_box);
  kv["corpus.n_cylinder"] = std::to_string(corpus.n_cylinder);
  kv["corpus.box_x_lo"] = fmt_double(corpus.box_x.lo);
  kv["corpus.box_x_hi"] = fmt_double(corpus.box_x.hi);
  kv["corpus.box_y_lo"] = fmt_double(corpus.box_y.lo);
  kv["corpus.box_y_hi"] = fmt_double(corpus.box_y.hi);
  kv["corpus.box_z_lo"] = fmt_double(corpus.box_z.lo);
  kv["corpus.box_z_hi"] = fmt_double(corpus.box_z.hi);
  kv["corpus.cylinder_radius_lo"] = fmt_double(corpus.cylinder_radius.lo);
  kv["corpus.cylinder_radius_hi"] = fmt_double(corpus.cylinder_radius.hi);
  kv["corpus.cylinder_height_lo"] = fmt_double(corpus.cylinder_height.lo);
  kv["corpus.cylinder_height_hi"] = fmt_double(corpus.cylinder_height.hi);
  kv["corpus.seed"] = std::to_string(corpus.seed);
  kv["camera.width"] = std::to_string(camera.width);
  kv["camera.height"] = std::to_string(camera.height);
  kv["camera.focal_length"] = fmt_double(camera.focal_length);
  kv["camera.min_depth"] = fmt_double(camera.min_depth);
  kv["camera.max_depth"] = fmt_double(camera.max_depth);
  kv["camera.noise_sigma"] = fmt_double(camera.noise_sigma);
  kv["hand.aperture"] = fmt_double(hand.aperture);
  kv["hand.finger_depth"] = fmt_double(hand.finger_depth);
  kv["hand.finger_width"] = fmt_double(hand.finger_width);
  kv["hand.hand_height"] = fmt_double(hand.hand_height);
  kv["candidates.n_samples"] = std::to_string(candidate_params.n_samples);
  kv["candidates.orientation_steps"] =
      std::to_string(candidate_params.orientation_steps);
  kv["candidates.variant"] =
      candidate_params.variant == CandidateVariant::CurvatureAxis ? "curvature"
                                                                  : "normal";
  kv["candidates.min_points"] =
      std::to_string(candidate_params.min_points_in_closing_region);
  kv["candidates.frame_radius"] = fmt_double(candidate_params.frame_radius);
  kv["scorer.kind"] =
      scorer.kind == ScorerKind::NoisyOracle ? "noisy_oracle" : "geometric";
  kv["scorer.pos_alpha"] = fmt_double(scorer.pos_alpha);
  kv["scorer.pos_beta"] = fmt_double(scorer.pos_beta);
  kv["scorer.bias"] = fmt_double(scorer.bias);
  kv["scorer.w_antipodal"] = fmt_double(scorer.w_antipodal);
  kv["scorer.w_point_count"] = fmt_double(scorer.w_point_count);
  kv["scorer.w_free_margin"] = fmt_double(scorer.w_free_margin);
  kv["smoothing.variance"] = fmt_double(smoothing.variance);
  kv["smoothing.spacing"] = fmt_double(smoothing.spacing);
  kv["smoothing.extent"] = fmt_double(smoothing.extent);
  kv["neighborhood.max_translation"] = fmt_double(neighborhood.max_translation);
  kv["neighborhood.max_rotation"] = fmt_double(neighborhood.max_rotation);
  kv["neighborhood.identify_finger_swap"] =
      neighborhood.identify_finger_swap ? "true" : "false";
  kv["threshold"] = fmt_double(threshold);
  kv["friction_mu"] = fmt_double(friction_mu);
  kv["views_per_object"] = std::to_string(views_per_object);
  kv["eval_view_pool"] = std::to_string(eval_view_pool);
  kv["eval_trials"] = std::to_string(eval_trials);
  std::string ns;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (i) ns += ",";
    ns += std::to_string(n_values[i]);
  }
  kv["n_values"] = ns;
  kv["view_radius"] = fmt_double(view_radius);
  kv["elevation_lo"] = fmt_double(elevation_lo);
  kv["elevation_hi"] = fmt_double(elevation_hi);
  kv["master_seed"] = std::to_string(master_seed);

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical_text()); }

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      auto d = [&] { return std::stod(val); };
      auto i = [&] { return std::stoi(val); };
      auto u = [&] { return std::stoull(val); };
      auto b = [&] {
        if (val == "true") return true;
        if (val == "false") return false;
        throw ConfigError("expected true/false");
      };
      if (key == "corpus.n_box") cfg.corpus.n_box = i();
      else if (key == "corpus.n_cylinder") cfg.corpus.n_cylinder = i();
      else if (key == "corpus.box_x_lo") cfg.corpus.box_x.lo = d();
      else if (key == "corpus.box_x_hi") cfg.corpus.box_x.hi = d();
      else if (key == "corpus.box_y_lo") cfg.corpus.box_y.lo = d();
      else if (key == "corpus.box_y_hi") cfg.corpus.box_y.hi = d();
      else if (key == "corpus.box_z_lo") cfg.corpus.box_z.lo = d();
      else if (key == "corpus.box_z_hi") cfg.corpus.box_z.hi = d();
      else if (key == "corpus.cylinder_radius_lo") cfg.corpus.cylinder_radius.lo = d();
      else if (key == "corpus.cylinder_radius_hi") cfg.corpus.cylinder_radius.hi = d();
      else if (key == "corpus.cylinder_height_lo") cfg.corpus.cylinder_height.lo = d();
      else if (key == "corpus.cylinder_height_hi") cfg.corpus.cylinder_height.hi = d();
      else if (key == "corpus.seed") cfg.corpus.seed = u();
      else if (key == "camera.width") cfg.camera.width = i();
      else if (key == "camera.height") cfg.camera.height = i();
      else if (key == "camera.focal_length") cfg.camera.focal_length = d();
      else if (key == "camera.min_depth") cfg.camera.min_depth = d();
      else if (key == "camera.max_depth") cfg.camera.max_depth = d();
      else if (key == "camera.noise_sigma") cfg.camera.noise_sigma = d();
      else if (key == "hand.aperture") cfg.hand.aperture = d();
      else if (key == "hand.finger_depth") cfg.hand.finger_depth = d();
      else if (key == "hand.finger_width") cfg.hand.finger_width = d();
      else if (key == "hand.hand_height") cfg.hand.hand_height = d();
      else if (key == "candidates.n_samples") cfg.candidate_params.n_samples = i();
      else if (key == "candidates.orientation_steps")
        cfg.candidate_params.orientation_steps = i();
      else if (key == "candidates.variant") {
        if (val == "curvature") cfg.candidate_params.variant = CandidateVariant::CurvatureAxis;
        else if (val == "normal") cfg.candidate_params.variant = CandidateVariant::NormalAxis;
        else throw ConfigError("unknown variant: " + val);
      } else if (key == "candidates.min_points")
        cfg.candidate_params.min_points_in_closing_region = i();
      else if (key == "candidates.frame_radius") cfg.candidate_params.frame_radius = d();
      else if (key == "scorer.kind") {
        if (val == "noisy_oracle") cfg.scorer.kind = ScorerKind::NoisyOracle;
        else if (val == "geometric") cfg.scorer.kind = ScorerKind::Geometric;
        else throw ConfigError("unknown scorer kind: " + val);
      } else if (key == "scorer.pos_alpha") cfg.scorer.pos_alpha = d();
      else if (key == "scorer.pos_beta") cfg.scorer.pos_beta = d();
      else if (key == "scorer.bias") cfg.scorer.bias = d();
      else if (key == "scorer.w_antipodal") cfg.scorer.w_antipodal = d();
      else if (key == "scorer.w_point_count") cfg.scorer.w_point_count = d();
      else if (key == "scorer.w_free_margin") cfg.scorer.w_free_margin = d();
      else if (key == "smoothing.variance") cfg.smoothing.variance = d();
      else if (key == "smoothing.spacing") cfg.smoothing.spacing = d();
      else if (key == "smoothing.extent") cfg.smoothing.extent = d();
      else if (key == "neighborhood.max_translation")
        cfg.neighborhood.max_translation = d();
      else if (key == "neighborhood.max_rotation") cfg.neighborhood.max_rotation = d();
      else if (key == "neighborhood.identify_finger_swap")
        cfg.neighborhood.identify_finger_swap = b();
      else if (key == "threshold") cfg.threshold = d();
      else if (key == "friction_mu") cfg.friction_mu = d();
      else if (key == "views_per_object") cfg.views_per_object = i();
      else if (key == "eval_view_pool") cfg.eval_view_pool = i();
      else if (key == "eval_trials") cfg.eval_trials = i();
      else if (key == "n_values") {
        cfg.n_values.clear();
        std::istringstream ss(val);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.n_values.push_back(std::stoi(trim(tok)));
      } else if (key == "view_radius") cfg.view_radius = d();
      else if (key == "elevation_lo") cfg.elevation_lo = d();
      else if (key == "elevation_hi") cfg.elevation_hi = d();
      else if (key == "master_seed") cfg.master_seed = u();
      else throw ConfigError("unknown key: " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out += hex[b >> 4];
    out += hex[b & 0xf];
  }
  return out;
}

std::string grasp_to_json(const GraspHypothesis& g) {
  nlohmann::json j;
  std::vector<double> pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.push_back(g.pose.rotation(r, c));
  }
  for (int k = 0; k < 3; ++k) pose.push_back(g.pose.translation[k]);
  j["pose"] = pose;
  j["score"] = g.score;
  if (g.label.has_value()) j["label"] = *g.label;
  else j["label"] = nullptr;
  return j.dump();
}

ViewMapGrid build_map(const ExperimentConfig& config, ShapeClass shape_class,
                      int jobs) {
  config.validate();
  const auto corpus = build_corpus(config.corpus);
  std::vector<int> object_ids;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    if (corpus[i].shape_class == shape_class) object_ids.push_back(i);
  }
  if (object_ids.empty()) {
    throw ConfigError("corpus has no objects of class " + to_string(shape_class));
  }

  std::vector<ViewMapGrid> per_object(object_ids.size());
  parallel_for(static_cast<int>(object_ids.size()), jobs, [&](int k) {
    const int oi = object_ids[k];
    const TriangleMesh& mesh = corpus[oi];
    const std::vector<SceneObject> scene = {{mesh, Pose::identity()}};
    std::vector<ViewSample> samples;
    const auto views = sample_view_sphere(
        config.views_per_object, config.elevation_lo, config.elevation_hi,
        derive_seed(config.master_seed, kTagMapViews, oi), config.view_radius);
    for (int vi = 0; vi < static_cast<int>(views.size()); ++vi) {
      const Pose cam_pose = viewpoint_to_pose(views[vi]);
      try {
        const PointCloud cloud =
            render_cloud(scene, config.camera, cam_pose,
                         derive_seed(config.master_seed, kTagMapRender, oi, vi));
        if (cloud.empty()) continue;
        auto grasps = generate_candidates(
            cloud, config.hand, config.candidate_params,
            derive_seed(config.master_seed, kTagMapCandidates, oi, vi));
        label_and_score(grasps, mesh, cloud, config,
                        derive_seed(config.master_seed, kTagMapScore, oi, vi));
        for (const auto& g : grasps) {
          const auto [theta, phi] = viewpoint_angles(cam_pose.translation, g.pose);
          samples.push_back({theta, phi, g.score, *g.label});
        }
      } catch (const Error& e) {
        throw Error("object " + std::to_string(oi) + ", view " +
                    std::to_string(vi) + ": " + e.what());
      }
    }
    per_object[k] = smooth(accumulate(samples, config.threshold), config.smoothing);
  });

  ViewMapGrid map = average_maps(per_object);
  nlohmann::json meta;
  meta["shape_class"] = to_string(shape_class);
  meta["variant"] = config.candidate_params.variant == CandidateVariant::CurvatureAxis
                        ? "curvature"
                        : "normal";
  meta["scorer"] = config.scorer.id();
  meta["master_seed"] = config.master_seed;
  meta["config_hash"] = config.hash();
  map.meta = meta.dump();
  return map;
}

namespace {

struct TrialOutcome {
  bool skipped = false;
  // per strategy
  struct PerStrategy {
    long positives = 0;
    long true_positives = 0;
    std::vector<double> positive_scores;
    // All neighborhood detections (scored + labeled), pooled for the top-n
    // curve: the curve ranks every detection in the category by score and
    // reports accuracy among the global top n.
    std::vector<GraspHypothesis> detections;
  };
  std::vector<PerStrategy> per_strategy;
  std::string trace;
};

}  // namespace

OfflineEvalResult run_offline_eval(const ExperimentConfig& config,
                                   const ViewMapGrid& map,
                                   const std::vector<StrategyKind>& strategies,
                                   ShapeClass shape_class, int jobs) {
  config.validate();
  if (map.params.spacing != config.smoothing.spacing ||
      map.params.extent != config.smoothing.extent ||
      map.params.variance != config.smoothing.variance) {
    throw ConfigError("map smoothing params do not match the config");
  }
  const auto corpus = build_corpus(config.corpus);
  std::vector<int> object_ids;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    if (corpus[i].shape_class == shape_class) object_ids.push_back(i);
  }
  if (object_ids.empty()) {
    throw ConfigError("corpus has no objects of class " + to_string(shape_class));
  }
  const std::uint64_t class_id = shape_class == ShapeClass::BoxLike ? 0 : 1;

  std::vector<TrialOutcome> outcomes(config.eval_trials);
  parallel_for(config.eval_trials, jobs, [&](int t) {
    TrialOutcome& out = outcomes[t];
    out.per_strategy.resize(strategies.size());
    const int oi = object_ids[t % object_ids.size()];
    const TriangleMesh& mesh = corpus[oi];
    const std::vector<SceneObject> scene = {{mesh, Pose::identity()}};
    const std::uint64_t base =
        derive_seed(config.master_seed, kTagEvalBase, class_id, t);

    // Target: a random force-closure-positive grasp seen from a random view.
    const auto tview = sample_view_sphere(1, config.elevation_lo,
                                          config.elevation_hi, derive_seed(base, 1),
                                          config.view_radius)[0];
    const PointCloud tcloud = render_cloud(scene, config.camera,
                                           viewpoint_to_pose(tview),
                                           derive_seed(base, 2));
    auto tcands = generate_candidates(tcloud, config.hand, config.candidate_params,
                                      derive_seed(base, 3));
    std::vector<GraspHypothesis> positives;
    for (auto& g : tcands) {
      if (evaluate_force_closure(mesh, Pose::identity(), g, config.hand,
                                 config.friction_mu)) {
        positives.push_back(g);
      }
    }
    nlohmann::json trace;
    trace["trial"] = t;
    trace["object"] = oi;
    trace["shape_class"] = to_string(shape_class);
    if (positives.empty()) {
      out.skipped = true;
      trace["skipped"] = "no force-closure-positive grasp on object";
      out.trace = trace.dump();
      return;
    }
    std::mt19937_64 pick_rng(derive_seed(base, 4));
    std::uniform_int_distribution<std::size_t> pick(0, positives.size() - 1);
    const GraspHypothesis target = positives[pick(pick_rng)];
    trace["target"] = nlohmann::json::parse(grasp_to_json(target));

    const auto pool = sample_view_sphere(config.eval_view_pool, config.elevation_lo,
                                         config.elevation_hi, derive_seed(base, 5),
                                         config.view_radius);

    trace["strategies"] = nlohmann::json::array();
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      StrategySpec spec;
      spec.kind = strategies[si];
      spec.map = &map;
      spec.seed = derive_seed(base, 6, si);
      const ViewpointSpec view = select_viewpoint(spec, target, pool);
      const PointCloud cloud = render_cloud(scene, config.camera,
                                            viewpoint_to_pose(view),
                                            derive_seed(base, 7, si));
      auto grasps = generate_candidates(cloud, config.hand, config.candidate_params,
                                        derive_seed(base, 8, si));
      label_and_score(grasps, mesh, cloud, config, derive_seed(base, 9, si));
      const auto pruned = prune_to_neighborhood(grasps, target, config.neighborhood);

      auto& st = out.per_strategy[si];
      for (const auto& g : pruned) {
        if (g.score >= config.threshold) {
          ++st.positives;
          if (*g.label) ++st.true_positives;
          st.positive_scores.push_back(g.score);
        }
      }
      st.detections.insert(st.detections.end(), pruned.begin(), pruned.end());
      nlohmann::json srec;
      srec["strategy"] = strategy_name(strategies[si]);
      srec["view_azimuth"] = view.azimuth;
      srec["view_elevation"] = view.elevation;
      srec["candidates_detected"] = grasps.size();
      srec["candidates_after_pruning"] = pruned.size();
      srec["positives"] = st.positives;
      srec["true_positives"] = st.true_positives;
      trace["strategies"].push_back(srec);
    }
    out.trace = trace.dump();
  });

  OfflineEvalResult result;
  for (std::size_t si = 0; si < strategies.size(); ++si) {
    ResultsRow row;
    row.strategy = strategy_name(strategies[si]);
    row.shape_class = to_string(shape_class);
    std::vector<double> scores;
    // The top-n curve pools every neighborhood detection in the category,
    // ranks the pool by score, and reports accuracy among the global top n.
    // A strategy whose views detect few grasps runs out of high-scoring ones
    // as n grows, so its curve drops off.
    std::vector<GraspHypothesis> pool;
    for (const auto& o : outcomes) {
      if (o.skipped) continue;
      const auto& st = o.per_strategy[si];
      row.positives += st.positives;
      row.true_positives += st.true_positives;
      scores.insert(scores.end(), st.positive_scores.begin(),
                    st.positive_scores.end());
      pool.insert(pool.end(), st.detections.begin(), st.detections.end());
    }
    row.accuracy = row.positives > 0
                       ? static_cast<double>(row.true_positives) / row.positives
                       : 0.0;
    for (int n : config.n_values) {
      const auto acc = top_n_accuracy(pool, n);
      row.curve.push_back(
          {n, acc ? *acc : std::numeric_limits<double>::quiet_NaN()});
    }
    result.table.rows.push_back(row);
    result.histograms[row.strategy] = score_histogram(scores);
  }
  for (const auto& o : outcomes) {
    if (o.skipped) ++result.table.skipped_trials;
    result.trial_traces.push_back(o.trace);
  }
  return result;
}

std::string to_string(ViewOrder order) {
  switch (order) {
    case ViewOrder::V1: return "1";
    case ViewOrder::V1_V2: return "1-2";
    case ViewOrder::V1_V3: return "1-3";
    case ViewOrder::V1_V2_V3: return "1-2-3";
  }
  return "?";
}

SequenceResult run_sequence_eval(const ExperimentConfig& config,
                                 const ViewMapGrid& map, ViewOrder order,
                                 int trials, int jobs) {
  config.validate();
  if (trials < 1) throw ConfigError("sequence eval requires trials >= 1");
  const bool use_smart = order == ViewOrder::V1_V2 || order == ViewOrder::V1_V2_V3;
  const bool use_alignment =
      order == ViewOrder::V1_V3 || order == ViewOrder::V1_V2_V3;
  const auto corpus = build_corpus(config.corpus);
  if (corpus.empty()) throw ConfigError("empty corpus");
  constexpr double kRefineRadius = 0.08;

  struct Trial {
    bool success = false;
    std::string trace;
  };
  std::vector<Trial> results(trials);

  parallel_for(trials, jobs, [&](int t) {
    const int oi = t % static_cast<int>(corpus.size());
    const TriangleMesh& mesh = corpus[oi];
    const std::vector<SceneObject> scene = {{mesh, Pose::identity()}};
    // Seeds depend only on the trial id, so different view orders run on
    // paired randomness.
    const std::uint64_t base = derive_seed(config.master_seed, kTagSeqBase, t);
    nlohmann::json trace;
    trace["trial"] = t;
    trace["object"] = oi;
    trace["order"] = to_string(order);
    trace["views"] = nlohmann::json::array();

    const auto pool = sample_view_sphere(config.eval_view_pool, config.elevation_lo,
                                         config.elevation_hi, derive_seed(base, 1),
                                         config.view_radius);
    auto record_view = [&](const char* kind, const ViewpointSpec& v) {
      trace["views"].push_back({{"kind", kind},
                                {"azimuth", v.azimuth},
                                {"elevation", v.elevation},
                                {"radius", v.radius}});
    };

    // View 1: random.
    StrategySpec random_spec;
    random_spec.kind = StrategyKind::Random;
    random_spec.seed = derive_seed(base, 2);
    GraspHypothesis dummy_target;  // the random strategy never reads it
    const ViewpointSpec v1 = select_viewpoint(random_spec, dummy_target, pool);
    record_view("random", v1);
    const PointCloud cloud1 = render_cloud(scene, config.camera,
                                           viewpoint_to_pose(v1),
                                           derive_seed(base, 3));
    auto grasps1 = generate_candidates(cloud1, config.hand, config.candidate_params,
                                       derive_seed(base, 4));
    label_and_score(grasps1, mesh, cloud1, config, derive_seed(base, 5));
    const GraspHypothesis* best = best_scored(grasps1);
    if (best == nullptr) {
      results[t].success = false;
      trace["failure"] = "no grasp detected from view 1";
      results[t].trace = trace.dump();
      return;
    }
    GraspHypothesis target = *best;

    if (use_smart) {
      StrategySpec smart_spec;
      smart_spec.kind = StrategyKind::Smart;
      smart_spec.map = &map;
      const ViewpointSpec v2 = select_viewpoint(smart_spec, target, pool);
      record_view("smart", v2);
      const PointCloud cloud2 = render_cloud(scene, config.camera,
                                             viewpoint_to_pose(v2),
                                             derive_seed(base, 6));
      auto grasps2 = generate_candidates_near(
          cloud2, config.hand, config.candidate_params, derive_seed(base, 7),
          target.pose.translation, kRefineRadius);
      label_and_score(grasps2, mesh, cloud2, config, derive_seed(base, 8));
      if (const GraspHypothesis* b2 = best_scored(grasps2)) target = *b2;
    }

    if (use_alignment) {
      const ViewpointSpec v3 =
          headon_close_view(target, config.camera.min_depth + 0.02);
      record_view("alignment", v3);
      try {
        const PointCloud cloud3 = render_cloud(scene, config.camera,
                                               viewpoint_to_pose(v3),
                                               derive_seed(base, 9));
        target = alignment_refine(cloud3, target, config.hand,
                                  config.candidate_params, kRefineRadius,
                                  derive_seed(base, 10),
                                  config.neighborhood.identify_finger_swap);
      } catch (const Error&) {
        // keep the current target when the close view yields nothing
      }
    }

    results[t].success = evaluate_force_closure(mesh, Pose::identity(), target,
                                                config.hand, config.friction_mu);
    trace["final_grasp"] = nlohmann::json::parse(grasp_to_json(target));
    trace["success"] = results[t].success;
    results[t].trace = trace.dump();
  });

  SequenceResult out;
  out.order = order;
  out.attempts = trials;
  for (const auto& r : results) {
    if (!r.success) ++out.failures;
    out.traces.push_back(r.trace);
  }
  out.success_rate = 1.0 - static_cast<double>(out.failures) / out.attempts;
  return out;
}

void emit_report(const OfflineEvalResult& result, const ViewMapGrid* map,
                 const ExperimentConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "results.csv");
    if (!out) throw IoError("cannot write results.csv in " + out_dir);
    out << "strategy,shape_class,positives,true_positives,accuracy\n";
    for (const auto& r : result.table.rows) {
      out << r.strategy << "," << r.shape_class << "," << r.positives << ","
          << r.true_positives << "," << r.accuracy << "\n";
    }
    out << "# skipped_trials=" << result.table.skipped_trials << "\n";
    write_footer(out, config);
  }
  {
    std::ofstream out(fs::path(out_dir) / "topn_curves.csv");
    if (!out) throw IoError("cannot write topn_curves.csv in " + out_dir);
    out << "strategy,shape_class,n,accuracy\n";
    for (const auto& r : result.table.rows) {
      for (const auto& p : r.curve) {
        out << r.strategy << "," << r.shape_class << "," << p.n << "," << p.accuracy
            << "\n";
      }
    }
    write_footer(out, config);
  }
  {
    std::ofstream out(fs::path(out_dir) / "score_hist.csv");
    if (!out) throw IoError("cannot write score_hist.csv in " + out_dir);
    out << "strategy,bin_lo,bin_hi,count\n";
    for (const auto& [name, h] : result.histograms) {
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out << name << "," << h.edges[i] << "," << h.edges[i + 1] << ","
            << h.counts[i] << "\n";
      }
    }
    write_footer(out, config);
  }
  {
    std::ofstream out(fs::path(out_dir) / "trials.jsonl");
    if (!out) throw IoError("cannot write trials.jsonl in " + out_dir);
    for (const auto& line : result.trial_traces) out << line << "\n";
  }
  if (map != nullptr) {
    const std::string path = (fs::path(out_dir) / "map_export.csv").string();
    export_map_csv(*map, path);
    std::ofstream out(path, std::ios::app);
    write_footer(out, config);
  }
}

void emit_sequence_report(const std::vector<SequenceResult>& results,
                          const ExperimentConfig& config,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "sequence_results.csv");
    if (!out) throw IoError("cannot write sequence_results.csv in " + out_dir);
    out << "order,attempts,failures,success_rate\n";
    for (const auto& r : results) {
      out << to_string(r.order) << "," << r.attempts << "," << r.failures << ","
          << r.success_rate << "\n";
    }
    write_footer(out, config);
  }
  {
    std::ofstream out(fs::path(out_dir) / "sequence_trials.jsonl");
    if (!out) throw IoError("cannot write sequence_trials.jsonl in " + out_dir);
    for (const auto& r : results) {
      for (const auto& line : r.traces) out << line << "\n";
    }
  }
}

}  // namespace gv
