#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "graspview/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  bool verbose = false;
};

gv::ExperimentConfig make_config(const GlobalOpts& opts) {
  gv::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = gv::load_config(opts.config_path);
  if (opts.seed_set) cfg.master_seed = opts.seed;
  cfg.validate();
  return cfg;
}

void log(const GlobalOpts& opts, const std::string& msg) {
  if (opts.verbose) std::cerr << msg << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"viewpoint selection experiments for grasp detection"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "experiment config file");
  app.add_option("--out", opts.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", opts.seed, "override master seed");
  app.add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", opts.verbose, "log progress to stderr");

  auto* corpus_cmd = app.add_subcommand("build-corpus", "write corpus meshes as OBJ");

  std::string map_class = "box";
  auto* map_cmd = app.add_subcommand("build-map", "build a viewpoint quality map");
  map_cmd->add_option("--class", map_class, "box or cylinder");

  std::string eval_map_path, eval_class = "box";
  auto* offline_cmd =
      app.add_subcommand("eval-offline", "strategy comparison on a fixed map");
  offline_cmd->add_option("--map", eval_map_path, "map file")->required();
  offline_cmd->add_option("--class", eval_class, "box or cylinder");

  std::string seq_map_path;
  std::vector<std::string> seq_orders = {"1", "1-2", "1-3", "1-2-3"};
  int seq_trials = 100;
  auto* seq_cmd =
      app.add_subcommand("eval-sequence", "simulated multi-view grasp sequences");
  seq_cmd->add_option("--map", seq_map_path, "map file")->required();
  seq_cmd->add_option("--orders", seq_orders, "view orders (1, 1-2, 1-3, 1-2-3)");
  seq_cmd->add_option("--trials", seq_trials, "trials per order")
      ->check(CLI::PositiveNumber);

  int render_object = 0;
  double render_az = 0.0, render_el = 0.6, render_radius = 0.4;
  auto* render_cmd = app.add_subcommand("render", "render one view to a PLY cloud");
  render_cmd->add_option("--object", render_object, "corpus object index");
  render_cmd->add_option("--azimuth", render_az, "radians");
  render_cmd->add_option("--elevation", render_el, "radians");
  render_cmd->add_option("--radius", render_radius, "meters");

  std::string export_map_path;
  auto* export_cmd = app.add_subcommand("export-map", "map file to CSV");
  export_cmd->add_option("--map", export_map_path, "map file")->required();

  CLI11_PARSE(app, argc, argv);
  opts.seed_set = seed_opt->count() > 0;

  const gv::ExperimentConfig cfg = make_config(opts);
  fs::create_directories(opts.out_dir);

  if (corpus_cmd->parsed()) {
    const auto corpus = gv::build_corpus(cfg.corpus);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "object_%03zu.obj", i);
      gv::save_obj(corpus[i], (fs::path(opts.out_dir) / name).string());
    }
    log(opts, "wrote " + std::to_string(corpus.size()) + " meshes");
    return 0;
  }

  if (map_cmd->parsed()) {
    const auto cls = gv::shape_class_from_string(map_class);
    log(opts, "building " + map_class + " map...");
    const auto map = gv::build_map(cfg, cls, opts.jobs);
    const auto path = fs::path(opts.out_dir) / ("map_" + map_class + ".gvmap");
    gv::save_map(map, path.string());
    log(opts, "wrote " + path.string() + " (" +
                  std::to_string(map.sample_count) + " samples)");
    return 0;
  }

  if (offline_cmd->parsed()) {
    const auto cls = gv::shape_class_from_string(eval_class);
    const auto map = gv::load_map(eval_map_path);
    const std::vector<gv::StrategyKind> strategies = {
        gv::StrategyKind::Smart, gv::StrategyKind::HeadOn, gv::StrategyKind::Random};
    const auto result = gv::run_offline_eval(cfg, map, strategies, cls, opts.jobs);
    gv::emit_report(result, &map, cfg, opts.out_dir);
    for (const auto& r : result.table.rows) {
      std::cout << r.strategy << " " << r.shape_class << ": positives=" << r.positives
                << " true_positives=" << r.true_positives
                << " accuracy=" << r.accuracy << "\n";
    }
    return 0;
  }

  if (seq_cmd->parsed()) {
    const auto map = gv::load_map(seq_map_path);
    std::vector<gv::SequenceResult> results;
    for (const auto& name : seq_orders) {
      gv::ViewOrder order;
      if (name == "1") order = gv::ViewOrder::V1;
      else if (name == "1-2") order = gv::ViewOrder::V1_V2;
      else if (name == "1-3") order = gv::ViewOrder::V1_V3;
      else if (name == "1-2-3") order = gv::ViewOrder::V1_V2_V3;
      else throw gv::ConfigError("unknown view order: " + name);
      log(opts, "running order " + name + "...");
      results.push_back(gv::run_sequence_eval(cfg, map, order, seq_trials, opts.jobs));
      std::cout << name << ": success_rate=" << results.back().success_rate
                << " (" << results.back().failures << "/" << results.back().attempts
                << " failures)\n";
    }
    gv::emit_sequence_report(results, cfg, opts.out_dir);
    return 0;
  }

  if (render_cmd->parsed()) {
    const auto corpus = gv::build_corpus(cfg.corpus);
    if (render_object < 0 || render_object >= static_cast<int>(corpus.size())) {
      throw gv::ConfigError("object index out of range");
    }
    gv::ViewpointSpec view;
    view.azimuth = render_az;
    view.elevation = render_el;
    view.radius = render_radius;
    const std::vector<gv::SceneObject> scene = {{corpus[render_object],
                                                 gv::Pose::identity()}};
    const auto cloud = gv::render_cloud(scene, cfg.camera,
                                        gv::viewpoint_to_pose(view), cfg.master_seed);
    const auto path = fs::path(opts.out_dir) / "cloud.ply";
    gv::save_ply(cloud, path.string());
    log(opts, "wrote " + path.string() + " (" + std::to_string(cloud.size()) +
                  " points)");
    return 0;
  }

  if (export_cmd->parsed()) {
    const auto map = gv::load_map(export_map_path);
    gv::export_map_csv(map, (fs::path(opts.out_dir) / "map_export.csv").string());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
