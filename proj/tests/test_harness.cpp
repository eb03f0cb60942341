#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "graspview/harness.hpp"
#include "test_util.hpp"

using namespace gv;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.corpus.n_box = 2;
  cfg.corpus.n_cylinder = 2;
  cfg.corpus.seed = 5;
  cfg.candidate_params.n_samples = 20;
  cfg.views_per_object = 5;
  cfg.eval_view_pool = 60;
  cfg.eval_trials = 4;
  cfg.n_values = {3, 10};
  cfg.master_seed = 11;
  return cfg;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void check_same_map(const ViewMapGrid& a, const ViewMapGrid& b) {
  REQUIRE(a.n_azimuth == b.n_azimuth);
  REQUIRE(a.n_elevation == b.n_elevation);
  CHECK(a.sample_count == b.sample_count);
  for (int c = 0; c < kNumChannels; ++c) {
    REQUIRE(a.channels[c].size() == b.channels[c].size());
    CHECK(std::memcmp(a.channels[c].data(), b.channels[c].data(),
                      a.channels[c].size() * sizeof(double)) == 0);
  }
}

}  // namespace

TEST_CASE("corpus has the requested composition") {
  CorpusSpec spec;
  const auto corpus = build_corpus(spec);
  REQUIRE(corpus.size() == 39);
  for (int i = 0; i < 25; ++i) CHECK(corpus[i].shape_class == ShapeClass::BoxLike);
  for (int i = 25; i < 39; ++i) {
    CHECK(corpus[i].shape_class == ShapeClass::CylinderLike);
  }
  for (const auto& m : corpus) CHECK(is_watertight(m));
}

TEST_CASE("corpus dimensions respect the intervals") {
  CorpusSpec spec;
  spec.seed = 21;
  const auto corpus = build_corpus(spec);
  for (int i = 0; i < spec.n_box; ++i) {
    Vec3 lo = corpus[i].vertices[0], hi = lo;
    for (const Vec3& v : corpus[i].vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const Vec3 dims = hi - lo;
    CHECK(dims.x() >= spec.box_x.lo);
    CHECK(dims.x() <= spec.box_x.hi);
    CHECK(dims.y() >= spec.box_y.lo);
    CHECK(dims.y() <= spec.box_y.hi);
    CHECK(dims.z() >= spec.box_z.lo);
    CHECK(dims.z() <= spec.box_z.hi);
  }
  for (int i = spec.n_box; i < spec.n_box + spec.n_cylinder; ++i) {
    double max_r = 0, max_z = 0;
    for (const Vec3& v : corpus[i].vertices) {
      max_r = std::max(max_r, std::hypot(v.x(), v.y()));
      max_z = std::max(max_z, std::abs(v.z()));
    }
    CHECK(max_r >= spec.cylinder_radius.lo - 1e-12);
    CHECK(max_r <= spec.cylinder_radius.hi + 1e-12);
    CHECK(2 * max_z >= spec.cylinder_height.lo - 1e-12);
    CHECK(2 * max_z <= spec.cylinder_height.hi + 1e-12);
  }
}

TEST_CASE("corpus is deterministic in its seed") {
  CorpusSpec spec;
  spec.seed = 33;
  const auto a = build_corpus(spec);
  const auto b = build_corpus(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].vertices.size() == b[i].vertices.size());
    for (std::size_t k = 0; k < a[i].vertices.size(); ++k) {
      CHECK(a[i].vertices[k] == b[i].vertices[k]);
    }
  }
  spec.seed = 34;
  const auto c = build_corpus(spec);
  CHECK(a[0].vertices[0] != c[0].vertices[0]);
}

TEST_CASE("degenerate corpus intervals are rejected") {
  CorpusSpec spec;
  spec.box_x = {0.06, 0.02};  // hi < lo
  CHECK_THROWS_AS(build_corpus(spec), ConfigError);
  spec = CorpusSpec{};
  spec.cylinder_radius = {0.0, 0.05};  // nonpositive lo
  CHECK_THROWS_AS(build_corpus(spec), ConfigError);
  spec = CorpusSpec{};
  spec.n_box = -1;
  CHECK_THROWS_AS(build_corpus(spec), ConfigError);
}

TEST_CASE("config text round trip preserves the hash") {
  ExperimentConfig cfg = tiny_config();
  cfg.scorer.kind = ScorerKind::Geometric;
  cfg.candidate_params.variant = CandidateVariant::NormalAxis;
  cfg.n_values = {1, 7, 19};
  const ExperimentConfig back = parse_config_text(cfg.canonical_text());
  CHECK(back.hash() == cfg.hash());
  CHECK(back.canonical_text() == cfg.canonical_text());
  CHECK(back.n_values == cfg.n_values);
  CHECK(back.scorer.kind == ScorerKind::Geometric);
}

TEST_CASE("config parsing details") {
  const ExperimentConfig cfg = parse_config_text(
      "# a comment\n"
      "threshold = 0.6   # trailing comment\n"
      "\n"
      "corpus.n_box=3\n"
      "n_values = 2, 4 , 8\n");
  CHECK(cfg.threshold == 0.6);
  CHECK(cfg.corpus.n_box == 3);
  CHECK(cfg.n_values == std::vector<int>{2, 4, 8});

  CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("threshold 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("threshold = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("scorer.kind = magic\n"), ConfigError);
}

TEST_CASE("config hash is sensitive to every field change") {
  const ExperimentConfig base = tiny_config();
  ExperimentConfig changed = base;
  changed.master_seed += 1;
  CHECK(changed.hash() != base.hash());
  changed = base;
  changed.friction_mu = 0.6;
  CHECK(changed.hash() != base.hash());
  changed = base;
  changed.corpus.box_x.hi += 1e-9;
  CHECK(changed.hash() != base.hash());
  CHECK(base.hash() == tiny_config().hash());
  CHECK(base.hash().size() == 64);
}

TEST_CASE("parallel_for covers the range and propagates errors") {
  std::atomic<long> sum{0};
  parallel_for(1000, 4, [&](int i) { sum += i; });
  CHECK(sum == 999 * 1000 / 2);
  sum = 0;
  parallel_for(3, 16, [&](int i) { sum += i; });  // jobs > n
  CHECK(sum == 3);
  CHECK_THROWS_AS(
      parallel_for(10, 3,
                   [](int i) {
                     if (i == 7) throw ConfigError("boom");
                   }),
      ConfigError);
}

TEST_CASE("build_map is identical across job counts") {
  const ExperimentConfig cfg = tiny_config();
  const ViewMapGrid serial = build_map(cfg, ShapeClass::BoxLike, 1);
  const ViewMapGrid parallel = build_map(cfg, ShapeClass::BoxLike, 2);
  check_same_map(serial, parallel);
  CHECK(serial.sample_count > 0);
  const auto meta = nlohmann::json::parse(serial.meta);
  CHECK(meta["config_hash"] == cfg.hash());
  CHECK(meta["shape_class"] == "box");
}

TEST_CASE("build_map with zero detected candidates is all zero") {
  ExperimentConfig cfg = tiny_config();
  cfg.corpus.n_cylinder = 0;
  // an unsatisfiable closing-region requirement suppresses every candidate
  cfg.candidate_params.min_points_in_closing_region = 1000000;
  const ViewMapGrid m = build_map(cfg, ShapeClass::BoxLike, 1);
  CHECK(m.sample_count == 0);
  for (MapChannel c : {MapChannel::CandidateDensity, MapChannel::TpDensity,
                       MapChannel::FpDensity, MapChannel::TpMinusFp}) {
    for (double v : m.channels[static_cast<int>(c)]) CHECK(v == 0.0);
  }
  for (double v : m.channels[static_cast<int>(MapChannel::Accuracy)]) {
    CHECK(std::isnan(v));
  }
  CHECK_THROWS_AS(build_map(cfg, ShapeClass::CylinderLike, 1), ConfigError);
}

TEST_CASE("offline eval is deterministic and self-consistent") {
  const ExperimentConfig cfg = tiny_config();
  const ViewMapGrid map = build_map(cfg, ShapeClass::BoxLike, 1);
  const std::vector<StrategyKind> strategies = {
      StrategyKind::Smart, StrategyKind::HeadOn, StrategyKind::Random};
  const OfflineEvalResult a =
      run_offline_eval(cfg, map, strategies, ShapeClass::BoxLike, 1);
  const OfflineEvalResult b =
      run_offline_eval(cfg, map, strategies, ShapeClass::BoxLike, 2);
  REQUIRE(a.trial_traces.size() == b.trial_traces.size());
  for (std::size_t i = 0; i < a.trial_traces.size(); ++i) {
    CHECK(a.trial_traces[i] == b.trial_traces[i]);
  }

  REQUIRE(a.table.rows.size() == strategies.size());
  std::map<std::string, long> positives_from_traces, tp_from_traces;
  for (const auto& line : a.trial_traces) {
    const auto trace = nlohmann::json::parse(line);
    if (trace.contains("skipped")) continue;
    for (const auto& srec : trace["strategies"]) {
      const long detected = srec["candidates_detected"];
      const long pruned = srec["candidates_after_pruning"];
      const long pos = srec["positives"];
      const long tp = srec["true_positives"];
      CHECK(pruned <= detected);
      CHECK(pos <= pruned);
      CHECK(tp <= pos);
      positives_from_traces[srec["strategy"]] += pos;
      tp_from_traces[srec["strategy"]] += tp;
    }
  }
  for (const auto& row : a.table.rows) {
    CHECK(row.positives == positives_from_traces[row.strategy]);
    CHECK(row.true_positives == tp_from_traces[row.strategy]);
    if (row.positives > 0) {
      CHECK(row.accuracy ==
            doctest::Approx(static_cast<double>(row.true_positives) /
                            row.positives));
    }
    REQUIRE(row.curve.size() == cfg.n_values.size());
    for (const auto& p : row.curve) {
      if (!std::isnan(p.accuracy)) {
        CHECK(p.accuracy >= 0.0);
        CHECK(p.accuracy <= 1.0);
      }
    }
  }
  CHECK(a.table.skipped_trials <= cfg.eval_trials);
}

TEST_CASE("offline eval rejects a map built with other smoothing params") {
  ExperimentConfig cfg = tiny_config();
  const ViewMapGrid map = build_map(cfg, ShapeClass::BoxLike, 1);
  cfg.smoothing.variance = 0.3;
  CHECK_THROWS_AS(
      run_offline_eval(cfg, map, {StrategyKind::Random}, ShapeClass::BoxLike, 1),
      ConfigError);
}

TEST_CASE("emit_report writes consistent and reproducible files") {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = tiny_config();
  const ViewMapGrid map = build_map(cfg, ShapeClass::BoxLike, 1);
  const OfflineEvalResult result = run_offline_eval(
      cfg, map, {StrategyKind::Smart, StrategyKind::Random}, ShapeClass::BoxLike, 1);

  const fs::path dir_a = "/tmp/gv_report_a", dir_b = "/tmp/gv_report_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  emit_report(result, &map, cfg, dir_a.string());
  emit_report(result, &map, cfg, dir_b.string());
  for (const char* name : {"results.csv", "topn_curves.csv", "score_hist.csv",
                           "trials.jsonl", "map_export.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(dir_a / name));
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
  const std::string results = slurp(dir_a / "results.csv");
  CHECK(results.find("# config_hash=" + cfg.hash()) != std::string::npos);

  // histogram counts conserve the per-strategy positive totals
  std::map<std::string, long> hist_totals;
  std::istringstream hist(slurp(dir_a / "score_hist.csv"));
  std::string line;
  std::getline(hist, line);  // header
  while (std::getline(hist, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto c1 = line.find(',');
    const auto c3 = line.rfind(',');
    hist_totals[line.substr(0, c1)] += std::stol(line.substr(c3 + 1));
  }
  for (const auto& row : result.table.rows) {
    CHECK(hist_totals[row.strategy] == row.positives);
  }
}

TEST_CASE("sequence eval runs all orders deterministically") {
  const ExperimentConfig cfg = tiny_config();
  const ViewMapGrid map = build_map(cfg, ShapeClass::BoxLike, 1);
  CHECK_THROWS_AS(run_sequence_eval(cfg, map, ViewOrder::V1, 0, 1), ConfigError);

  const SequenceResult v1 = run_sequence_eval(cfg, map, ViewOrder::V1, 6, 1);
  CHECK(v1.attempts == 6);
  CHECK(v1.traces.size() == 6);
  CHECK(v1.success_rate ==
        doctest::Approx(1.0 - static_cast<double>(v1.failures) / 6));

  const SequenceResult again = run_sequence_eval(cfg, map, ViewOrder::V1, 6, 2);
  for (int i = 0; i < 6; ++i) CHECK(v1.traces[i] == again.traces[i]);

  const SequenceResult full =
      run_sequence_eval(cfg, map, ViewOrder::V1_V2_V3, 6, 1);
  for (const auto& line : full.traces) {
    const auto trace = nlohmann::json::parse(line);
    if (trace.contains("failure")) continue;  // stopped after view 1
    REQUIRE(trace["views"].size() == 3);
    CHECK(trace["views"][0]["kind"] == "random");
    CHECK(trace["views"][1]["kind"] == "smart");
    CHECK(trace["views"][2]["kind"] == "alignment");
  }

  // paired randomness: the first (random) view matches across orders
  const SequenceResult v13 = run_sequence_eval(cfg, map, ViewOrder::V1_V3, 6, 1);
  for (int i = 0; i < 6; ++i) {
    const auto ta = nlohmann::json::parse(v1.traces[i]);
    const auto tb = nlohmann::json::parse(v13.traces[i]);
    CHECK(ta["views"][0] == tb["views"][0]);
  }
}

TEST_CASE("sequence report files") {
  namespace fs = std::filesystem;
  const ExperimentConfig cfg = tiny_config();
  const ViewMapGrid map = build_map(cfg, ShapeClass::BoxLike, 1);
  const SequenceResult r = run_sequence_eval(cfg, map, ViewOrder::V1_V2, 3, 1);
  const fs::path dir = "/tmp/gv_seq_report";
  fs::remove_all(dir);
  emit_sequence_report({r}, cfg, dir.string());
  REQUIRE(fs::exists(dir / "sequence_results.csv"));
  REQUIRE(fs::exists(dir / "sequence_trials.jsonl"));
  const std::string csv = slurp(dir / "sequence_results.csv");
  CHECK(csv.find("1-2,3,") != std::string::npos);
  CHECK(csv.find("# config_hash=") != std::string::npos);
}
