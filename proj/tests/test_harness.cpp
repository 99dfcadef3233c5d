#include <catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "seqnav/harness.hpp"

#include "test_util.hpp"

using namespace seqnav;
using Catch::Matchers::ContainsSubstring;

namespace {

// A configuration small enough that a full run costs a few milliseconds.
RunConfig tiny_config() {
  RunConfig cfg;
  cfg.scene_spec = {16, 16, 1, 3};
  cfg.tours = 1;
  cfg.episodes_per_tour = 1;
  cfg.subtasks_per_episode = 2;
  cfg.oracle_noise_sigma = 0.0;
  cfg.error_rate = 0.0;
  cfg.step_cap = 150;
  cfg.seed = 9;
  return cfg;
}

// Straight east corridor: free interior, landmark k at goal_x[k] on `row`.
Scene corridor_scene(int width, int height, const std::vector<int>& goal_x,
                     const std::vector<std::string>& labels, int row) {
  Scene sc;
  sc.id = "corridor";
  sc.width = width;
  sc.height = height;
  sc.occupancy.assign(static_cast<std::size_t>(width) * height, 0);
  sc.semantics.assign(static_cast<std::size_t>(width) * height, kClassStructure);
  for (int y = 1; y + 1 < height; ++y)
    for (int x = 1; x + 1 < width; ++x) {
      sc.occupancy[static_cast<std::size_t>(y) * width + x] = 1;
      sc.semantics[static_cast<std::size_t>(y) * width + x] = 2;
    }
  for (std::size_t k = 0; k < goal_x.size(); ++k)
    sc.landmarks.push_back({labels[k], sc.cell_center(goal_x[k], row)});
  return sc;
}

ReferenceEpisode corridor_episode(const Scene& sc, int start_x,
                                  const std::vector<int>& goal_x,
                                  const std::string& instruction, int row) {
  ReferenceEpisode ep;
  for (int x = start_x; x <= goal_x.back(); ++x)
    ep.path.push_back(sc.cell_center(x, row));
  for (int gx : goal_x) ep.boundaries.push_back(gx - start_x);
  ep.instruction = instruction;
  ep.start_heading = 0.0;
  return ep;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

}  // namespace

TEST_CASE("run config serializes and round-trips") {
  RunConfig cfg;  // defaults
  RunConfig once = run_config_from_json(run_config_to_json(cfg));
  RunConfig twice = run_config_from_json(run_config_to_json(once));
  CHECK(once == twice);
  // The document stores the resolved encoder choice, not the "auto" marker.
  CHECK(once.map_encoder == resolved_map_encoder(cfg));
  CHECK(once.map_encoder == "off");
  CHECK(run_config_digest(once) == run_config_digest(twice));

  RunConfig custom;
  custom.seed = 424242;
  custom.scene_spec = {32, 24, 2, 6};
  custom.tours = 4;
  custom.episodes_per_tour = 2;
  custom.subtasks_per_episode = 3;
  custom.sensor.fov_deg = 150.0;
  custom.sensor.ray_step_deg = 3.0;
  custom.sensor.max_range = 7.5;
  custom.segmentation = SegmentationStyle::TypeII_Commas;
  custom.phi_lambda = 0.5;
  custom.logit_scale = 25.0;
  custom.order_term = false;
  custom.similarity_term = true;
  custom.adaptive_threshold = false;
  custom.fixed_threshold = 0.4;
  custom.oracle_match_scale = 0.8;
  custom.oracle_base_score = 0.1;
  custom.oracle_noise_sigma = 0.005;
  custom.error_rate = 0.3;
  custom.policy_kind = "neural";
  custom.policy_weights = "zeros";
  custom.map_encoder = "seeded";
  custom.success_radius = 1.25;
  custom.d_th = 2.0;
  custom.literal_spl = true;
  custom.geodesic_ne = true;
  custom.step_cap = 77;
  RunConfig back = run_config_from_json(run_config_to_json(custom));
  CHECK(back == custom);
}

TEST_CASE("run config rejects malformed documents") {
  auto parse = [](const nlohmann::json& j) {
    return run_config_from_json(j.dump());
  };

  REQUIRE_THROWS_WITH(parse({{"gatee", nlohmann::json::object()}}),
                      ContainsSubstring("gatee: unknown field"));
  REQUIRE_THROWS_WITH(parse({{"gate", {{"phi", 0.5}}}}),
                      ContainsSubstring("gate.phi: unknown field"));
  REQUIRE_THROWS_WITH(parse({{"seed", "abc"}}), ContainsSubstring("seed"));
  REQUIRE_THROWS_WITH(
      parse({{"verification", {{"threshold", "sometimes"}}}}),
      ContainsSubstring("verification.threshold: must be \"adaptive\" or \"fixed\""));
  REQUIRE_THROWS_WITH(parse({{"gate", {{"phi_lambda", 1.5}}}}),
                      ContainsSubstring("gate.phi_lambda"));
  REQUIRE_THROWS_WITH(parse({{"scene", {{"width", 8}}}}),
                      ContainsSubstring("scene.width"));
  REQUIRE_THROWS_WITH(parse({{"segmentation", "type9"}}),
                      ContainsSubstring("type9"));

  // A neural policy cannot run without a map embedding.
  RunConfig cfg;
  cfg.policy_kind = "neural";
  cfg.map_encoder = "off";
  REQUIRE_THROWS_WITH(validate_run_config(cfg), ContainsSubstring("map_encoder"));

  // Whereas "auto" resolves to a usable embedding for a neural policy.
  cfg.map_encoder = "auto";
  CHECK(resolved_map_encoder(cfg) == "seeded");
  REQUIRE_NOTHROW(validate_run_config(cfg));
}

TEST_CASE("generated tours chain episodes end to start") {
  RunConfig cfg;
  cfg.scene_spec = {24, 24, 1, 5};
  cfg.episodes_per_tour = 3;
  cfg.subtasks_per_episode = 2;
  GeneratedTour tour = generate_tour(cfg, 111, 222);
  REQUIRE(tour.episodes.size() == 3);
  for (const ReferenceEpisode& ep : tour.episodes) {
    REQUIRE(ep.boundaries.size() == 2);
    REQUIRE(!ep.path.empty());
    for (std::size_t i = 1; i < ep.boundaries.size(); ++i)
      CHECK(ep.boundaries[i - 1] < ep.boundaries[i]);
    CHECK(ep.boundaries.back() == static_cast<int>(ep.path.size()) - 1);
  }
  for (std::size_t e = 1; e < tour.episodes.size(); ++e)
    CHECK(tour.episodes[e].path.front() == tour.episodes[e - 1].path.back());
}

TEST_CASE("noise-free runs complete and repeat bit-identically") {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.tours = 2;
  cfg.oracle_noise_sigma = 0.0;
  cfg.error_rate = 0.0;

  RunOutput a = run_from_config(cfg);
  RunOutput b = run_from_config(cfg);

  CHECK(a.report.mean.sr == 1.0);
  for (const TourTrace& tt : a.tours)
    for (const EpisodeTrace& et : tt.episodes) CHECK(et.stopped);

  CHECK(a.config_digest == b.config_digest);
  CHECK(metrics_report_to_json(a.report, cfg.seed) ==
        metrics_report_to_json(b.report, cfg.seed));
  CHECK(run_traces_to_jsonl(a) == run_traces_to_jsonl(b));
  std::vector<TourResult> ra, rb;
  for (const TourTrace& tt : a.tours) ra.push_back(tt.result);
  for (const TourTrace& tt : b.tours) rb.push_back(tt.result);
  CHECK(paths_to_json(ra) == paths_to_json(rb));
  REQUIRE(a.tours.size() == b.tours.size());
  for (std::size_t t = 0; t < a.tours.size(); ++t) {
    CHECK(a.tours[t].scene == b.tours[t].scene);
    CHECK(a.tours[t].map_at_end == b.tours[t].map_at_end);
    CHECK(a.tours[t].delta0_at_end == b.tours[t].delta0_at_end);
  }
}

TEST_CASE("tour state persists within a tour and resets between tours") {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.tours = 2;
  cfg.oracle_noise_sigma = 0.0;
  cfg.error_rate = 0.0;
  RunOutput run = run_from_config(cfg);
  REQUIRE(run.tours.size() == 2);

  for (const TourTrace& tt : run.tours) {
    REQUIRE(tt.known_at_start.size() == tt.episodes.size());
    // The map starts empty, grows monotonically, and hands off exactly.
    CHECK(tt.known_at_start.front() == 0);
    for (std::size_t e = 0; e < tt.episodes.size(); ++e) {
      CHECK(tt.known_at_start[e] <= tt.known_at_end[e]);
      std::int64_t prev = tt.known_at_start[e];
      for (const StepTrace& st : tt.episodes[e].steps) {
        CHECK(st.known_cells_after >= prev);
        prev = st.known_cells_after;
      }
      if (e + 1 < tt.episodes.size())
        CHECK(tt.known_at_end[e] == tt.known_at_start[e + 1]);
    }

    // With no verification checks the threshold only decays: one centi-unit
    // per ten actions, floored, carried across the tour's episodes.
    long long cum = 0;
    for (std::size_t e = 0; e < tt.episodes.size(); ++e) {
      cum += static_cast<long long>(tt.episodes[e].steps.size());
      long long centi = std::max<long long>(5, 30 - cum / 10);
      CHECK(tt.delta0_at_end[e] == Catch::Approx(centi / 100.0).margin(1e-12));
    }
  }

  // The second tour's decay restarts from the initial threshold.
  const TourTrace& t1 = run.tours[1];
  long long first = static_cast<long long>(t1.episodes[0].steps.size());
  long long centi = std::max<long long>(5, 30 - first / 10);
  CHECK(t1.delta0_at_end[0] == Catch::Approx(centi / 100.0).margin(1e-12));
}

TEST_CASE("verification wrapper is inert when disabled") {
  RunConfig on = tiny_config();
  on.scene_spec = {24, 24, 2, 5};
  on.tours = 2;
  on.episodes_per_tour = 2;
  RunConfig off = on;
  off.order_term = off.similarity_term = false;

  RunOutput ra = run_from_config(on);
  RunOutput rb = run_from_config(off);

  // Noise-free, error-free homing never trips verification, so the executed
  // trajectories agree byte for byte even though the configs differ.
  std::vector<TourResult> pa, pb;
  for (const TourTrace& tt : ra.tours) pa.push_back(tt.result);
  for (const TourTrace& tt : rb.tours) pb.push_back(tt.result);
  CHECK(paths_to_json(pa) == paths_to_json(pb));

  for (const TourTrace& tt : rb.tours)
    for (const EpisodeTrace& et : tt.episodes)
      for (const StepTrace& st : et.steps) {
        CHECK(!st.turned_back);
        CHECK(!st.forced_second_best);
        CHECK(!st.verification_checked);
      }
}

TEST_CASE("verification wrapper engages under noisy misexecution") {
  RunConfig cfg;
  cfg.scene_spec = {20, 20, 1, 8};
  cfg.tours = 10;
  cfg.episodes_per_tour = 3;
  cfg.subtasks_per_episode = 5;
  cfg.sensor.fov_deg = 24.0;
  cfg.oracle_noise_sigma = 0.010;
  cfg.error_rate = 0.2;
  cfg.success_radius = 0.70;
  cfg.step_cap = 300;
  cfg.seed = 31;

  RunOutput run = run_from_config(cfg);
  long long turned_back = 0, forced = 0, checked = 0;
  for (const TourTrace& tt : run.tours)
    for (const EpisodeTrace& et : tt.episodes)
      for (const StepTrace& st : et.steps) {
        turned_back += st.turned_back;
        forced += st.forced_second_best;
        checked += st.verification_checked;
      }
  CHECK(checked > 0);
  CHECK(turned_back > 0);
  CHECK(forced > 0);
  // Every forced action is armed by a rollback; a rollback on an episode's
  // last step leaves its forced follow-up unexecuted, so at most one pending
  // verification is lost per episode.
  long long episodes = static_cast<long long>(cfg.tours) * cfg.episodes_per_tour;
  CHECK(forced <= turned_back);
  CHECK(turned_back - forced <= episodes);
}

TEST_CASE("a zero step cap produces an unstarted episode record") {
  RunConfig cfg = tiny_config();
  cfg.step_cap = 0;
  RunOutput run = run_from_config(cfg);
  const EpisodeTrace& et = run.tours[0].episodes[0];
  CHECK(et.steps.empty());
  CHECK(!et.stopped);
  CHECK(et.result.agent_path.size() == 1);
  CHECK(et.result.selection_log.empty());
  // Metrics still evaluate: the unstarted episode scores a zero-length walk.
  CHECK(run.report.mean.tl == 0.0);
  CHECK(run.report.mean.cpsubi == 0.0);
}

TEST_CASE("repeat aggregation averages means and zeroes single-repeat spread") {
  RunConfig cfg = tiny_config();

  RunReport one = run_repeats("solo", cfg, 1);
  CHECK(one.repeats == 1);
  CHECK(one.stddev.tl == 0.0);
  CHECK(one.stddev.sr == 0.0);
  CHECK(one.stddev.ndtw == 0.0);
  CHECK(one.tndtw_stddev == 0.0);
  CHECK(one.mean.sr == one.per_repeat[0].mean.sr);
  CHECK(one.mean.tl == one.per_repeat[0].mean.tl);

  RunReport three = run_repeats("trio", cfg, 3);
  REQUIRE(three.per_repeat.size() == 3);
  double mu = 0.0;
  for (const MetricsReport& r : three.per_repeat) mu += r.mean.tl;
  mu /= 3.0;
  CHECK(three.mean.tl == Catch::Approx(mu).margin(1e-12));
  double var = 0.0;
  for (const MetricsReport& r : three.per_repeat)
    var += (r.mean.tl - mu) * (r.mean.tl - mu);
  CHECK(three.tndtw_stddev >= 0.0);
  CHECK(three.stddev.tl == Catch::Approx(std::sqrt(var / 3.0)).margin(1e-12));

  RunReport again = run_repeats("trio", cfg, 3);
  CHECK(three.mean.sr == again.mean.sr);
  CHECK(three.stddev.sr == again.stddev.sr);
  CHECK(three.config_digest == again.config_digest);
}

TEST_CASE("ablation presets enumerate the advertised axes") {
  RunConfig base = tiny_config();

  std::vector<SweepCell> seg = ablation_preset("segmentation", base);
  REQUIRE(seg.size() == 4);
  CHECK(seg.front().label == "seg=type1");
  CHECK(seg.back().label == "seg=type4");

  std::vector<SweepCell> gate = ablation_preset("gate", base);
  REQUIRE(gate.size() == 5);
  CHECK(gate.front().label == "phi=0.85");
  CHECK(gate.back().label == "phi=0.45");

  std::vector<SweepCell> ver = ablation_preset("verification", base);
  REQUIRE(ver.size() == 4);
  CHECK(ver[0].label == "ver=off");
  CHECK(ver[3].label == "ver=both");
  CHECK(!ver[0].cfg.order_term);
  CHECK(ver[1].cfg.order_term);
  CHECK(!ver[1].cfg.similarity_term);
  CHECK(ver[3].cfg.order_term);
  CHECK(ver[3].cfg.similarity_term);

  REQUIRE_THROWS_WITH(ablation_preset("tables", base),
                      ContainsSubstring("unknown sweep"));
}

TEST_CASE("ablation runs deterministically with pinned table layouts") {
  RunConfig base = tiny_config();
  std::vector<SweepCell> cells = ablation_preset("verification", base);

  std::vector<RunReport> a = run_ablation(cells, 2);
  std::vector<RunReport> b = run_ablation(cells, 2);
  CHECK(ablation_to_json(a) == ablation_to_json(b));
  CHECK(ablation_to_csv(a) == ablation_to_csv(b));
  CHECK(ablation_to_markdown(a) == ablation_to_markdown(b));

  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].label == cells[i].label);

  std::string md = ablation_to_markdown(a);
  CHECK_THAT(md, ContainsSubstring(
                     "| config | TL | NE | OS | nDTW | SR | SPL | t-nDTW |"));
  CHECK_THAT(md, ContainsSubstring("ver=off"));

  std::string csv = ablation_to_csv(a);
  CHECK_THAT(csv, ContainsSubstring("config,metric,mean,stddev,config_digest"));
  // Nine metric rows per configuration plus the header line.
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 9 * a.size());
}

TEST_CASE("path files round-trip and reject malformed input") {
  RunConfig cfg = tiny_config();
  cfg.tours = 2;
  RunOutput run = run_from_config(cfg);
  std::vector<TourResult> tours;
  for (const TourTrace& tt : run.tours) tours.push_back(tt.result);

  std::string text = paths_to_json(tours);
  std::vector<TourResult> back = paths_from_json(text);
  CHECK(paths_to_json(back) == text);
  REQUIRE(back.size() == tours.size());
  CHECK(back[0].episodes[0].agent_path == tours[0].episodes[0].agent_path);
  CHECK(back[0].episodes[0].reference_path == tours[0].episodes[0].reference_path);
  CHECK(back[0].episodes[0].subtask_boundaries ==
        tours[0].episodes[0].subtask_boundaries);

  REQUIRE_THROWS_AS(paths_from_json("{ not json"), ParseError);
  REQUIRE_THROWS_WITH(paths_from_json(R"({"format":"other/9","tours":[]})"),
                      ContainsSubstring("format"));
  nlohmann::json doc = nlohmann::json::parse(text);
  doc["tours"] = nlohmann::json::array();
  REQUIRE_THROWS_AS(paths_from_json(doc.dump()), ParseError);
  nlohmann::json broken = nlohmann::json::parse(text);
  broken["tours"][1]["episodes"][0]["agent_path"] = "oops";
  REQUIRE_THROWS_WITH(paths_from_json(broken.dump()),
                      ContainsSubstring("tour 1"));
}

TEST_CASE("episode traces serialize one line per episode") {
  RunConfig cfg = tiny_config();
  cfg.tours = 2;
  cfg.episodes_per_tour = 2;
  cfg.scene_spec.landmarks = 4;
  RunOutput run = run_from_config(cfg);

  std::string jsonl = run_traces_to_jsonl(run);
  std::vector<std::string> lines;
  std::istringstream in(jsonl);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == 4);

  for (const std::string& line : lines) {
    nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("format").get<std::string>() == kEpisodeTraceFormat);
    CHECK(j.at("actions").is_array());
    CHECK(j.at("selection").is_array());
    CHECK(j.at("actions").size() == j.at("selection").size());
  }
  nlohmann::json first = nlohmann::json::parse(lines[0]);
  CHECK(first.at("tour").get<int>() == 0);
  CHECK(first.at("episode").get<int>() == 0);
  nlohmann::json last = nlohmann::json::parse(lines[3]);
  CHECK(last.at("tour").get<int>() == 1);
  CHECK(last.at("episode").get<int>() == 1);
}

TEST_CASE("episode records round-trip with line-numbered diagnostics") {
  RunConfig cfg = tiny_config();
  cfg.tours = 2;
  RunOutput run = run_from_config(cfg);
  std::vector<EpisodeRecord> records = run_to_episode_records(run);
  REQUIRE(records.size() == 2);
  CHECK(records[0].id == "t0-e0");
  CHECK(records[1].id == "t1-e0");

  std::string jsonl = episode_records_to_jsonl(records);
  std::vector<EpisodeRecord> back = episode_records_from_jsonl(jsonl);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].id == records[i].id);
    CHECK(back[i].scene_id == records[i].scene_id);
    CHECK(back[i].instruction == records[i].instruction);
    CHECK(back[i].phrases == records[i].phrases);
    CHECK(back[i].reference_path == records[i].reference_path);
    CHECK(back[i].start == records[i].start);
    CHECK(back[i].end == records[i].end);
  }

  std::istringstream in(jsonl);
  std::string line1;
  std::getline(in, line1);
  REQUIRE_THROWS_WITH(episode_records_from_jsonl(line1 + "\n{ bad\n"),
                      ContainsSubstring("records file line 2"));
  nlohmann::json j = nlohmann::json::parse(line1);
  j["reference_path"] = nlohmann::json::array({nlohmann::json::array({1.0})});
  REQUIRE_THROWS_WITH(episode_records_from_jsonl(j.dump() + "\n"),
                      ContainsSubstring("records file line 1"));
  j = nlohmann::json::parse(line1);
  j["id"] = "";
  REQUIRE_THROWS_AS(episode_records_from_jsonl(j.dump() + "\n"), ParseError);
}

TEST_CASE("hand-built corridors pin the gate's selection behavior") {
  RunConfig cfg;
  cfg.sensor.fov_deg = 120.0;
  cfg.sensor.max_range = 7.5;
  cfg.oracle_noise_sigma = 0.0;
  cfg.error_rate = 0.0;
  cfg.order_term = cfg.similarity_term = false;
  cfg.step_cap = 300;

  SECTION("distinct goal phrases select the ground-truth sub-task") {
    std::vector<int> gx = {20, 40, 60, 80, 100};
    Scene sc = corridor_scene(104, 7, gx,
                              {"couch", "chair", "table", "clock", "vase"}, 3);
    ReferenceEpisode ep = corridor_episode(
        sc, 2, gx,
        "go to the couch. go to the chair. go to the table. go to the clock. "
        "go to the vase.",
        3);
    EpisodeTrace tr = run_episode(cfg, sc, ep, 77);
    REQUIRE(tr.stopped);
    REQUIRE(!tr.steps.empty());
    for (const StepTrace& st : tr.steps) {
      CHECK(st.alpha == 1);
      CHECK(st.k_star == st.true_subtask);
    }
    CHECK(episode_metrics(tr.result).cpsubi == 1.0);
  }

  SECTION("near-duplicate goal phrases force the global fallback") {
    std::vector<int> gx = {30, 60};
    Scene sc = corridor_scene(64, 7, gx, {"mirror", "mirror"}, 3);
    ReferenceEpisode ep = corridor_episode(
        sc, 2, gx, "go to the mirror. then go to the mirror.", 3);
    EpisodeTrace tr = run_episode(cfg, sc, ep, 78);
    REQUIRE(tr.stopped);
    REQUIRE(!tr.steps.empty());
    for (const StepTrace& st : tr.steps) CHECK(st.alpha == 0);
  }
}

TEST_CASE("a neural policy with zero weights drives the mapped loop") {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.scene_spec = {24, 24, 1, 4};
  cfg.subtasks_per_episode = 2;
  cfg.episodes_per_tour = 1;
  cfg.policy_kind = "neural";
  cfg.policy_weights = "zeros";
  cfg.map_encoder = "zeros";
  cfg.oracle_noise_sigma = 0.0;
  cfg.step_cap = 2;
  RunOutput run = run_from_config(cfg);
  const EpisodeTrace& et = run.tours[0].episodes[0];
  REQUIRE(et.steps.size() == 2);
  CHECK(!et.stopped);
  // Zero weights give a uniform action head whose argmax is the first action.
  for (const StepTrace& st : et.steps) CHECK(st.action == Action::FORWARD);
}

#ifdef SEQNAV_CLI_PATH
namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& dir) {
  std::filesystem::path out = dir / "stdout.txt";
  std::filesystem::path err = dir / "stderr.txt";
  std::string cmd = std::string("'") + SEQNAV_CLI_PATH + "' " + args + " > '" +
                    out.string() + "' 2> '" + err.string() + "'";
  int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

}  // namespace

TEST_CASE("command line interface") {
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "seqnav_harness_cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  SECTION("help lists every subcommand") {
    CliResult r = run_cli("--help", dir);
    CHECK(r.exit_code == 0);
    for (const char* name :
         {"simulate", "stitch", "metrics", "ablate", "encode-check", "gen-scene"})
      CHECK_THAT(r.out, ContainsSubstring(name));
  }

  SECTION("gen-scene writes a parseable scene") {
    CliResult r = run_cli("gen-scene --seed 3 --out '" +
                              (dir / "scene.json").string() + "'",
                          dir);
    REQUIRE(r.exit_code == 0);
    nlohmann::json j = nlohmann::json::parse(slurp(dir / "scene.json"));
    CHECK(j.at("format").get<std::string>() == "seqnav-scene/1");
    CHECK(j.at("width").get<int>() == 48);
    CHECK(!j.at("landmarks").empty());
  }

  SECTION("simulate, metrics, and stitch chain through files") {
    nlohmann::json config = {
        {"seed", 7},
        {"scene", {{"width", 16}, {"height", 16}, {"rooms", 1}, {"landmarks", 3}}},
        {"tour", {{"count", 1}, {"episodes", 2}, {"subtasks", 2}}},
        {"provider", {{"noise_sigma", 0.0}}},
        {"policy", {{"error_rate", 0.0}}},
    };
    spit(dir / "config.json", config.dump(2) + "\n");

    std::string base = "simulate --config '" + (dir / "config.json").string() +
                       "' --out '";
    CliResult r1 = run_cli(base + (dir / "out1").string() + "'", dir);
    REQUIRE(r1.exit_code == 0);
    CHECK_THAT(r1.out, ContainsSubstring("wrote 1 tour(s)"));
    for (const char* f :
         {"config.json", "episodes.jsonl", "paths.json", "records.jsonl",
          "metrics.json"})
      CHECK(std::filesystem::exists(dir / "out1" / f));

    CliResult r2 = run_cli(base + (dir / "out2").string() + "'", dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "out1" / "metrics.json") ==
          slurp(dir / "out2" / "metrics.json"));
    CHECK(slurp(dir / "out1" / "paths.json") ==
          slurp(dir / "out2" / "paths.json"));

    CliResult rm = run_cli("metrics --paths '" +
                               (dir / "out1" / "paths.json").string() +
                               "' --format md",
                           dir);
    REQUIRE(rm.exit_code == 0);
    CHECK_THAT(rm.out, ContainsSubstring("| episode |"));
    CHECK_THAT(rm.out, ContainsSubstring("t-nDTW:"));

    CliResult rs = run_cli("stitch --records '" +
                               (dir / "out1" / "records.jsonl").string() +
                               "' --out '" + (dir / "tours.jsonl").string() + "'",
                           dir);
    REQUIRE(rs.exit_code == 0);
    std::string tours = slurp(dir / "tours.jsonl");
    CHECK(std::count(tours.begin(), tours.end(), '\n') >= 1);
  }

  SECTION("invalid configuration fails with a field diagnostic") {
    spit(dir / "bad.json", R"({"gate": {"phi_lambda": 1.5}})");
    CliResult r = run_cli(
        "simulate --config '" + (dir / "bad.json").string() + "' --out '" +
            (dir / "nope").string() + "'",
        dir);
    CHECK(r.exit_code != 0);
    CHECK_THAT(r.err, ContainsSubstring("gate.phi_lambda"));
  }

  SECTION("encode-check reports the embedding shape") {
    CliResult r = run_cli("encode-check --weights seeded --seed 4", dir);
    REQUIRE(r.exit_code == 0);
    CHECK_THAT(r.out, ContainsSubstring("128x4x4"));
  }

  std::filesystem::remove_all(dir);
}
#endif  // SEQNAV_CLI_PATH
