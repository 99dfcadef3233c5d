// Command-line front end: simulation runs, episode stitching, metric reports,
// configuration sweeps, and small generation / self-check utilities.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqnav/harness.hpp"
#include "seqnav/llm_client.hpp"

namespace {

using namespace seqnav;

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

RunConfig load_config(const std::string& config_path,
                      const std::optional<std::uint64_t>& seed_override) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = run_config_from_json(read_text_file(config_path));
  if (seed_override) cfg.seed = *seed_override;
  cfg.embed_endpoint = env_or_empty("SEQNAV_EMBED_ENDPOINT");
  validate_run_config(cfg);
  return cfg;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_text_file(out_path, content);
}

std::string render_metrics(const MetricsReport& report, const std::string& format,
                           std::uint64_t seed) {
  if (format == "csv") return metrics_report_to_csv(report, seed);
  if (format == "md") return metrics_report_to_markdown(report, seed);
  return metrics_report_to_json(report, seed) + "\n";
}

std::string render_ablation(const std::vector<RunReport>& rows,
                            const std::string& format) {
  if (format == "csv") return ablation_to_csv(rows);
  if (format == "md") return ablation_to_markdown(rows);
  return ablation_to_json(rows);
}

int cmd_simulate(const std::string& config_path,
                 const std::optional<std::uint64_t>& seed, const std::string& out_dir,
                 const std::string& format) {
  RunConfig cfg = load_config(config_path, seed);
  RunOutput run = run_from_config(cfg);

  std::filesystem::create_directories(out_dir);
  auto in_dir = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  nlohmann::json echo;
  echo["config"] = run_config_to_json_obj(run.cfg);
  echo["digest"] = run.config_digest;
  write_text_file(in_dir("config.json"), echo.dump(2) + "\n");
  write_text_file(in_dir("episodes.jsonl"), run_traces_to_jsonl(run));

  std::vector<TourResult> tours;
  for (const TourTrace& t : run.tours) tours.push_back(t.result);
  write_text_file(in_dir("paths.json"), paths_to_json(tours));
  write_episode_records(in_dir("records.jsonl"), run_to_episode_records(run));

  std::string metrics_name = std::string("metrics.") + format;
  write_text_file(in_dir(metrics_name.c_str()),
                  render_metrics(run.report, format, cfg.seed));

  std::printf("wrote %d tour(s), %zu episode(s) to %s\n", cfg.tours,
              run.report.per_episode.size(), out_dir.c_str());
  std::printf("config digest %s  mean SR %.3f  t-nDTW %.3f\n",
              run.config_digest.c_str(), run.report.mean.sr, run.report.tndtw);
  return 0;
}

int cmd_stitch(const std::string& records_path, const std::string& out_path,
               double tol, int max_chain) {
  std::vector<EpisodeRecord> records = read_episode_records(records_path);

  InstructionJoiner joiner;  // empty = offline join
  std::optional<HttpLLMTransport> transport;
  std::optional<RemoteLLMClient> client;
  std::string llm_endpoint = env_or_empty("SEQNAV_LLM_ENDPOINT");
  if (!llm_endpoint.empty()) {
    transport.emplace(llm_endpoint);
    client.emplace(LLMConfig{}, &*transport);
    joiner = [&](const std::string& a, const std::string& b) {
      return llm_concat(*client, a, b).text;
    };
  }

  std::vector<TourRecord> tours = stitch_trajectories(records, tol, max_chain, joiner);
  write_tours(out_path, tours);
  std::printf("stitched %zu record(s) into %zu tour(s) -> %s\n", records.size(),
              tours.size(), out_path.c_str());
  return 0;
}

int cmd_metrics(const std::string& paths_path, const std::string& out_path,
                const std::string& format, std::uint64_t seed, bool literal_spl) {
  std::vector<TourResult> tours = paths_from_json(read_text_file(paths_path));
  MetricOptions opt;
  opt.literal_spl = literal_spl;
  opt.geodesic_ne = false;  // stored paths carry no floor plan
  MetricsReport report = pooled_report(tours, opt);
  emit(out_path, render_metrics(report, format, seed));
  return 0;
}

int cmd_ablate(const std::string& config_path,
               const std::optional<std::uint64_t>& seed, const std::string& preset,
               int repeats, const std::string& out_path, const std::string& format) {
  RunConfig base = load_config(config_path, seed);
  std::vector<SweepCell> cells = ablation_preset(preset, base);
  std::vector<RunReport> rows = run_ablation(cells, repeats);
  emit(out_path, render_ablation(rows, format));
  return 0;
}

int cmd_encode_check(const std::string& weights_kind, std::uint64_t seed) {
  MapEncoderWeights w = weights_kind == "zeros" ? MapEncoderWeights::zeros()
                                                : MapEncoderWeights::seeded(seed);
  TourMap map;
  Pose pose{0.0, 0.0, 0.0};
  Observation obs;
  obs.pose = pose;
  map = integrate_observation(std::move(map), obs);
  EgoCrop crop = crop_ego(map, pose);
  MapEmbedding emb = encode_map(crop, w);

  const std::vector<std::size_t>& s = emb.zm.shape();
  std::string shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    shape += (i ? "x" : "") + std::to_string(s[i]);
  double sum = 0.0, mx = 0.0;
  for (double v : emb.zm.values()) {
    sum += v;
    mx = std::max(mx, std::abs(v));
  }
  std::printf("embedding shape %s\n", shape.c_str());
  std::printf("weights %s  sum %.6f  max|v| %.6f\n", weights_kind.c_str(), sum, mx);
  return 0;
}

int cmd_gen_scene(std::uint64_t seed, int width, int height, int rooms, int landmarks,
                  const std::string& out_path) {
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.rooms = rooms;
  spec.landmarks = landmarks;
  Scene sc = generate_scene(seed, spec);
  write_text_file(out_path, scene_to_json(sc).dump(2) + "\n");
  std::printf("scene %s: %dx%d cells, %zu landmark(s) -> %s\n", sc.id.c_str(),
              spec.width, spec.height, sc.landmarks.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic indoor navigation test bench"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out, sim_format = "json";
  std::optional<std::uint64_t> sim_seed;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Run tours from a config; write traces, paths, and metrics");
  sim->add_option("--config", sim_config, "Run configuration (JSON file)");
  sim->add_option("--seed", sim_seed, "Override the config's seed");
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--format", sim_format, "Metrics format")
      ->check(CLI::IsMember({"json", "csv", "md"}));

  // stitch
  std::string st_records, st_out;
  double st_tol = kStitchTolM;
  int st_max_chain = kMaxChainLen;
  CLI::App* st =
      app.add_subcommand("stitch", "Chain recorded episodes into longer tours");
  st->add_option("--records", st_records, "Episode records (JSON lines)")->required();
  st->add_option("--out", st_out, "Tour file to write")->required();
  st->add_option("--tol", st_tol, "Endpoint alignment tolerance (m)");
  st->add_option("--max-chain", st_max_chain, "Longest allowed chain");

  // metrics
  std::string me_paths, me_out, me_format = "json";
  std::uint64_t me_seed = 0;
  bool me_literal_spl = false;
  CLI::App* me = app.add_subcommand("metrics", "Score stored trajectories");
  me->add_option("--paths", me_paths, "Stored paths (JSON file)")->required();
  me->add_option("--out", me_out, "Report file (default: stdout)");
  me->add_option("--format", me_format, "Report format")
      ->check(CLI::IsMember({"json", "csv", "md"}));
  me->add_option("--seed", me_seed, "Seed stamped into the report");
  me->add_flag("--literal-spl", me_literal_spl,
               "Score path efficiency exactly as printed, without the usual cap");

  // ablate
  std::string ab_config, ab_out, ab_format = "md", ab_preset;
  std::optional<std::uint64_t> ab_seed;
  int ab_repeats = kDefaultRepeats;
  CLI::App* ab =
      app.add_subcommand("ablate", "Sweep one axis of the config and tabulate");
  ab->add_option("--config", ab_config, "Base run configuration (JSON file)");
  ab->add_option("--seed", ab_seed, "Override the config's seed");
  ab->add_option("--preset", ab_preset, "Sweep axis")
      ->required()
      ->check(CLI::IsMember({"segmentation", "gate", "verification"}));
  ab->add_option("--repeats", ab_repeats, "Seeded repeats per cell")
      ->check(CLI::PositiveNumber);
  ab->add_option("--out", ab_out, "Table file (default: stdout)");
  ab->add_option("--format", ab_format, "Table format")
      ->check(CLI::IsMember({"json", "csv", "md"}));

  // encode-check
  std::string ec_weights = "seeded";
  std::uint64_t ec_seed = 0;
  CLI::App* ec = app.add_subcommand("encode-check",
                                    "Forward-pass shape check for the map encoder");
  ec->add_option("--weights", ec_weights, "Weight init")
      ->check(CLI::IsMember({"zeros", "seeded"}));
  ec->add_option("--seed", ec_seed, "Seed for seeded weights");

  // gen-scene
  std::uint64_t gs_seed = 0;
  int gs_width = 48, gs_height = 48, gs_rooms = 4, gs_landmarks = 8;
  std::string gs_out;
  CLI::App* gs = app.add_subcommand("gen-scene", "Generate a synthetic floor plan");
  gs->add_option("--seed", gs_seed, "Generation seed");
  gs->add_option("--width", gs_width, "Grid width (cells)");
  gs->add_option("--height", gs_height, "Grid height (cells)");
  gs->add_option("--rooms", gs_rooms, "Room count");
  gs->add_option("--landmarks", gs_landmarks, "Landmark count");
  gs->add_option("--out", gs_out, "Scene file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_seed, sim_out, sim_format);
    if (st->parsed()) return cmd_stitch(st_records, st_out, st_tol, st_max_chain);
    if (me->parsed())
      return cmd_metrics(me_paths, me_out, me_format, me_seed, me_literal_spl);
    if (ab->parsed())
      return cmd_ablate(ab_config, ab_seed, ab_preset, ab_repeats, ab_out, ab_format);
    if (ec->parsed()) return cmd_encode_check(ec_weights, ec_seed);
    if (gs->parsed())
      return cmd_gen_scene(gs_seed, gs_width, gs_height, gs_rooms, gs_landmarks, gs_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
