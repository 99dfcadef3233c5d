#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/instruction.hpp"
#include "seqnav/mapping.hpp"
#include "seqnav/metrics.hpp"
#include "seqnav/planner.hpp"
#include "seqnav/remote_embedding.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/scene.hpp"
#include "seqnav/similarity.hpp"
#include "seqnav/tours.hpp"

namespace seqnav {

inline constexpr int kDefaultStepCap = 200;
inline constexpr int kDefaultRepeats = 3;
inline constexpr const char* kPathsFileFormat = "seqnav-paths/1";
inline constexpr const char* kEpisodeTraceFormat = "seqnav-episode/1";

// ---------------------------------------------------------------------------
// Run configuration: one JSON document that fully determines a run.
// ---------------------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 0;

  // World generation.
  SceneSpec scene_spec;  // 48x48, 4 rooms, 8 landmarks
  int tours = 1;
  int episodes_per_tour = 3;
  int subtasks_per_episode = 2;
  SensorConfig sensor;  // 90 deg fov, 2 deg rays, 5 m range

  // Instruction handling.
  SegmentationStyle segmentation = SegmentationStyle::TypeIV_Periods;
  double phi_lambda = 0.65;
  double logit_scale = 100.0;

  // Verification wrapper.
  bool order_term = true;
  bool similarity_term = true;
  bool adaptive_threshold = true;
  double fixed_threshold = 0.30;

  // Similarity provider.
  std::string provider_kind = "oracle";  // oracle | remote
  double oracle_match_scale = 0.9;
  double oracle_base_score = 0.05;
  double oracle_noise_sigma = 0.02;
  std::string embed_endpoint;  // set from the environment, never from the file

  // Low-level policy.
  std::string policy_kind = "scripted";  // scripted | neural
  double error_rate = 0.0;
  std::string policy_weights = "seeded";  // zeros | seeded | <manifest path>

  // Map encoder feeding the neural policy.
  std::string map_encoder = "auto";  // auto | off | zeros | seeded

  // Metric parameters.
  double success_radius = kDefaultSuccessRadiusM;
  double d_th = kDefaultDtwThresholdM;
  bool literal_spl = false;
  bool geodesic_ne = false;

  int step_cap = kDefaultStepCap;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.seed == b.seed && a.scene_spec.width == b.scene_spec.width &&
           a.scene_spec.height == b.scene_spec.height &&
           a.scene_spec.rooms == b.scene_spec.rooms &&
           a.scene_spec.landmarks == b.scene_spec.landmarks && a.tours == b.tours &&
           a.episodes_per_tour == b.episodes_per_tour &&
           a.subtasks_per_episode == b.subtasks_per_episode &&
           a.sensor.fov_deg == b.sensor.fov_deg &&
           a.sensor.ray_step_deg == b.sensor.ray_step_deg &&
           a.sensor.max_range == b.sensor.max_range &&
           a.segmentation == b.segmentation && a.phi_lambda == b.phi_lambda &&
           a.logit_scale == b.logit_scale && a.order_term == b.order_term &&
           a.similarity_term == b.similarity_term &&
           a.adaptive_threshold == b.adaptive_threshold &&
           a.fixed_threshold == b.fixed_threshold &&
           a.provider_kind == b.provider_kind &&
           a.oracle_match_scale == b.oracle_match_scale &&
           a.oracle_base_score == b.oracle_base_score &&
           a.oracle_noise_sigma == b.oracle_noise_sigma &&
           a.embed_endpoint == b.embed_endpoint && a.policy_kind == b.policy_kind &&
           a.error_rate == b.error_rate && a.policy_weights == b.policy_weights &&
           a.map_encoder == b.map_encoder && a.success_radius == b.success_radius &&
           a.d_th == b.d_th && a.literal_spl == b.literal_spl &&
           a.geodesic_ne == b.geodesic_ne && a.step_cap == b.step_cap;
  }
  friend bool operator!=(const RunConfig& a, const RunConfig& b) { return !(a == b); }
};

// "auto" resolves against the policy: a neural policy needs an embedding, a
// scripted one ignores it (and skips the encoder forward pass entirely).
inline std::string resolved_map_encoder(const RunConfig& cfg) {
  if (cfg.map_encoder != "auto") return cfg.map_encoder;
  return cfg.policy_kind == "neural" ? "seeded" : "off";
}

inline void validate_run_config(const RunConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (cfg.scene_spec.width < 12) fail("scene.width", "must be at least 12");
  if (cfg.scene_spec.height < 12) fail("scene.height", "must be at least 12");
  if (cfg.scene_spec.rooms < 1) fail("scene.rooms", "must be at least 1");
  if (cfg.scene_spec.landmarks < 0) fail("scene.landmarks", "must be non-negative");
  if (cfg.scene_spec.landmarks > static_cast<int>(landmark_vocabulary().size()))
    fail("scene.landmarks", "exceeds the landmark vocabulary");
  if (cfg.tours < 1) fail("tour.count", "must be at least 1");
  if (cfg.episodes_per_tour < 1) fail("tour.episodes", "must be at least 1");
  if (cfg.subtasks_per_episode < 1) fail("tour.subtasks", "must be at least 1");
  int needed = cfg.subtasks_per_episode + (cfg.episodes_per_tour > 1 ? 1 : 0);
  if (cfg.scene_spec.landmarks < needed)
    fail("scene.landmarks", "episode chaining needs at least " + std::to_string(needed) +
                                " landmarks for " + std::to_string(cfg.subtasks_per_episode) +
                                " sub-tasks per episode");
  if (!(cfg.sensor.fov_deg > 0.0 && cfg.sensor.fov_deg <= 360.0))
    fail("sensor.fov_deg", "must lie in (0, 360]");
  if (!(cfg.sensor.ray_step_deg > 0.0)) fail("sensor.ray_step_deg", "must be positive");
  if (!(cfg.sensor.max_range > 0.0)) fail("sensor.max_range", "must be positive");
  if (!(cfg.phi_lambda > 0.0 && cfg.phi_lambda < 1.0))
    fail("gate.phi_lambda", "must lie strictly between 0 and 1");
  if (!(cfg.logit_scale > 0.0)) fail("gate.logit_scale", "must be positive");
  if (!(cfg.fixed_threshold >= 0.05 && cfg.fixed_threshold <= 1.0))
    fail("verification.fixed_threshold", "must lie in [0.05, 1.0]");
  if (cfg.provider_kind != "oracle" && cfg.provider_kind != "remote")
    fail("provider.kind", "must be \"oracle\" or \"remote\"");
  if (cfg.oracle_noise_sigma < 0.0) fail("provider.noise_sigma", "must be non-negative");
  if (cfg.policy_kind != "scripted" && cfg.policy_kind != "neural")
    fail("policy.kind", "must be \"scripted\" or \"neural\"");
  if (!(cfg.error_rate >= 0.0 && cfg.error_rate <= 1.0))
    fail("policy.error_rate", "must lie in [0, 1]");
  if (cfg.policy_weights.empty()) fail("policy.weights", "must be non-empty");
  std::string enc = resolved_map_encoder(cfg);
  if (enc != "off" && enc != "zeros" && enc != "seeded")
    fail("map_encoder", "must be \"auto\", \"off\", \"zeros\", or \"seeded\"");
  if (cfg.policy_kind == "neural" && enc == "off")
    fail("map_encoder", "a neural policy needs a map embedding (zeros or seeded)");
  if (!(cfg.success_radius > 0.0)) fail("metrics.success_radius", "must be positive");
  if (!(cfg.d_th > 0.0)) fail("metrics.dtw_threshold", "must be positive");
  if (cfg.step_cap < 0) fail("step_cap", "must be non-negative");
}

namespace detail {

// Strict JSON section reader: typed getters with defaults, every access
// recorded, unknown keys rejected with their full field path.
class ConfigCursor {
 public:
  ConfigCursor(const nlohmann::json* j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object())
      throw ConfigError(path_.empty() ? std::string("config root: expected an object")
                                      : path_ + ": expected an object");
  }

  double number(const char* name, double fallback) {
    const nlohmann::json* f = field(name);
    if (!f) return fallback;
    if (!f->is_number()) throw ConfigError(key_path(name) + ": expected a number");
    return f->get<double>();
  }

  int integer(const char* name, int fallback) {
    const nlohmann::json* f = field(name);
    if (!f) return fallback;
    if (!f->is_number_integer())
      throw ConfigError(key_path(name) + ": expected an integer");
    return f->get<int>();
  }

  std::uint64_t uinteger(const char* name, std::uint64_t fallback) {
    const nlohmann::json* f = field(name);
    if (!f) return fallback;
    if (!f->is_number_integer() || (f->is_number_integer() && f->get<std::int64_t>() < 0))
      throw ConfigError(key_path(name) + ": expected a non-negative integer");
    return f->get<std::uint64_t>();
  }

  bool boolean(const char* name, bool fallback) {
    const nlohmann::json* f = field(name);
    if (!f) return fallback;
    if (!f->is_boolean()) throw ConfigError(key_path(name) + ": expected a boolean");
    return f->get<bool>();
  }

  std::string text(const char* name, const std::string& fallback) {
    const nlohmann::json* f = field(name);
    if (!f) return fallback;
    if (!f->is_string()) throw ConfigError(key_path(name) + ": expected a string");
    return f->get<std::string>();
  }

  ConfigCursor section(const char* name) {
    const nlohmann::json* f = field(name);
    return ConfigCursor(f, key_path(name));
  }

  // Any key never touched by a getter is a schema violation.
  void done() const {
    if (!j_) return;
    for (const auto& [key, value] : j_->items()) {
      (void)value;
      if (!seen_.count(key)) throw ConfigError(key_path(key.c_str()) + ": unknown field");
    }
  }

 private:
  std::string key_path(const char* name) const {
    return path_.empty() ? std::string(name) : path_ + "." + name;
  }
  const nlohmann::json* field(const char* name) {
    if (!j_) return nullptr;
    seen_.insert(name);
    auto it = j_->find(name);
    return it == j_->end() ? nullptr : &*it;
  }

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json run_config_to_json_obj(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["scene"] = {{"width", cfg.scene_spec.width},
                {"height", cfg.scene_spec.height},
                {"rooms", cfg.scene_spec.rooms},
                {"landmarks", cfg.scene_spec.landmarks}};
  j["tour"] = {{"count", cfg.tours},
               {"episodes", cfg.episodes_per_tour},
               {"subtasks", cfg.subtasks_per_episode}};
  j["sensor"] = {{"fov_deg", cfg.sensor.fov_deg},
                 {"ray_step_deg", cfg.sensor.ray_step_deg},
                 {"max_range", cfg.sensor.max_range}};
  j["segmentation"] = to_string(cfg.segmentation);
  j["gate"] = {{"phi_lambda", cfg.phi_lambda}, {"logit_scale", cfg.logit_scale}};
  j["verification"] = {{"order_term", cfg.order_term},
                       {"similarity_term", cfg.similarity_term},
                       {"threshold", cfg.adaptive_threshold ? "adaptive" : "fixed"},
                       {"fixed_threshold", cfg.fixed_threshold}};
  j["provider"] = {{"kind", cfg.provider_kind},
                   {"match_scale", cfg.oracle_match_scale},
                   {"base_score", cfg.oracle_base_score},
                   {"noise_sigma", cfg.oracle_noise_sigma}};
  j["policy"] = {{"kind", cfg.policy_kind},
                 {"error_rate", cfg.error_rate},
                 {"weights", cfg.policy_weights}};
  j["map_encoder"] = resolved_map_encoder(cfg);
  j["metrics"] = {{"success_radius", cfg.success_radius},
                  {"dtw_threshold", cfg.d_th},
                  {"literal_spl", cfg.literal_spl},
                  {"geodesic_ne", cfg.geodesic_ne}};
  j["step_cap"] = cfg.step_cap;
  return j;
}

inline std::string run_config_to_json(const RunConfig& cfg) {
  return run_config_to_json_obj(cfg).dump(2) + "\n";
}

// Sorted-key serialization makes this a stable fingerprint of everything that
// determines a run (the remote endpoint is deliberately excluded).
inline std::string run_config_digest(const RunConfig& cfg) {
  return detail::hex16(fnv1a64(run_config_to_json_obj(cfg).dump()));
}

inline RunConfig run_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("run config: invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  detail::ConfigCursor root(&j, "");
  cfg.seed = root.uinteger("seed", cfg.seed);

  detail::ConfigCursor scene = root.section("scene");
  cfg.scene_spec.width = scene.integer("width", cfg.scene_spec.width);
  cfg.scene_spec.height = scene.integer("height", cfg.scene_spec.height);
  cfg.scene_spec.rooms = scene.integer("rooms", cfg.scene_spec.rooms);
  cfg.scene_spec.landmarks = scene.integer("landmarks", cfg.scene_spec.landmarks);
  scene.done();

  detail::ConfigCursor tour = root.section("tour");
  cfg.tours = tour.integer("count", cfg.tours);
  cfg.episodes_per_tour = tour.integer("episodes", cfg.episodes_per_tour);
  cfg.subtasks_per_episode = tour.integer("subtasks", cfg.subtasks_per_episode);
  tour.done();

  detail::ConfigCursor sensor = root.section("sensor");
  cfg.sensor.fov_deg = sensor.number("fov_deg", cfg.sensor.fov_deg);
  cfg.sensor.ray_step_deg = sensor.number("ray_step_deg", cfg.sensor.ray_step_deg);
  cfg.sensor.max_range = sensor.number("max_range", cfg.sensor.max_range);
  sensor.done();

  std::string seg = root.text("segmentation", to_string(cfg.segmentation));
  try {
    cfg.segmentation = segmentation_style_from_string(seg);
  } catch (const ConfigError&) {
    throw ConfigError("segmentation: unknown style \"" + seg + "\"");
  }

  detail::ConfigCursor gate = root.section("gate");
  cfg.phi_lambda = gate.number("phi_lambda", cfg.phi_lambda);
  cfg.logit_scale = gate.number("logit_scale", cfg.logit_scale);
  gate.done();

  detail::ConfigCursor ver = root.section("verification");
  cfg.order_term = ver.boolean("order_term", cfg.order_term);
  cfg.similarity_term = ver.boolean("similarity_term", cfg.similarity_term);
  std::string mode = ver.text("threshold", cfg.adaptive_threshold ? "adaptive" : "fixed");
  if (mode != "adaptive" && mode != "fixed")
    throw ConfigError("verification.threshold: must be \"adaptive\" or \"fixed\"");
  cfg.adaptive_threshold = mode == "adaptive";
  cfg.fixed_threshold = ver.number("fixed_threshold", cfg.fixed_threshold);
  ver.done();

  detail::ConfigCursor provider = root.section("provider");
  cfg.provider_kind = provider.text("kind", cfg.provider_kind);
  cfg.oracle_match_scale = provider.number("match_scale", cfg.oracle_match_scale);
  cfg.oracle_base_score = provider.number("base_score", cfg.oracle_base_score);
  cfg.oracle_noise_sigma = provider.number("noise_sigma", cfg.oracle_noise_sigma);
  provider.done();

  detail::ConfigCursor policy = root.section("policy");
  cfg.policy_kind = policy.text("kind", cfg.policy_kind);
  cfg.error_rate = policy.number("error_rate", cfg.error_rate);
  cfg.policy_weights = policy.text("weights", cfg.policy_weights);
  policy.done();

  cfg.map_encoder = root.text("map_encoder", cfg.map_encoder);

  detail::ConfigCursor metrics = root.section("metrics");
  cfg.success_radius = metrics.number("success_radius", cfg.success_radius);
  cfg.d_th = metrics.number("dtw_threshold", cfg.d_th);
  cfg.literal_spl = metrics.boolean("literal_spl", cfg.literal_spl);
  cfg.geodesic_ne = metrics.boolean("geodesic_ne", cfg.geodesic_ne);
  metrics.done();

  cfg.step_cap = root.integer("step_cap", cfg.step_cap);
  root.done();

  validate_run_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Tour generation: one scene, several reference episodes chained end-to-start.
// ---------------------------------------------------------------------------

struct GeneratedTour {
  Scene scene;
  std::vector<ReferenceEpisode> episodes;
};

inline GeneratedTour generate_tour(const RunConfig& cfg, std::uint64_t scene_seed,
                                   std::uint64_t tour_seed) {
  GeneratedTour tour;
  tour.scene = generate_scene(scene_seed, cfg.scene_spec);

  Rng rng(tour_seed);
  int prev_last_goal = -1;
  Vec2 prev_end{};
  for (int e = 0; e < cfg.episodes_per_tour; ++e) {
    std::vector<int> pool(tour.scene.landmarks.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    for (std::size_t i = pool.size(); i > 1; --i)
      std::swap(pool[i - 1], pool[rng.below(static_cast<int>(i))]);

    // Distinct goals; the first never repeats the landmark the previous
    // episode ended on, so the connecting leg is never empty.
    std::vector<int> goals;
    for (int idx : pool) {
      if (goals.empty() && idx == prev_last_goal) continue;
      goals.push_back(idx);
      if (static_cast<int>(goals.size()) == cfg.subtasks_per_episode) break;
    }
    if (static_cast<int>(goals.size()) < cfg.subtasks_per_episode)
      throw GenerationError("not enough landmarks to chain another episode");

    EpisodeOptions opts;
    opts.goal_landmarks = goals;
    if (e > 0) {
      opts.use_start = true;
      opts.start = prev_end;
    }
    ReferenceEpisode ep = generate_reference_episode(tour.scene, rng.next_u64(),
                                                     cfg.subtasks_per_episode, opts);
    prev_last_goal = goals.back();
    prev_end = ep.path.back();
    tour.episodes.push_back(std::move(ep));
  }
  return tour;
}

// ---------------------------------------------------------------------------
// Episode and tour runners.
// ---------------------------------------------------------------------------

struct StepTrace {
  Action action = Action::STOP;
  int alpha = 0;
  int k_star = 0;
  int true_subtask = 0;
  double entropy = 0.0;
  bool in_order = true;
  bool verification_checked = false;
  double delta_t = 0.0;
  double threshold_used = 0.0;
  bool turned_back = false;
  bool forced_second_best = false;
  bool rollback_unavailable = false;
  bool collision = false;
  double delta0_after = 0.0;  // effective verification threshold after the step
  std::int64_t known_cells_after = 0;
};

struct EpisodeTrace {
  EpisodeResult result;
  std::vector<StepTrace> steps;
  int step_count = 0;
  bool stopped = false;  // the policy issued STOP before the cap
};

struct TourTrace {
  Scene scene;
  std::vector<ReferenceEpisode> references;
  TourResult result;
  std::vector<EpisodeTrace> episodes;
  std::vector<std::int64_t> known_at_start;  // map cells known entering each episode
  std::vector<std::int64_t> known_at_end;
  std::vector<TourMap> map_at_end;  // the persistent map after each episode
  std::vector<double> delta0_at_end;
};

namespace detail {

// Seed streams: every stochastic component draws from its own fnv-mixed lane
// so adding one never perturbs another.
enum : std::uint64_t {
  kSeedStreamScene = 1,
  kSeedStreamTour = 2,
  kSeedStreamProvider = 3,
  kSeedStreamPolicy = 4,
  kSeedStreamWeights = 5,
  kSeedStreamRepeat = 6,
};

inline std::uint64_t sub_seed(std::uint64_t base, std::uint64_t stream,
                              std::uint64_t index) {
  return fnv1a64_u64(index, fnv1a64_u64(stream, fnv1a64_u64(base)));
}

inline std::unique_ptr<SimilarityProvider> make_provider(const RunConfig& cfg,
                                                         std::uint64_t run_seed) {
  if (cfg.provider_kind == "remote") {
    if (cfg.embed_endpoint.empty())
      throw ConfigError(
          "provider.kind: \"remote\" needs an embedding endpoint "
          "(set SEQNAV_EMBED_ENDPOINT)");
    RemoteEmbeddingConfig rc;
    rc.endpoint = cfg.embed_endpoint;
    return std::make_unique<RemoteEmbeddingClient>(std::move(rc));
  }
  OracleConfig oc;
  oc.match_scale = cfg.oracle_match_scale;
  oc.base_score = cfg.oracle_base_score;
  oc.noise_sigma = cfg.oracle_noise_sigma;
  oc.seed = sub_seed(run_seed, kSeedStreamProvider, 0);
  return std::make_unique<SyntheticOracleProvider>(std::move(oc));
}

inline std::optional<MapEncoderWeights> make_map_encoder(const RunConfig& cfg) {
  std::string kind = resolved_map_encoder(cfg);
  if (kind == "off") return std::nullopt;
  if (kind == "zeros") return MapEncoderWeights::zeros();
  return MapEncoderWeights::seeded(sub_seed(cfg.seed, kSeedStreamWeights, 0));
}

inline AOHWeights make_policy_weights(const RunConfig& cfg) {
  if (cfg.policy_weights == "zeros") return AOHWeights::zeros();
  if (cfg.policy_weights == "seeded")
    return AOHWeights::seeded(sub_seed(cfg.seed, kSeedStreamWeights, 1));
  std::ifstream in(cfg.policy_weights, std::ios::binary);
  if (!in)
    throw ConfigError("policy.weights: cannot open manifest \"" + cfg.policy_weights +
                      "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return aoh_weights_from_json(buf.str());
}

// One wrapped planning step at a time until STOP or the cap, against shared
// per-tour map and verification state. Per-episode pieces (recurrent state,
// previous action, gated phrase, mode) reset here; the threshold and its decay
// counter deliberately survive, as does the map.
inline EpisodeTrace run_episode_scoped(const RunConfig& cfg, const Scene& sc,
                                       const ReferenceEpisode& ref,
                                       const SimilarityProvider& provider,
                                       const ActionPolicy& policy,
                                       const MapEncoderWeights* encoder, TourMap& map,
                                       EaVState& eav) {
  eav.mode = EaVMode::Exploration;
  eav.k_star_last = -1;
  eav.hidden.clear();
  eav.a_prev = Action::STOP;
  EaVConfig eav_cfg = configure_eav(
      cfg.order_term, cfg.similarity_term,
      cfg.adaptive_threshold ? std::nullopt : std::optional<double>(cfg.fixed_threshold));

  Instruction instr = segment(ref.instruction, cfg.segmentation);
  HashedBagEncoder zs_encoder(128);

  EpisodeTrace tr;
  tr.result.reference_path = ref.path;
  for (int b : ref.boundaries)
    tr.result.subtask_boundaries.push_back(static_cast<std::size_t>(b));
  tr.result.success_radius = cfg.success_radius;
  tr.result.d_th = cfg.d_th;

  AgentState agent;
  agent.pose = {ref.path.front().x, ref.path.front().y, ref.start_heading};
  tr.result.agent_path.push_back({agent.pose.x, agent.pose.y});

  Observation obs = observe(sc, agent.pose, cfg.sensor);
  for (int i = 0; i < cfg.step_cap; ++i) {
    PhraseSelection sel =
        select_phrase(instr, obs, provider, cfg.phi_lambda, cfg.logit_scale);
    std::vector<double> zs = encode_instruction(sel, instr, zs_encoder);
    map = integrate_observation(std::move(map), obs);

    Tensor zm;
    const Tensor* zm_ptr = nullptr;
    if (encoder) {
      EgoCrop crop = crop_ego(map, agent.pose);
      zm = encode_map(crop, *encoder).zm;
      zm_ptr = &zm;
    }

    int true_sub = subtask_index_for_pose(tr.result, {agent.pose.x, agent.pose.y});
    bool rollback_ok = !agent.pose_stack.empty();
    EaVDecision d = eav_step(obs, instr, sel, policy, zm_ptr, zs, provider, eav_cfg,
                             eav, rollback_ok);

    obs = step(sc, agent, d.action, cfg.sensor);
    tr.result.agent_path.push_back({agent.pose.x, agent.pose.y});
    tr.result.selection_log.push_back({sel.alpha, sel.k_star, true_sub});

    StepTrace st;
    st.action = d.action;
    st.alpha = sel.alpha;
    st.k_star = sel.k_star;
    st.true_subtask = true_sub;
    st.entropy = sel.entropy;
    st.in_order = d.in_order;
    st.verification_checked = d.verification_checked;
    st.delta_t = d.delta_t;
    st.threshold_used = d.threshold_used;
    st.turned_back = d.turned_back;
    st.forced_second_best = d.forced_second_best;
    st.rollback_unavailable = d.rollback_unavailable;
    st.collision = agent.collision_flag;
    st.delta0_after = effective_threshold(eav_cfg, eav);
    st.known_cells_after = map.known_cell_count();
    tr.steps.push_back(st);
    ++tr.step_count;

    if (d.action == Action::STOP) {
      tr.stopped = true;
      break;
    }
  }
  return tr;
}

inline std::unique_ptr<ActionPolicy> make_episode_policy(
    const RunConfig& cfg, const ReferenceEpisode& ref, const AOHWeights* neural,
    std::uint64_t run_seed, std::uint64_t episode_index) {
  if (cfg.policy_kind == "neural") return std::make_unique<NeuralAOH>(*neural);
  return std::make_unique<ScriptedOraclePolicy>(
      ref.path, cfg.error_rate, sub_seed(run_seed, kSeedStreamPolicy, episode_index));
}

}  // namespace detail

// Runs one episode with fresh map and verification state.
inline EpisodeTrace run_episode(const RunConfig& cfg, const Scene& sc,
                                const ReferenceEpisode& ref, std::uint64_t run_seed) {
  validate_run_config(cfg);
  std::unique_ptr<SimilarityProvider> provider = detail::make_provider(cfg, run_seed);
  std::optional<MapEncoderWeights> encoder = detail::make_map_encoder(cfg);
  std::optional<AOHWeights> neural;
  if (cfg.policy_kind == "neural") neural = detail::make_policy_weights(cfg);
  std::unique_ptr<ActionPolicy> policy = detail::make_episode_policy(
      cfg, ref, neural ? &*neural : nullptr, run_seed, 0);
  TourMap map(sc.resolution);
  EaVState eav;
  return detail::run_episode_scoped(cfg, sc, ref, *provider, *policy,
                                    encoder ? &*encoder : nullptr, map, eav);
}

// Runs a whole tour: the map and the adaptive threshold persist across the
// tour's episodes; the policy's recurrent state resets at each boundary.
inline TourTrace run_tour(const RunConfig& cfg, const GeneratedTour& tour,
                          std::uint64_t run_seed) {
  validate_run_config(cfg);
  detail::require(!tour.episodes.empty(), "run_tour: tour has no episodes");
  std::unique_ptr<SimilarityProvider> provider = detail::make_provider(cfg, run_seed);
  std::optional<MapEncoderWeights> encoder = detail::make_map_encoder(cfg);
  std::optional<AOHWeights> neural;
  if (cfg.policy_kind == "neural") neural = detail::make_policy_weights(cfg);

  TourTrace out;
  out.scene = tour.scene;
  out.references = tour.episodes;
  TourMap map(tour.scene.resolution);
  EaVState eav;
  for (std::size_t e = 0; e < tour.episodes.size(); ++e) {
    const ReferenceEpisode& ref = tour.episodes[e];
    out.known_at_start.push_back(map.known_cell_count());
    std::unique_ptr<ActionPolicy> policy = detail::make_episode_policy(
        cfg, ref, neural ? &*neural : nullptr, run_seed, e);
    EpisodeTrace tr = detail::run_episode_scoped(cfg, tour.scene, ref, *provider,
                                                 *policy, encoder ? &*encoder : nullptr,
                                                 map, eav);
    out.known_at_end.push_back(map.known_cell_count());
    out.map_at_end.push_back(map);
    out.delta0_at_end.push_back(eav.delta0());
    out.result.episodes.push_back(tr.result);
    out.episodes.push_back(std::move(tr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whole runs and reports.
// ---------------------------------------------------------------------------

struct RunOutput {
  RunConfig cfg;
  std::string config_digest;
  std::vector<TourTrace> tours;
  std::vector<double> tour_tndtw;
  MetricsReport report;  // every episode pooled; tndtw is the mean over tours
};

// Pools episode metrics across tours; the tour-level score is the
// permutation-invariant mean of the per-tour values.
inline MetricsReport pooled_report(const std::vector<TourResult>& tours,
                                   const MetricOptions& opt, const Scene* scene = nullptr) {
  detail::require(!tours.empty(), "pooled report: no tours");
  MetricsReport report;
  report.options = opt;
  report.success_radius = tours.front().episodes.front().success_radius;
  report.d_th = tours.front().episodes.front().d_th;
  std::vector<double> tndtws;
  for (const TourResult& tour : tours) {
    MetricsReport one = compute_report(tour, opt, scene);
    for (const EpisodeMetrics& m : one.per_episode) report.per_episode.push_back(m);
    tndtws.push_back(one.tndtw);
  }
  report.mean = mean_metrics(report.per_episode);
  report.tndtw = detail::invariant_mean(std::move(tndtws));
  return report;
}

inline RunOutput run_from_config(const RunConfig& cfg) {
  validate_run_config(cfg);
  RunOutput out;
  out.cfg = cfg;
  out.cfg.map_encoder = resolved_map_encoder(cfg);
  out.config_digest = run_config_digest(cfg);

  MetricOptions opt{cfg.literal_spl, cfg.geodesic_ne};
  std::vector<double> tndtws;
  for (int t = 0; t < cfg.tours; ++t) {
    GeneratedTour tour = generate_tour(
        cfg, detail::sub_seed(cfg.seed, detail::kSeedStreamScene, t),
        detail::sub_seed(cfg.seed, detail::kSeedStreamTour, t));
    std::uint64_t run_seed = detail::sub_seed(cfg.seed, detail::kSeedStreamPolicy, t);
    TourTrace trace = run_tour(cfg, tour, run_seed);

    MetricsReport one = compute_report(trace.result, opt, &trace.scene);
    for (const EpisodeMetrics& m : one.per_episode) out.report.per_episode.push_back(m);
    tndtws.push_back(one.tndtw);
    out.tour_tndtw.push_back(one.tndtw);
    out.tours.push_back(std::move(trace));
  }
  out.report.options = opt;
  out.report.success_radius = cfg.success_radius;
  out.report.d_th = cfg.d_th;
  out.report.mean = mean_metrics(out.report.per_episode);
  out.report.tndtw = detail::invariant_mean(std::move(tndtws));
  return out;
}

// ---------------------------------------------------------------------------
// Ablation sweeps.
// ---------------------------------------------------------------------------

struct SweepCell {
  std::string label;
  RunConfig cfg;
};

struct RunReport {
  std::string label;
  RunConfig cfg;
  std::string config_digest;
  int repeats = 0;
  std::vector<MetricsReport> per_repeat;
  EpisodeMetrics mean;    // across the repeats' per-run means
  EpisodeMetrics stddev;  // population spread across repeats (zeros for one repeat)
  double tndtw_mean = 0.0;
  double tndtw_stddev = 0.0;
};

inline std::vector<SweepCell> sweep_segmentation(const RunConfig& base) {
  std::vector<SweepCell> cells;
  for (SegmentationStyle s :
       {SegmentationStyle::TypeI_None, SegmentationStyle::TypeII_Commas,
        SegmentationStyle::TypeIII_Conjunctions, SegmentationStyle::TypeIV_Periods}) {
    SweepCell c;
    c.cfg = base;
    c.cfg.segmentation = s;
    c.label = std::string("seg=") + to_string(s);
    cells.push_back(std::move(c));
  }
  return cells;
}

inline std::vector<SweepCell> sweep_gate(const RunConfig& base) {
  std::vector<SweepCell> cells;
  for (double phi : {0.85, 0.75, 0.65, 0.55, 0.45}) {
    SweepCell c;
    c.cfg = base;
    c.cfg.phi_lambda = phi;
    char label[32];
    std::snprintf(label, sizeof label, "phi=%.2f", phi);
    c.label = label;
    cells.push_back(std::move(c));
  }
  return cells;
}

inline std::vector<SweepCell> sweep_verification(const RunConfig& base) {
  const std::array<std::pair<const char*, std::pair<bool, bool>>, 4> rows = {{
      {"ver=off", {false, false}},
      {"ver=order", {true, false}},
      {"ver=similarity", {false, true}},
      {"ver=both", {true, true}},
  }};
  std::vector<SweepCell> cells;
  for (const auto& [label, terms] : rows) {
    SweepCell c;
    c.cfg = base;
    c.cfg.order_term = terms.first;
    c.cfg.similarity_term = terms.second;
    c.label = label;
    cells.push_back(std::move(c));
  }
  return cells;
}

inline std::vector<SweepCell> ablation_preset(const std::string& name,
                                              const RunConfig& base) {
  if (name == "segmentation") return sweep_segmentation(base);
  if (name == "gate") return sweep_gate(base);
  if (name == "verification") return sweep_verification(base);
  throw ConfigError("preset: unknown sweep \"" + name +
                    "\" (expected segmentation, gate, or verification)");
}

namespace detail {

inline void aggregate_repeats(RunReport& rep) {
  auto stats = [&](auto pick) -> std::pair<double, double> {
    std::vector<double> v;
    for (const MetricsReport& r : rep.per_repeat) v.push_back(pick(r));
    double mu = invariant_mean(v);
    std::vector<double> sq;
    for (double x : v) sq.push_back((x - mu) * (x - mu));
    return {mu, std::sqrt(invariant_mean(std::move(sq)))};
  };
  auto field = [&](double EpisodeMetrics::*f, double EpisodeMetrics::*out_mean,
                   double EpisodeMetrics::*out_sd) {
    auto [mu, sd] = stats([&](const MetricsReport& r) { return r.mean.*f; });
    rep.mean.*out_mean = mu;
    rep.stddev.*out_sd = sd;
  };
  field(&EpisodeMetrics::tl, &EpisodeMetrics::tl, &EpisodeMetrics::tl);
  field(&EpisodeMetrics::ne, &EpisodeMetrics::ne, &EpisodeMetrics::ne);
  field(&EpisodeMetrics::sr, &EpisodeMetrics::sr, &EpisodeMetrics::sr);
  field(&EpisodeMetrics::os, &EpisodeMetrics::os, &EpisodeMetrics::os);
  field(&EpisodeMetrics::spl, &EpisodeMetrics::spl, &EpisodeMetrics::spl);
  field(&EpisodeMetrics::ndtw, &EpisodeMetrics::ndtw, &EpisodeMetrics::ndtw);
  field(&EpisodeMetrics::cpsubt, &EpisodeMetrics::cpsubt, &EpisodeMetrics::cpsubt);
  field(&EpisodeMetrics::cpsubi, &EpisodeMetrics::cpsubi, &EpisodeMetrics::cpsubi);
  auto [tm, ts] = stats([](const MetricsReport& r) { return r.tndtw; });
  rep.tndtw_mean = tm;
  rep.tndtw_stddev = ts;
}

}  // namespace detail

// Runs one sweep cell `repeats` times on derived seeds and reports the mean
// and population spread of the per-run means.
inline RunReport run_repeats(const std::string& label, const RunConfig& cfg,
                             int repeats = kDefaultRepeats) {
  detail::require(repeats >= 1, "run_repeats: at least one repeat");
  RunReport rep;
  rep.label = label;
  rep.cfg = cfg;
  rep.cfg.map_encoder = resolved_map_encoder(cfg);
  rep.config_digest = run_config_digest(cfg);
  rep.repeats = repeats;
  for (int r = 0; r < repeats; ++r) {
    RunConfig c = cfg;
    c.seed = detail::sub_seed(cfg.seed, detail::kSeedStreamRepeat, r);
    rep.per_repeat.push_back(run_from_config(c).report);
  }
  detail::aggregate_repeats(rep);
  return rep;
}

// Cells run on a small worker pool; the merge is slot-indexed, so the report
// order is the cell order no matter how workers interleave.
inline std::vector<RunReport> run_ablation(const std::vector<SweepCell>& cells,
                                           int repeats = kDefaultRepeats) {
  std::vector<RunReport> out(cells.size());
  unsigned workers = std::max(1u, std::min<unsigned>(
                                      std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(cells.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1))
          out[i] = run_repeats(cells[i].label, cells[i].cfg, repeats);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return std::string(buf);
}

}  // namespace detail

inline std::string metrics_report_to_markdown(const MetricsReport& report,
                                              std::uint64_t seed = 0) {
  std::ostringstream os;
  os << "| episode | TL | NE | SR | OS | SPL | nDTW | CPsubT | CPsubI |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  auto row = [&](const std::string& name, const EpisodeMetrics& m) {
    os << "| " << name << " | " << detail::fixed3(m.tl) << " | " << detail::fixed3(m.ne)
       << " | " << detail::fixed3(m.sr) << " | " << detail::fixed3(m.os) << " | "
       << detail::fixed3(m.spl) << " | " << detail::fixed3(m.ndtw) << " | "
       << detail::fixed3(m.cpsubt) << " | " << detail::fixed3(m.cpsubi) << " |\n";
  };
  for (std::size_t i = 0; i < report.per_episode.size(); ++i)
    row(std::to_string(i), report.per_episode[i]);
  row("mean", report.mean);
  os << "\n";
  os << "t-nDTW: " << detail::fixed3(report.tndtw) << "\n";
  os << "config: " << metrics_config_digest(report) << " seed: " << seed << "\n";
  return os.str();
}

inline nlohmann::json run_report_to_json_obj(const RunReport& rep) {
  nlohmann::json j;
  j["label"] = rep.label;
  j["config_digest"] = rep.config_digest;
  j["repeats"] = rep.repeats;
  j["seed"] = rep.cfg.seed;
  j["mean"] = detail::metrics_to_json_obj(rep.mean);
  j["stddev"] = detail::metrics_to_json_obj(rep.stddev);
  j["tndtw"] = {{"mean", rep.tndtw_mean}, {"stddev", rep.tndtw_stddev}};
  nlohmann::json runs = nlohmann::json::array();
  for (const MetricsReport& r : rep.per_repeat) {
    runs.push_back({{"mean", detail::metrics_to_json_obj(r.mean)}, {"tndtw", r.tndtw}});
  }
  j["per_repeat"] = runs;
  return j;
}

inline std::string ablation_to_json(const std::vector<RunReport>& rows) {
  nlohmann::json j;
  j["format"] = "seqnav-ablation/1";
  nlohmann::json arr = nlohmann::json::array();
  for (const RunReport& r : rows) arr.push_back(run_report_to_json_obj(r));
  j["rows"] = arr;
  return j.dump(2) + "\n";
}

inline std::string ablation_to_csv(const std::vector<RunReport>& rows) {
  std::ostringstream os;
  os << "config,metric,mean,stddev,config_digest\n";
  os.precision(17);
  for (const RunReport& r : rows) {
    auto line = [&](const char* name, double mu, double sd) {
      os << r.label << ',' << name << ',' << mu << ',' << sd << ',' << r.config_digest
         << '\n';
    };
    line("tl", r.mean.tl, r.stddev.tl);
    line("ne", r.mean.ne, r.stddev.ne);
    line("sr", r.mean.sr, r.stddev.sr);
    line("os", r.mean.os, r.stddev.os);
    line("spl", r.mean.spl, r.stddev.spl);
    line("ndtw", r.mean.ndtw, r.stddev.ndtw);
    line("cpsubt", r.mean.cpsubt, r.stddev.cpsubt);
    line("cpsubi", r.mean.cpsubi, r.stddev.cpsubi);
    line("tndtw", r.tndtw_mean, r.tndtw_stddev);
  }
  return os.str();
}

inline std::string ablation_to_markdown(const std::vector<RunReport>& rows) {
  std::ostringstream os;
  os << "| config | TL | NE | OS | nDTW | SR | SPL | t-nDTW |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  auto cell = [](double mu, double sd) {
    return detail::fixed3(mu) + " ± " + detail::fixed3(sd);
  };
  for (const RunReport& r : rows) {
    os << "| " << r.label << " | " << cell(r.mean.tl, r.stddev.tl) << " | "
       << cell(r.mean.ne, r.stddev.ne) << " | " << cell(r.mean.os, r.stddev.os) << " | "
       << cell(r.mean.ndtw, r.stddev.ndtw) << " | " << cell(r.mean.sr, r.stddev.sr)
       << " | " << cell(r.mean.spl, r.stddev.spl) << " | "
       << cell(r.tndtw_mean, r.tndtw_stddev) << " |\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Stored paths: episode results on disk, the `metrics` subcommand's input.
// ---------------------------------------------------------------------------

inline nlohmann::json episode_result_to_json_obj(const EpisodeResult& ep) {
  auto path_to_json = [](const Path& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vec2& v : p) arr.push_back({v.x, v.y});
    return arr;
  };
  nlohmann::json j;
  j["agent_path"] = path_to_json(ep.agent_path);
  j["reference_path"] = path_to_json(ep.reference_path);
  j["subtask_boundaries"] = ep.subtask_boundaries;
  nlohmann::json log = nlohmann::json::array();
  for (const SelectionRecord& r : ep.selection_log)
    log.push_back({r.alpha, r.k_star, r.true_subtask});
  j["selection_log"] = log;
  j["success_radius"] = ep.success_radius;
  j["d_th"] = ep.d_th;
  return j;
}

inline EpisodeResult episode_result_from_json_obj(const nlohmann::json& j,
                                                  const std::string& where) {
  auto bail = [&](const std::string& why) { throw ParseError(where + ": " + why); };
  if (!j.is_object()) bail("expected an object");
  auto path_from = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_array()) bail(std::string(name) + " missing");
    Path p;
    for (const nlohmann::json& v : j[name]) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        bail(std::string(name) + " must hold [x, y] pairs");
      p.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return p;
  };
  EpisodeResult ep;
  ep.agent_path = path_from("agent_path");
  ep.reference_path = path_from("reference_path");
  if (!j.contains("subtask_boundaries") || !j["subtask_boundaries"].is_array())
    bail("subtask_boundaries missing");
  for (const nlohmann::json& b : j["subtask_boundaries"]) {
    if (!b.is_number_integer() || b.get<std::int64_t>() < 0)
      bail("subtask_boundaries must hold non-negative indices");
    ep.subtask_boundaries.push_back(b.get<std::size_t>());
  }
  if (j.contains("selection_log")) {
    if (!j["selection_log"].is_array()) bail("selection_log must be an array");
    for (const nlohmann::json& r : j["selection_log"]) {
      if (!r.is_array() || r.size() != 3) bail("selection_log entries are triples");
      ep.selection_log.push_back(
          {r[0].get<int>(), r[1].get<int>(), r[2].get<int>()});
    }
  }
  if (j.contains("success_radius")) ep.success_radius = j["success_radius"].get<double>();
  if (j.contains("d_th")) ep.d_th = j["d_th"].get<double>();
  return ep;
}

inline std::string paths_to_json(const std::vector<TourResult>& tours) {
  nlohmann::json j;
  j["format"] = kPathsFileFormat;
  nlohmann::json arr = nlohmann::json::array();
  for (const TourResult& tour : tours) {
    nlohmann::json eps = nlohmann::json::array();
    for (const EpisodeResult& ep : tour.episodes)
      eps.push_back(episode_result_to_json_obj(ep));
    arr.push_back({{"episodes", eps}});
  }
  j["tours"] = arr;
  return j.dump(2) + "\n";
}

inline std::vector<TourResult> paths_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("paths file: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
    throw ParseError("paths file: missing format");
  if (j["format"].get<std::string>() != kPathsFileFormat)
    throw ParseError("paths file: unsupported format \"" +
                     j["format"].get<std::string>() + "\"");
  if (!j.contains("tours") || !j["tours"].is_array())
    throw ParseError("paths file: missing tours");
  std::vector<TourResult> tours;
  for (std::size_t t = 0; t < j["tours"].size(); ++t) {
    const nlohmann::json& jt = j["tours"][t];
    if (!jt.is_object() || !jt.contains("episodes") || !jt["episodes"].is_array())
      throw ParseError("paths file: tour " + std::to_string(t) + ": missing episodes");
    TourResult tour;
    for (std::size_t e = 0; e < jt["episodes"].size(); ++e)
      tour.episodes.push_back(episode_result_from_json_obj(
          jt["episodes"][e], "paths file: tour " + std::to_string(t) + " episode " +
                                 std::to_string(e)));
    tours.push_back(std::move(tour));
  }
  if (tours.empty()) throw ParseError("paths file: no tours");
  return tours;
}

// ---------------------------------------------------------------------------
// Trace serialization: one JSON line per episode.
// ---------------------------------------------------------------------------

inline nlohmann::json episode_trace_to_json_obj(const EpisodeTrace& tr, int tour_index,
                                                int episode_index) {
  nlohmann::json j;
  j["format"] = kEpisodeTraceFormat;
  j["tour"] = tour_index;
  j["episode"] = episode_index;
  j["stopped"] = tr.stopped;
  j["steps"] = tr.step_count;
  nlohmann::json actions = nlohmann::json::array();
  nlohmann::json selection = nlohmann::json::array();
  nlohmann::json delta0 = nlohmann::json::array();
  nlohmann::json known = nlohmann::json::array();
  int collisions = 0, rollbacks = 0, forced = 0;
  for (const StepTrace& st : tr.steps) {
    actions.push_back(to_string(st.action));
    selection.push_back({st.alpha, st.k_star, st.true_subtask});
    delta0.push_back(st.delta0_after);
    known.push_back(st.known_cells_after);
    collisions += st.collision ? 1 : 0;
    rollbacks += st.turned_back ? 1 : 0;
    forced += st.forced_second_best ? 1 : 0;
  }
  j["actions"] = actions;
  j["selection"] = selection;
  j["delta0"] = delta0;
  j["known_cells"] = known;
  j["collisions"] = collisions;
  j["rollbacks"] = rollbacks;
  j["forced_second_best"] = forced;
  j["episode_result"] = episode_result_to_json_obj(tr.result);
  return j;
}

inline std::string run_traces_to_jsonl(const RunOutput& run) {
  std::string out;
  for (std::size_t t = 0; t < run.tours.size(); ++t)
    for (std::size_t e = 0; e < run.tours[t].episodes.size(); ++e) {
      out += episode_trace_to_json_obj(run.tours[t].episodes[e], static_cast<int>(t),
                                       static_cast<int>(e))
                 .dump();
      out += '\n';
    }
  return out;
}

// The generated references in record form, ready for the stitching pipeline.
inline std::vector<EpisodeRecord> run_to_episode_records(const RunOutput& run) {
  std::vector<EpisodeRecord> records;
  for (std::size_t t = 0; t < run.tours.size(); ++t) {
    const TourTrace& tour = run.tours[t];
    for (std::size_t e = 0; e < tour.references.size(); ++e) {
      const ReferenceEpisode& ref = tour.references[e];
      EpisodeRecord rec;
      rec.id = "t" + std::to_string(t) + "-e" + std::to_string(e);
      rec.scene_id = tour.scene.id;
      rec.reference_path = ref.path;
      rec.instruction = ref.instruction;
      rec.phrases = ref.phrases;
      rec.start = ref.path.front();
      rec.end = ref.path.back();
      records.push_back(std::move(rec));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Small file helpers shared with the command line front end.
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open \"" + path + "\" for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open \"" + path + "\" for writing");
  out << content;
  if (!out) throw ConfigError("failed writing \"" + path + "\"");
}

}  // namespace seqnav
