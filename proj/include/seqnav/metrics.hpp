#pragma once

// Evaluation metrics over recorded navigation episodes and tours: endpoint
// scores (path length, endpoint error, success, oracle success, efficiency-
// weighted success), warped path-distance scores for single episodes and for
// whole tours, and two decision-quality ratios (ordered sub-task completion
// and per-step phrase-selection accuracy). All computations are pure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/scene.hpp"

namespace seqnav {

inline constexpr double kDefaultSuccessRadiusM = 3.0;
inline constexpr double kDefaultDtwThresholdM = 3.0;
// Consecutive episode reference paths in a tour must join within this slack.
inline constexpr double kTourChainTolM = 0.25;

inline constexpr const char* kMetricsReportFormat = "seqnav-metrics/1";

// One planning step's bookkeeping: what the selector chose and which sub-task
// the agent was actually working on (by reference-path projection).
struct SelectionRecord {
  int alpha = 0;         // 1 = a single phrase drove the step, 0 = whole text
  int k_star = 0;        // chosen phrase index (meaningful when alpha == 1)
  int true_subtask = 0;  // ground-truth sub-task index at this step
};

/**
 * A finished episode: the recorded agent trajectory (start position plus one
 * node per executed action — turns repeat their position), the reference
 * trajectory, the reference-node indices ending each sub-task, the per-step
 * selection log, and the thresholds the episode was evaluated under.
 */
struct EpisodeResult {
  Path agent_path;
  Path reference_path;
  std::vector<std::size_t> subtask_boundaries;  // strictly increasing, last = end
  std::vector<SelectionRecord> selection_log;   // one record per executed action
  double success_radius = kDefaultSuccessRadiusM;
  double d_th = kDefaultDtwThresholdM;
};

struct TourResult {
  std::vector<EpisodeResult> episodes;  // ordered, reference paths chained
};

inline void validate_episode_result(const EpisodeResult& ep) {
  using detail::require;
  require(!ep.agent_path.empty(), "episode: agent path must be non-empty");
  require(!ep.reference_path.empty(), "episode: reference path must be non-empty");
  require(ep.success_radius > 0.0, "episode: success radius must be positive");
  require(ep.d_th > 0.0, "episode: distance threshold must be positive");
  require(!ep.subtask_boundaries.empty(), "episode: at least one sub-task boundary");
  for (std::size_t i = 0; i + 1 < ep.subtask_boundaries.size(); ++i)
    require(ep.subtask_boundaries[i] < ep.subtask_boundaries[i + 1],
            "episode: boundaries must be strictly increasing");
  require(ep.subtask_boundaries.back() == ep.reference_path.size() - 1,
          "episode: the last boundary must be the reference end node");
  require(ep.selection_log.empty() ||
              ep.selection_log.size() == ep.agent_path.size() - 1,
          "episode: one selection record per executed action");
}

inline void validate_tour_result(const TourResult& tour,
                                 double chain_tol = kTourChainTolM) {
  detail::require(!tour.episodes.empty(), "tour: must contain at least one episode");
  double d_th = tour.episodes.front().d_th;
  for (const EpisodeResult& ep : tour.episodes) {
    validate_episode_result(ep);
    detail::require(ep.d_th == d_th, "tour: episodes must share one distance threshold");
  }
  for (std::size_t k = 0; k + 1 < tour.episodes.size(); ++k) {
    double gap = euclidean(tour.episodes[k].reference_path.back(),
                           tour.episodes[k + 1].reference_path.front());
    detail::require(gap <= chain_tol,
                    "tour: consecutive reference paths must join end to start");
  }
}

// ---------------------------------------------------------------------------
// Warped path distance.
// ---------------------------------------------------------------------------

/**
 * Minimum cumulative Euclidean node distance over monotone warpings of the
 * two paths, endpoints matched to endpoints. Zero iff a warping exists that
 * pairs only coincident nodes.
 */
inline double dtw(const Path& r, const Path& t) {
  detail::require(!r.empty() && !t.empty(), "dtw: paths must be non-empty");
  const std::size_t n = r.size(), m = t.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m, inf), cur(m, inf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double c = euclidean(r[i], t[j]);
      double best;
      if (i == 0 && j == 0)
        best = 0.0;
      else if (i == 0)
        best = cur[j - 1];
      else if (j == 0)
        best = prev[j];
      else
        best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = c + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

inline double ndtw(const Path& r, const Path& t, double d_th) {
  detail::require(d_th > 0.0, "ndtw: distance threshold must be positive");
  return std::exp(-dtw(r, t) / (static_cast<double>(r.size()) * d_th));
}

/**
 * Tour-level warped score: both trajectories are concatenated episode by
 * episode (plain append, junction nodes kept) and scored as one long pair,
 * normalized by the total reference node count. Long tours cannot inflate the
 * score by doing well only on short episodes.
 */
inline double tndtw(const TourResult& tour) {
  validate_tour_result(tour);
  Path ref, agent;
  for (const EpisodeResult& ep : tour.episodes) {
    ref.insert(ref.end(), ep.reference_path.begin(), ep.reference_path.end());
    agent.insert(agent.end(), ep.agent_path.begin(), ep.agent_path.end());
  }
  return ndtw(ref, agent, tour.episodes.front().d_th);
}

// ---------------------------------------------------------------------------
// Endpoint metrics.
// ---------------------------------------------------------------------------

// Straight-line distance from where the agent ended to the reference goal.
inline double ne(const EpisodeResult& ep) {
  validate_episode_result(ep);
  return euclidean(ep.agent_path.back(), ep.reference_path.back());
}

// Geodesic variant of the endpoint error, measured through free space.
inline double ne_geodesic(const Scene& sc, const EpisodeResult& ep) {
  validate_episode_result(ep);
  return shortest_path_distance(sc, ep.agent_path.back(), ep.reference_path.back());
}

inline double sr(const EpisodeResult& ep) {
  return ne(ep) <= ep.success_radius ? 1.0 : 0.0;
}

// Oracle success: did any visited node pass within the success radius?
inline double os(const EpisodeResult& ep) {
  validate_episode_result(ep);
  const Vec2 goal = ep.reference_path.back();
  for (const Vec2& p : ep.agent_path)
    if (euclidean(p, goal) <= ep.success_radius) return 1.0;
  return 0.0;
}

inline double tl(const EpisodeResult& ep) {
  validate_episode_result(ep);
  return path_length(ep.agent_path);
}

/**
 * Efficiency-weighted success. The default form sr * l / max(l, p) never
 * exceeds sr. The literal variant sr * p / l (selected by flag) can exceed 1
 * and rewards long paths; reports carry which form was used.
 */
inline double spl(const EpisodeResult& ep, bool literal_variant = false) {
  double success = sr(ep);
  if (success == 0.0) return 0.0;
  double l = path_length(ep.reference_path);
  double p = path_length(ep.agent_path);
  if (literal_variant) return l > 0.0 ? success * p / l : success;
  double denom = std::max(l, p);
  return denom > 0.0 ? success * l / denom : success;
}

// ---------------------------------------------------------------------------
// Sub-task metrics.
// ---------------------------------------------------------------------------

// Index of the reference node nearest to p; ties go to the earlier node.
inline std::size_t project_onto_reference(const Path& ref, Vec2 p) {
  detail::require(!ref.empty(), "projection: reference must be non-empty");
  std::size_t best = 0;
  double best_d = euclidean(ref[0], p);
  for (std::size_t i = 1; i < ref.size(); ++i) {
    double d = euclidean(ref[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Sub-task owning a reference node: the first whose end boundary is at or
// past the node.
inline int subtask_index_for_node(const std::vector<std::size_t>& boundaries,
                                  std::size_t node) {
  detail::require(!boundaries.empty(), "sub-task lookup: no boundaries");
  for (std::size_t k = 0; k < boundaries.size(); ++k)
    if (node <= boundaries[k]) return static_cast<int>(k);
  return static_cast<int>(boundaries.size()) - 1;
}

// Ground-truth sub-task for an agent position: project onto the reference,
// then look the node up.
inline int subtask_index_for_pose(const EpisodeResult& ep, Vec2 p) {
  return subtask_index_for_node(ep.subtask_boundaries,
                                project_onto_reference(ep.reference_path, p));
}

/**
 * Ordered sub-task completion ratio. Sub-task k counts as completed only if
 * some agent node at or after the node that completed sub-task k-1 comes
 * within the success radius of sub-task k's boundary point; the result is the
 * completed prefix length over the sub-task count. Reaching a later boundary
 * without the earlier ones counts nothing.
 */
inline double cpsubt(const EpisodeResult& ep) {
  validate_episode_result(ep);
  const double eps = ep.success_radius;
  std::size_t from = 0;
  std::size_t completed = 0;
  for (std::size_t boundary : ep.subtask_boundaries) {
    const Vec2 target = ep.reference_path[boundary];
    bool found = false;
    for (std::size_t i = from; i < ep.agent_path.size(); ++i) {
      if (euclidean(ep.agent_path[i], target) <= eps) {
        from = i;
        found = true;
        break;
      }
    }
    if (!found) break;
    ++completed;
  }
  return static_cast<double>(completed) /
         static_cast<double>(ep.subtask_boundaries.size());
}

/**
 * Phrase-selection accuracy: the fraction of executed steps whose selector
 * chose the phrase matching the ground-truth sub-task. Steps that fell back
 * to the whole instruction count as incorrect.
 */
inline double cpsubi(const EpisodeResult& ep) {
  validate_episode_result(ep);
  detail::require(!ep.selection_log.empty(), "cpsubi: selection log is empty");
  std::size_t correct = 0;
  for (const SelectionRecord& rec : ep.selection_log)
    if (rec.alpha == 1 && rec.k_star == rec.true_subtask) ++correct;
  return static_cast<double>(correct) / static_cast<double>(ep.selection_log.size());
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

struct MetricOptions {
  bool literal_spl = false;  // use the long-path-rewarding efficiency form
  bool geodesic_ne = false;  // endpoint error through free space (needs a scene)
};

struct EpisodeMetrics {
  double tl = 0.0, ne = 0.0, sr = 0.0, os = 0.0, spl = 0.0;
  double ndtw = 0.0, cpsubt = 0.0, cpsubi = 0.0;
};

struct MetricsReport {
  std::vector<EpisodeMetrics> per_episode;
  EpisodeMetrics mean;   // permutation-invariant means over the episodes
  double tndtw = 0.0;    // tour-level, concatenated
  MetricOptions options;
  double success_radius = kDefaultSuccessRadiusM;
  double d_th = kDefaultDtwThresholdM;
};

inline EpisodeMetrics episode_metrics(const EpisodeResult& ep,
                                      const MetricOptions& opt = {},
                                      const Scene* scene = nullptr) {
  validate_episode_result(ep);
  EpisodeMetrics m;
  m.tl = tl(ep);
  if (opt.geodesic_ne) {
    detail::require(scene != nullptr, "metrics: geodesic endpoint error needs a scene");
    m.ne = ne_geodesic(*scene, ep);
  } else {
    m.ne = ne(ep);
  }
  m.sr = m.ne <= ep.success_radius ? 1.0 : 0.0;
  m.os = os(ep);
  double l = path_length(ep.reference_path);
  if (m.sr == 0.0) {
    m.spl = 0.0;
  } else if (opt.literal_spl) {
    m.spl = l > 0.0 ? m.sr * m.tl / l : m.sr;
  } else {
    double denom = std::max(l, m.tl);
    m.spl = denom > 0.0 ? m.sr * l / denom : m.sr;
  }
  m.ndtw = ndtw(ep.reference_path, ep.agent_path, ep.d_th);
  m.cpsubt = cpsubt(ep);
  m.cpsubi = ep.selection_log.empty() ? 0.0 : cpsubi(ep);
  return m;
}

namespace detail {

// Sorted summation: bit-identical under any permutation of the inputs.
inline double invariant_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace detail

inline EpisodeMetrics mean_metrics(const std::vector<EpisodeMetrics>& eps) {
  auto mean_of = [&](double EpisodeMetrics::*field) {
    std::vector<double> v;
    v.reserve(eps.size());
    for (const EpisodeMetrics& m : eps) v.push_back(m.*field);
    return detail::invariant_mean(std::move(v));
  };
  EpisodeMetrics m;
  m.tl = mean_of(&EpisodeMetrics::tl);
  m.ne = mean_of(&EpisodeMetrics::ne);
  m.sr = mean_of(&EpisodeMetrics::sr);
  m.os = mean_of(&EpisodeMetrics::os);
  m.spl = mean_of(&EpisodeMetrics::spl);
  m.ndtw = mean_of(&EpisodeMetrics::ndtw);
  m.cpsubt = mean_of(&EpisodeMetrics::cpsubt);
  m.cpsubi = mean_of(&EpisodeMetrics::cpsubi);
  return m;
}

inline MetricsReport compute_report(const TourResult& tour,
                                    const MetricOptions& opt = {},
                                    const Scene* scene = nullptr) {
  validate_tour_result(tour);
  MetricsReport report;
  report.options = opt;
  report.success_radius = tour.episodes.front().success_radius;
  report.d_th = tour.episodes.front().d_th;
  for (const EpisodeResult& ep : tour.episodes)
    report.per_episode.push_back(episode_metrics(ep, opt, scene));
  report.mean = mean_metrics(report.per_episode);
  report.tndtw = tndtw(tour);
  return report;
}

// Stable fingerprint of the evaluation configuration, for reproducibility.
inline std::string metrics_config_digest(const MetricsReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "spl=" << (report.options.literal_spl ? "literal" : "standard")
     << ";ne=" << (report.options.geodesic_ne ? "geodesic" : "euclidean")
     << ";eps=" << report.success_radius << ";dth=" << report.d_th;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(os.str())));
  return std::string(buf);
}

namespace detail {

inline nlohmann::json metrics_to_json_obj(const EpisodeMetrics& m) {
  return {{"tl", m.tl},         {"ne", m.ne},     {"sr", m.sr},
          {"os", m.os},         {"spl", m.spl},   {"ndtw", m.ndtw},
          {"cpsubt", m.cpsubt}, {"cpsubi", m.cpsubi}};
}

}  // namespace detail

inline std::string metrics_report_to_json(const MetricsReport& report,
                                          std::uint64_t seed = 0) {
  nlohmann::json j;
  j["format"] = kMetricsReportFormat;
  j["seed"] = seed;
  j["config_digest"] = metrics_config_digest(report);
  j["success_radius"] = report.success_radius;
  j["d_th"] = report.d_th;
  j["spl_form"] = report.options.literal_spl ? "literal" : "standard";
  j["ne_form"] = report.options.geodesic_ne ? "geodesic" : "euclidean";
  j["episodes"] = nlohmann::json::array();
  for (const EpisodeMetrics& m : report.per_episode)
    j["episodes"].push_back(detail::metrics_to_json_obj(m));
  j["mean"] = detail::metrics_to_json_obj(report.mean);
  j["tndtw"] = report.tndtw;
  return j.dump(2);
}

// Long-form table: scope, metric, value, config digest, seed.
inline std::string metrics_report_to_csv(const MetricsReport& report,
                                         std::uint64_t seed = 0) {
  const std::string digest = metrics_config_digest(report);
  std::ostringstream os;
  os.precision(17);
  os << "scope,metric,value,config_digest,seed\n";
  auto row = [&](const std::string& scope, const char* name, double value) {
    os << scope << ',' << name << ',' << value << ',' << digest << ',' << seed
       << '\n';
  };
  auto block = [&](const std::string& scope, const EpisodeMetrics& m) {
    row(scope, "tl", m.tl);
    row(scope, "ne", m.ne);
    row(scope, "sr", m.sr);
    row(scope, "os", m.os);
    row(scope, "spl", m.spl);
    row(scope, "ndtw", m.ndtw);
    row(scope, "cpsubt", m.cpsubt);
    row(scope, "cpsubi", m.cpsubi);
  };
  for (std::size_t i = 0; i < report.per_episode.size(); ++i)
    block("episode:" + std::to_string(i), report.per_episode[i]);
  block("mean", report.mean);
  row("tour", "tndtw", report.tndtw);
  return os.str();
}

}  // namespace seqnav
