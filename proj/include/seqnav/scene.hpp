#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/rng.hpp"

namespace seqnav {

inline constexpr int kSemanticClassCount = 13;
inline constexpr int kClassStructure = 0;
inline constexpr int kClassCorridor = 1;
// Classes 2..12 are room categories, assigned cyclically at generation time.

inline constexpr double kDefaultResolution = 0.25;

struct Landmark {
  std::string label;
  Vec2 position;

  friend bool operator==(const Landmark& a, const Landmark& b) {
    return a.label == b.label && a.position == b.position;
  }
};

/**
 * A static world: occupancy plus a semantic class per cell plus point
 * landmarks. Immutable after generation; shared freely across workers.
 */
struct Scene {
  std::string id;
  int width = 0;   // cells
  int height = 0;  // cells
  double resolution = kDefaultResolution;
  std::vector<std::uint8_t> occupancy;  // 1 free, 0 blocked; row-major y*width+x
  std::vector<std::uint8_t> semantics;  // class id in [0, kSemanticClassCount)
  std::vector<Landmark> landmarks;

  bool in_bounds(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < width && cy < height;
  }
  bool free_cell(int cx, int cy) const {
    return in_bounds(cx, cy) && occupancy[static_cast<std::size_t>(cy) * width + cx] != 0;
  }
  int sem_at(int cx, int cy) const {
    return in_bounds(cx, cy) ? semantics[static_cast<std::size_t>(cy) * width + cx]
                             : kClassStructure;
  }
  int cell_of_x(double wx) const { return static_cast<int>(std::floor(wx / resolution)); }
  int cell_of_y(double wy) const { return static_cast<int>(std::floor(wy / resolution)); }
  Vec2 cell_center(int cx, int cy) const {
    return {(cx + 0.5) * resolution, (cy + 0.5) * resolution};
  }
  bool free_at(Vec2 p) const { return free_cell(cell_of_x(p.x), cell_of_y(p.y)); }

  friend bool operator==(const Scene& a, const Scene& b) {
    return a.id == b.id && a.width == b.width && a.height == b.height &&
           a.resolution == b.resolution && a.occupancy == b.occupancy &&
           a.semantics == b.semantics && a.landmarks == b.landmarks;
  }
};

struct SensorConfig {
  double fov_deg = 90.0;
  double ray_step_deg = 2.0;
  double max_range = 5.0;
};

struct VisibleLandmark {
  std::string label;
  double bearing_deg;  // relative to heading, in (-180, 180]
  double range_m;
};

struct DepthRay {
  double bearing_deg;    // relative to heading
  double hit_range_m;    // in [0, max_range]
  int hit_class = -1;    // -1: nothing blocked within range
};

struct Observation {
  Pose pose;
  std::vector<VisibleLandmark> visible_landmarks;
  std::vector<DepthRay> depth_rays;
};

// Shortest signed rotation taking `from_deg` to `to_deg`, in (-180, 180].
inline double signed_angle_delta(double from_deg, double to_deg) {
  double d = std::fmod(to_deg - from_deg, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

struct RayHit {
  bool hit = false;
  double range = 0.0;
  int cell_x = -1;
  int cell_y = -1;
};

// Grid traversal (Amanatides & Woo). Returns the first blocked cell entered
// within max_range, with `range` the distance at which the ray crosses into
// it. Out-of-grid space counts as blocked.
inline RayHit cast_ray(const Scene& sc, Vec2 origin, Vec2 dir, double max_range) {
  int cx = sc.cell_of_x(origin.x);
  int cy = sc.cell_of_y(origin.y);
  int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
  int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
  double inf = std::numeric_limits<double>::infinity();

  auto boundary_t = [&](double o, double d, int c, int step) {
    if (step == 0) return inf;
    double edge = (step > 0 ? (c + 1) : c) * sc.resolution;
    return (edge - o) / d;
  };
  double t_max_x = boundary_t(origin.x, dir.x, cx, step_x);
  double t_max_y = boundary_t(origin.y, dir.y, cy, step_y);
  double t_delta_x = step_x != 0 ? sc.resolution / std::abs(dir.x) : inf;
  double t_delta_y = step_y != 0 ? sc.resolution / std::abs(dir.y) : inf;

  for (;;) {
    double t;
    if (t_max_x <= t_max_y) {
      t = t_max_x;
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      cy += step_y;
      t_max_y += t_delta_y;
    }
    if (t > max_range) return {};
    if (!sc.free_cell(cx, cy)) return {true, t, cx, cy};
  }
}

// True when the straight segment from `from` to the landmark cell is not
// interrupted by a blocked cell before reaching it.
inline bool line_of_sight(const Scene& sc, Vec2 from, Vec2 to) {
  double d = euclidean(from, to);
  if (d == 0.0) return true;
  Vec2 dir = (1.0 / d) * (to - from);
  RayHit h = cast_ray(sc, from, dir, d);
  if (!h.hit) return true;
  // A hit on the target's own cell does not occlude it.
  return h.cell_x == sc.cell_of_x(to.x) && h.cell_y == sc.cell_of_y(to.y);
}

inline Observation observe(const Scene& sc, const Pose& pose,
                           const SensorConfig& sensor = {}) {
  detail::require(sc.free_at({pose.x, pose.y}), "observe: pose must be on a free cell");
  Observation obs;
  obs.pose = pose;
  Vec2 origin{pose.x, pose.y};

  int ray_count = static_cast<int>(std::lround(sensor.fov_deg / sensor.ray_step_deg)) + 1;
  obs.depth_rays.reserve(ray_count);
  for (int i = 0; i < ray_count; ++i) {
    double bearing = -sensor.fov_deg / 2.0 + i * sensor.ray_step_deg;
    Vec2 dir = heading_vector(pose.heading + bearing);
    RayHit h = cast_ray(sc, origin, dir, sensor.max_range);
    DepthRay r;
    r.bearing_deg = bearing;
    r.hit_range_m = h.hit ? h.range : sensor.max_range;
    r.hit_class = h.hit ? sc.sem_at(h.cell_x, h.cell_y) : -1;
    obs.depth_rays.push_back(r);
  }

  for (const Landmark& lm : sc.landmarks) {
    double range = euclidean(origin, lm.position);
    if (range > sensor.max_range) continue;
    double abs_bearing =
        std::atan2(lm.position.y - origin.y, lm.position.x - origin.x) * (180.0 / 3.14159265358979323846);
    double rel = range == 0.0 ? 0.0 : signed_angle_delta(pose.heading, abs_bearing);
    if (std::abs(rel) > sensor.fov_deg / 2.0) continue;
    if (!line_of_sight(sc, origin, lm.position)) continue;
    obs.visible_landmarks.push_back({lm.label, rel, range});
  }
  return obs;
}

/**
 * Mutable per-episode simulator state. Every executed motion action pushes the
 * pre-action pose; TURN_BACK_LAST_STEP pops exactly one entry and restores it
 * bit-exactly. STOP touches nothing.
 */
struct AgentState {
  Pose pose;
  std::vector<Pose> pose_stack;
  bool collision_flag = false;
};

inline Observation step(const Scene& sc, AgentState& state, Action action,
                        const SensorConfig& sensor = {}) {
  detail::require(sc.free_at({state.pose.x, state.pose.y}),
                  "step: pose must be on a free cell");
  state.collision_flag = false;
  switch (action) {
    case Action::FORWARD: {
      Pose target = apply_action(state.pose, Action::FORWARD);
      state.pose_stack.push_back(state.pose);
      if (sc.free_at({target.x, target.y})) {
        state.pose = target;
      } else {
        state.collision_flag = true;  // block-and-flag; no sliding
      }
      break;
    }
    case Action::TURN_LEFT:
    case Action::TURN_RIGHT:
      state.pose_stack.push_back(state.pose);
      state.pose = apply_action(state.pose, action);
      break;
    case Action::STOP:
      break;
    case Action::TURN_BACK_LAST_STEP:
      if (state.pose_stack.empty())
        throw RollbackUnavailable("TURN_BACK_LAST_STEP with empty pose stack");
      state.pose = state.pose_stack.back();
      state.pose_stack.pop_back();
      break;
  }
  return observe(sc, state.pose, sensor);
}

// --- Grid shortest paths (8-connected, no corner cutting) ---

namespace detail {

struct GridPath {
  double meters = 0.0;
  std::vector<std::pair<int, int>> cells;
};

// Dijkstra from (sx,sy) to (tx,ty). Diagonal moves cost sqrt(2)*resolution
// and require both adjacent cardinal cells free.
inline GridPath dijkstra_cells(const Scene& sc, int sx, int sy, int tx, int ty) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = static_cast<std::size_t>(sc.width) * sc.height;
  std::vector<double> dist(n, inf);
  std::vector<int> prev(n, -1);
  auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * sc.width + x; };

  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
  dist[idx(sx, sy)] = 0.0;
  pq.push({0.0, static_cast<int>(idx(sx, sy))});

  const int dx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double diag = std::sqrt(2.0) * sc.resolution;

  while (!pq.empty()) {
    auto [d, ui] = pq.top();
    pq.pop();
    if (d > dist[ui]) continue;
    int ux = ui % sc.width, uy = ui / sc.width;
    if (ux == tx && uy == ty) break;
    for (int k = 0; k < 8; ++k) {
      int vx = ux + dx[k], vy = uy + dy[k];
      if (!sc.free_cell(vx, vy)) continue;
      if (k >= 4 && (!sc.free_cell(ux + dx[k], uy) || !sc.free_cell(ux, uy + dy[k])))
        continue;
      double nd = d + (k < 4 ? sc.resolution : diag);
      std::size_t vi = idx(vx, vy);
      if (nd < dist[vi]) {
        dist[vi] = nd;
        prev[vi] = ui;
        pq.push({nd, static_cast<int>(vi)});
      }
    }
  }

  if (dist[idx(tx, ty)] == inf) throw UnreachableError("no grid path between cells");
  GridPath out;
  out.meters = dist[idx(tx, ty)];
  for (int cur = static_cast<int>(idx(tx, ty)); cur != -1; cur = prev[cur])
    out.cells.push_back({cur % sc.width, cur / sc.width});
  std::reverse(out.cells.begin(), out.cells.end());
  return out;
}

}  // namespace detail

inline double shortest_path_distance(const Scene& sc, Vec2 a, Vec2 b) {
  detail::require(sc.free_at(a) && sc.free_at(b),
                  "shortest_path_distance: endpoints must be on free cells");
  int ax = sc.cell_of_x(a.x), ay = sc.cell_of_y(a.y);
  int bx = sc.cell_of_x(b.x), by = sc.cell_of_y(b.y);
  if (ax == bx && ay == by) return 0.0;
  return detail::dijkstra_cells(sc, ax, ay, bx, by).meters;
}

// --- Seeded generation ---

struct SceneSpec {
  int width = 48;
  int height = 48;
  int rooms = 4;
  int landmarks = 8;
};

inline const std::vector<std::string>& landmark_vocabulary() {
  static const std::vector<std::string> vocab = {
      "couch",  "chair",  "table",    "clock",   "vase",     "bed",
      "desk",   "lamp",   "sink",     "stove",   "mirror",   "shelf",
      "plant",  "door",   "window",   "fridge",  "piano",    "rug",
      "toilet", "bathtub", "bookcase", "cabinet", "fireplace", "stairs"};
  return vocab;
}

// Deterministic layout: rooms on a macro grid, chained by 2-cell-wide
// L-corridors, landmarks round-robin across rooms with distinct labels.
// Connectivity holds by construction.
inline Scene generate_scene(std::uint64_t seed, const SceneSpec& spec = {}) {
  if (spec.rooms < 1 || spec.landmarks < 0)
    throw GenerationError("scene spec: rooms must be >= 1 and landmarks >= 0");
  if (spec.landmarks > static_cast<int>(landmark_vocabulary().size()))
    throw GenerationError("scene spec: more landmarks than vocabulary labels");

  int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.rooms))));
  int rows = static_cast<int>(std::ceil(static_cast<double>(spec.rooms) / cols));
  int slot_w = (spec.width - 1) / cols;
  int slot_h = (spec.height - 1) / rows;
  if (slot_w < 8 || slot_h < 8)
    throw GenerationError("scene spec: grid too small for requested rooms");

  Scene sc;
  sc.width = spec.width;
  sc.height = spec.height;
  sc.resolution = kDefaultResolution;
  sc.occupancy.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);
  sc.semantics.assign(static_cast<std::size_t>(spec.width) * spec.height, kClassStructure);

  Rng rng(seed);
  auto carve = [&](int x, int y, int cls) {
    if (x <= 0 || y <= 0 || x >= sc.width - 1 || y >= sc.height - 1) return;
    std::size_t i = static_cast<std::size_t>(y) * sc.width + x;
    if (sc.occupancy[i] == 0) {
      sc.occupancy[i] = 1;
      sc.semantics[i] = static_cast<std::uint8_t>(cls);
    }
  };

  std::vector<std::pair<int, int>> centers;
  std::vector<std::array<int, 4>> rects;  // x0, y0, w, h
  for (int i = 0; i < spec.rooms; ++i) {
    int r = i / cols, c = i % cols;
    int ox = 1 + c * slot_w, oy = 1 + r * slot_h;
    int max_w = slot_w - 2, max_h = slot_h - 2;
    int rw = 5 + rng.below(max_w - 5 + 1);
    int rh = 5 + rng.below(max_h - 5 + 1);
    int rx = ox + 1 + rng.below(std::max(1, max_w - rw + 1));
    int ry = oy + 1 + rng.below(std::max(1, max_h - rh + 1));
    int cls = 2 + i % (kSemanticClassCount - 2);
    for (int y = ry; y < ry + rh; ++y)
      for (int x = rx; x < rx + rw; ++x) carve(x, y, cls);
    centers.push_back({rx + rw / 2, ry + rh / 2});
    rects.push_back({rx, ry, rw, rh});
  }

  // Chain rooms i-1 -> i with an L (horizontal leg first), two cells wide.
  for (int i = 1; i < spec.rooms; ++i) {
    auto [x0, y0] = centers[i - 1];
    auto [x1, y1] = centers[i];
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) {
      carve(x, y0, kClassCorridor);
      carve(x, y0 + 1, kClassCorridor);
    }
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
      carve(x1, y, kClassCorridor);
      carve(x1 + 1, y, kClassCorridor);
    }
  }

  // Landmarks: distinct labels, round-robin across rooms, interior free cells.
  std::vector<std::string> labels = landmark_vocabulary();
  for (std::size_t i = labels.size(); i > 1; --i)
    std::swap(labels[i - 1], labels[rng.below(static_cast<int>(i))]);
  std::vector<std::uint8_t> taken(sc.occupancy.size(), 0);
  for (int k = 0; k < spec.landmarks; ++k) {
    auto [rx, ry, rw, rh] = rects[k % spec.rooms];
    int x = 0, y = 0;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      x = rx + rng.below(rw);
      y = ry + rng.below(rh);
      std::size_t i = static_cast<std::size_t>(y) * sc.width + x;
      if (sc.occupancy[i] != 0 && !taken[i]) {
        taken[i] = 1;
        placed = true;
      }
    }
    if (!placed) throw GenerationError("could not place a landmark on a free cell");
    sc.landmarks.push_back({labels[k], sc.cell_center(x, y)});
  }

  sc.id = "scene-" + std::to_string(seed) + "-r" + std::to_string(spec.rooms) + "l" +
          std::to_string(spec.landmarks);
  return sc;
}

// --- Reference episodes ---

/**
 * A pre-aligned reference trajectory: grid path through n goal landmarks, with
 * sub-task boundaries, per-sub-task landmark descriptors, and a synthesized
 * instruction (one sentence per sub-task, so period segmentation recovers the
 * sub-task structure).
 */
struct ReferenceEpisode {
  Path path;                         // cell centers, consecutive cells adjacent
  std::vector<int> boundaries;       // index of each sub-task's goal node; last = path end
  std::vector<std::vector<std::string>> descriptors;  // labels near each sub-path
  std::vector<std::string> phrases;  // one sentence per sub-task
  std::string instruction;           // phrases joined with a space
  double start_heading = 0.0;        // quantized to the 15-degree lattice
};

namespace detail {

inline double quantize_heading15(double deg) {
  double q = std::round(normalize_heading(deg) / kTurnDeg) * kTurnDeg;
  return normalize_heading(q);
}

}  // namespace detail

struct EpisodeOptions {
  // Indices into scene.landmarks to visit in order; empty = seeded random
  // distinct goals.
  std::vector<int> goal_landmarks;
  double descriptor_range = 5.0;  // sensing range used for descriptor lists
  // When set, the episode starts at this position (snapped to its cell)
  // instead of a random free cell — lets consecutive episodes chain.
  bool use_start = false;
  Vec2 start{};
};

inline ReferenceEpisode generate_reference_episode(const Scene& sc, std::uint64_t seed,
                                                   int n_subtasks,
                                                   const EpisodeOptions& opts = {}) {
  detail::require(n_subtasks >= 1, "generate_reference_episode: n_subtasks >= 1");
  if (sc.landmarks.empty()) throw GenerationError("scene has no landmarks");

  Rng rng(seed);
  std::vector<int> goals = opts.goal_landmarks;
  if (goals.empty()) {
    if (static_cast<int>(sc.landmarks.size()) < n_subtasks)
      throw GenerationError("not enough landmarks for requested sub-tasks");
    std::vector<int> pool(sc.landmarks.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    for (std::size_t i = pool.size(); i > 1; --i)
      std::swap(pool[i - 1], pool[rng.below(static_cast<int>(i))]);
    pool.resize(n_subtasks);
    goals = pool;
  }
  if (static_cast<int>(goals.size()) != n_subtasks)
    throw GenerationError("goal list size does not match n_subtasks");
  for (int g : goals)
    if (g < 0 || g >= static_cast<int>(sc.landmarks.size()))
      throw GenerationError("goal landmark index out of range");

  // Start: the caller's override, or a random free cell distinct from the
  // first goal's cell.
  int sx = 0, sy = 0;
  if (opts.use_start) {
    sx = sc.cell_of_x(opts.start.x);
    sy = sc.cell_of_y(opts.start.y);
    if (!sc.free_cell(sx, sy))
      throw GenerationError("episode start override is not on a free cell");
  } else {
    bool found = false;
    for (int attempt = 0; attempt < 500 && !found; ++attempt) {
      sx = rng.below(sc.width);
      sy = rng.below(sc.height);
      Vec2 g0 = sc.landmarks[goals[0]].position;
      if (sc.free_cell(sx, sy) &&
          !(sx == sc.cell_of_x(g0.x) && sy == sc.cell_of_y(g0.y)))
        found = true;
    }
    if (!found) throw GenerationError("could not pick an episode start cell");
  }

  ReferenceEpisode ep;
  int cx = sx, cy = sy;
  ep.path.push_back(sc.cell_center(sx, sy));
  try {
    for (int k = 0; k < n_subtasks; ++k) {
      Vec2 g = sc.landmarks[goals[k]].position;
      int gx = sc.cell_of_x(g.x), gy = sc.cell_of_y(g.y);
      detail::GridPath leg = detail::dijkstra_cells(sc, cx, cy, gx, gy);
      for (std::size_t i = 1; i < leg.cells.size(); ++i)
        ep.path.push_back(sc.cell_center(leg.cells[i].first, leg.cells[i].second));
      ep.boundaries.push_back(static_cast<int>(ep.path.size()) - 1);
      cx = gx;
      cy = gy;
    }
  } catch (const UnreachableError& e) {
    throw GenerationError(std::string("no feasible tour: ") + e.what());
  }
  // Zero-length legs (repeated goal) would produce non-increasing boundaries.
  for (std::size_t k = 1; k < ep.boundaries.size(); ++k)
    if (ep.boundaries[k] <= ep.boundaries[k - 1])
      throw GenerationError("degenerate sub-task: consecutive goals share a cell");

  // Descriptors: labels of landmarks within descriptor_range of the sub-path.
  int prev = 0;
  for (int k = 0; k < n_subtasks; ++k) {
    std::vector<std::string> labels;
    for (const Landmark& lm : sc.landmarks) {
      bool near = false;
      for (int i = prev; i <= ep.boundaries[k] && !near; ++i)
        if (euclidean(ep.path[i], lm.position) <= opts.descriptor_range) near = true;
      if (near && std::find(labels.begin(), labels.end(), lm.label) == labels.end())
        labels.push_back(lm.label);
    }
    ep.descriptors.push_back(std::move(labels));
    prev = ep.boundaries[k];
  }

  static const char* templates[] = {
      "Walk to the %s.", "Head toward the %s.", "Make your way to the %s.",
      "Go over to the %s.", "Move toward the %s."};
  for (int k = 0; k < n_subtasks; ++k) {
    const std::string& label = sc.landmarks[goals[k]].label;
    std::string t = templates[rng.below(5)];
    std::string sentence = t.substr(0, t.find("%s")) + label +
                           t.substr(t.find("%s") + 2);
    ep.phrases.push_back(sentence);
    if (k) ep.instruction += " ";
    ep.instruction += sentence;
  }

  if (ep.path.size() >= 2) {
    Vec2 d = ep.path[1] - ep.path[0];
    ep.start_heading =
        detail::quantize_heading15(std::atan2(d.y, d.x) * (180.0 / 3.14159265358979323846));
  }
  return ep;
}

// --- Serialization: "seqnav-scene/1" ---

namespace detail {

inline nlohmann::json rle_encode(const std::vector<std::uint8_t>& v) {
  nlohmann::json runs = nlohmann::json::array();
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    runs.push_back(j - i);
    runs.push_back(v[i]);
    i = j;
  }
  return runs;
}

inline std::vector<std::uint8_t> rle_decode(const nlohmann::json& runs,
                                            std::size_t expected) {
  if (!runs.is_array() || runs.size() % 2 != 0)
    throw ParseError("grid RLE must be a flat [count, value, ...] array");
  std::vector<std::uint8_t> v;
  v.reserve(expected);
  for (std::size_t i = 0; i < runs.size(); i += 2) {
    std::size_t count = runs[i].get<std::size_t>();
    auto value = runs[i + 1].get<int>();
    for (std::size_t k = 0; k < count; ++k) v.push_back(static_cast<std::uint8_t>(value));
  }
  if (v.size() != expected) throw ParseError("grid RLE length does not match dimensions");
  return v;
}

}  // namespace detail

inline nlohmann::json scene_to_json(const Scene& sc) {
  nlohmann::json j;
  j["format"] = "seqnav-scene/1";
  j["id"] = sc.id;
  j["width"] = sc.width;
  j["height"] = sc.height;
  j["resolution"] = sc.resolution;
  j["occupancy_rle"] = detail::rle_encode(sc.occupancy);
  j["semantics_rle"] = detail::rle_encode(sc.semantics);
  j["landmarks"] = nlohmann::json::array();
  for (const Landmark& lm : sc.landmarks)
    j["landmarks"].push_back({{"label", lm.label}, {"x", lm.position.x}, {"y", lm.position.y}});
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != std::string("seqnav-scene/1"))
    throw ParseError("unsupported scene format tag: expected seqnav-scene/1, got \"" +
                     j.value("format", std::string("<missing>")) + "\"");
  Scene sc;
  try {
    sc.id = j.at("id").get<std::string>();
    sc.width = j.at("width").get<int>();
    sc.height = j.at("height").get<int>();
    sc.resolution = j.at("resolution").get<double>();
    if (sc.width <= 0 || sc.height <= 0 || sc.resolution <= 0.0)
      throw ParseError("scene dimensions and resolution must be positive");
    std::size_t n = static_cast<std::size_t>(sc.width) * sc.height;
    sc.occupancy = detail::rle_decode(j.at("occupancy_rle"), n);
    sc.semantics = detail::rle_decode(j.at("semantics_rle"), n);
    for (const auto& lj : j.at("landmarks")) {
      Landmark lm{lj.at("label").get<std::string>(),
                  {lj.at("x").get<double>(), lj.at("y").get<double>()}};
      if (!sc.free_at(lm.position))
        throw ParseError("landmark \"" + lm.label + "\" is not on a free cell");
      sc.landmarks.push_back(std::move(lm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scene document: ") + e.what());
  }
  for (std::uint8_t s : sc.semantics)
    if (s >= kSemanticClassCount) throw ParseError("semantic class id out of range");
  return sc;
}

}  // namespace seqnav
