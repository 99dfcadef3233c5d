#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "seqnav/errors.hpp"

namespace seqnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

inline double euclidean(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// A trajectory as an ordered list of world points. Always non-empty where a
// Path is required; emptiness is a contract violation at the consuming op.
using Path = std::vector<Vec2>;

inline double path_length(const Path& p) {
  detail::require(!p.empty(), "path_length requires a non-empty path");
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += euclidean(p[i - 1], p[i]);
  return total;
}

// The discrete action set. TURN_BACK_LAST_STEP is emitted only by the
// verification wrapper, never by a policy, and is not pure geometry: it is
// resolved against the simulator's pose stack.
enum class Action : int {
  FORWARD = 0,
  TURN_LEFT = 1,
  TURN_RIGHT = 2,
  STOP = 3,
  TURN_BACK_LAST_STEP = 4,
};

inline constexpr double kForwardStepM = 0.25;
inline constexpr double kTurnDeg = 15.0;
inline constexpr int kPolicyActionCount = 4;  // FORWARD..STOP

inline const char* to_string(Action a) {
  switch (a) {
    case Action::FORWARD: return "FORWARD";
    case Action::TURN_LEFT: return "TURN_LEFT";
    case Action::TURN_RIGHT: return "TURN_RIGHT";
    case Action::STOP: return "STOP";
    case Action::TURN_BACK_LAST_STEP: return "TURN_BACK_LAST_STEP";
  }
  return "?";
}

inline Action action_from_string(const std::string& s) {
  if (s == "FORWARD") return Action::FORWARD;
  if (s == "TURN_LEFT") return Action::TURN_LEFT;
  if (s == "TURN_RIGHT") return Action::TURN_RIGHT;
  if (s == "STOP") return Action::STOP;
  if (s == "TURN_BACK_LAST_STEP") return Action::TURN_BACK_LAST_STEP;
  throw ParseError("unknown action name: " + s);
}

// Wraps into [0, 360). fmod is exact, so lattice headings (multiples of 15)
// stay exact through any number of wraps.
inline double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h = 0.0;
  return h;
}

/**
 * Agent pose. heading is in degrees, normalized to [0, 360); 0 points along
 * +x and positive turns are counter-clockwise.
 */
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.x == b.x && a.y == b.y && a.heading == b.heading;
  }
};

// Unit vector for a heading. Exact (no trig rounding) on the 90-degree axes
// so axis-aligned motion composes exactly.
inline Vec2 heading_vector(double heading_deg) {
  double h = normalize_heading(heading_deg);
  if (h == 0.0) return {1.0, 0.0};
  if (h == 90.0) return {0.0, 1.0};
  if (h == 180.0) return {-1.0, 0.0};
  if (h == 270.0) return {0.0, -1.0};
  double r = h * (3.14159265358979323846 / 180.0);
  return {std::cos(r), std::sin(r)};
}

// Pure kinematics: FORWARD translates 0.25 m along heading, turns are 15
// degrees, STOP is identity. Rollback is not geometry (needs the pose stack)
// and is rejected here.
inline Pose apply_action(const Pose& p, Action a) {
  switch (a) {
    case Action::FORWARD: {
      Vec2 d = heading_vector(p.heading);
      return {p.x + kForwardStepM * d.x, p.y + kForwardStepM * d.y, p.heading};
    }
    case Action::TURN_LEFT:
      return {p.x, p.y, normalize_heading(p.heading + kTurnDeg)};
    case Action::TURN_RIGHT:
      return {p.x, p.y, normalize_heading(p.heading - kTurnDeg)};
    case Action::STOP:
      return p;
    case Action::TURN_BACK_LAST_STEP:
      break;
  }
  throw ContractViolation("apply_action: TURN_BACK_LAST_STEP is not pure geometry");
}

}  // namespace seqnav
