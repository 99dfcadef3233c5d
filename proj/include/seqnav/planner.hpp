#pragma once

// Low-level action planning: a recurrent attention policy over map and
// instruction embeddings, a scripted path-following stand-in policy, and an
// exploration/verification wrapper that can reject a step, roll the agent
// back, and force the runner-up action on the retry. The verification
// threshold adapts online and is kept in integer hundredths so long event
// traces stay bit-exact.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/instruction.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/scene.hpp"
#include "seqnav/similarity.hpp"
#include "seqnav/tensor.hpp"

namespace seqnav {

// Verification-threshold schedule, in hundredths.
inline constexpr int kThresholdInitCenti = 30;   // 0.30 to start a scene
inline constexpr int kThresholdFloorCenti = 5;   // never below 0.05
inline constexpr int kThresholdCeilCenti = 100;  // never above 1.00
inline constexpr int kThresholdTickWindow = 10;  // decay every 10 actions...
inline constexpr int kThresholdTickDropCenti = 1;    // ...by 0.01
inline constexpr int kThresholdFailDropCenti = 5;    // failed check: −0.05
inline constexpr int kThresholdPassRaiseCenti = 3;   // passed check: +0.03

namespace detail {

// y = W·x for a {rows, cols} matrix tensor.
inline std::vector<double> matvec(const Tensor& w, const std::vector<double>& x) {
  require(w.rank() == 2, "matvec: weight must be rank 2");
  const std::size_t rows = w.shape()[0], cols = w.shape()[1];
  require(x.size() == cols, "matvec: vector length does not match weight columns");
  std::vector<double> y(rows, 0.0);
  const double* wp = w.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline void softmax_inplace(std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Gated recurrent cell.
// ---------------------------------------------------------------------------

// Standard gated recurrence: reset gate r = σ(Wr·x + Ur·h + br), update gate
// z = σ(Wz·x + Uz·h + bz), candidate n = tanh(Wn·x + r ∘ (Un·h) + bn),
// h' = (1 − z) ∘ n + z ∘ h.
struct GruCellWeights {
  Tensor wr, ur, br;
  Tensor wz, uz, bz;
  Tensor wn, un, bn;

  std::size_t hidden_dim() const { return wr.rank() == 2 ? wr.shape()[0] : 0; }
  std::size_t input_dim() const { return wr.rank() == 2 ? wr.shape()[1] : 0; }
};

inline void validate_gru_cell(const GruCellWeights& g) {
  using detail::require;
  require(g.wr.rank() == 2, "gru cell: Wr must be rank 2");
  const std::size_t h = g.wr.shape()[0], x = g.wr.shape()[1];
  require(g.wz.same_shape({h, x}) && g.wn.same_shape({h, x}),
          "gru cell: input weights must share one shape");
  require(g.ur.same_shape({h, h}) && g.uz.same_shape({h, h}) && g.un.same_shape({h, h}),
          "gru cell: recurrent weights must be square");
  require(g.br.same_shape({h}) && g.bz.same_shape({h}) && g.bn.same_shape({h}),
          "gru cell: biases must match the hidden dimension");
}

inline std::vector<double> gru_cell_forward(const GruCellWeights& g,
                                            const std::vector<double>& x,
                                            const std::vector<double>& h) {
  validate_gru_cell(g);
  const std::size_t H = g.hidden_dim();
  detail::require(x.size() == g.input_dim(), "gru cell: input length mismatch");
  detail::require(h.size() == H, "gru cell: hidden length mismatch");
  std::vector<double> rx = detail::matvec(g.wr, x), rh = detail::matvec(g.ur, h);
  std::vector<double> zx = detail::matvec(g.wz, x), zh = detail::matvec(g.uz, h);
  std::vector<double> nx = detail::matvec(g.wn, x), nh = detail::matvec(g.un, h);
  std::vector<double> out(H);
  for (std::size_t i = 0; i < H; ++i) {
    double r = detail::sigmoid(rx[i] + rh[i] + g.br(i));
    double z = detail::sigmoid(zx[i] + zh[i] + g.bz(i));
    double n = std::tanh(nx[i] + r * nh[i] + g.bn(i));
    out[i] = (1.0 - z) * n + z * h[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recurrent attention policy.
// ---------------------------------------------------------------------------

// Previous-action vocabulary: the four policy actions plus the rollback action
// the wrapper can execute, since whatever actually ran becomes `a_prev`.
inline constexpr std::size_t kPrevActionVocab = 5;

struct AOHDims {
  std::size_t zs_dim = 128;       // instruction embedding length
  std::size_t embed_dim = 16;     // previous-action embedding length
  std::size_t h1 = 64;            // first recurrent state
  std::size_t dk = 32;            // attention key/query width
  std::size_t dv = 32;            // attention value width
  std::size_t h2 = 64;            // second recurrent state
  std::size_t zm_channels = 128;  // map embedding channels per position
};

struct AOHWeights {
  Tensor embed;      // {embed_dim, 5}: one column per previous action
  GruCellWeights gru1;  // input [zs, a_embed]
  Tensor att_query;  // {dk, h1}
  Tensor att_key;    // {dk, zm_channels}
  Tensor att_value;  // {dv, zm_channels}
  GruCellWeights gru2;  // input [attention context, gru1 state]
  Tensor head_weight;  // {4, h2}
  Tensor head_bias;    // {4}

  std::size_t h1_dim() const { return gru1.hidden_dim(); }
  std::size_t h2_dim() const { return gru2.hidden_dim(); }
  std::size_t hidden_dim() const { return h1_dim() + h2_dim(); }

  static AOHWeights zeros(const AOHDims& d = {}) { return filled(d, nullptr); }
  static AOHWeights seeded(std::uint64_t seed, const AOHDims& d = {}) {
    Rng rng(seed);
    return filled(d, &rng);
  }

 private:
  static AOHWeights filled(const AOHDims& d, Rng* rng) {
    auto make = [&](std::vector<std::size_t> shape) {
      Tensor t(std::move(shape));
      if (rng)
        for (double& v : t.values()) v = 0.1 * rng->gaussian();
      return t;
    };
    auto cell = [&](std::size_t in, std::size_t hidden) {
      GruCellWeights g;
      g.wr = make({hidden, in});
      g.ur = make({hidden, hidden});
      g.br = make({hidden});
      g.wz = make({hidden, in});
      g.uz = make({hidden, hidden});
      g.bz = make({hidden});
      g.wn = make({hidden, in});
      g.un = make({hidden, hidden});
      g.bn = make({hidden});
      return g;
    };
    AOHWeights w;
    w.embed = make({d.embed_dim, kPrevActionVocab});
    w.gru1 = cell(d.zs_dim + d.embed_dim, d.h1);
    w.att_query = make({d.dk, d.h1});
    w.att_key = make({d.dk, d.zm_channels});
    w.att_value = make({d.dv, d.zm_channels});
    w.gru2 = cell(d.dv + d.h1, d.h2);
    w.head_weight = make({static_cast<std::size_t>(kPolicyActionCount), d.h2});
    w.head_bias = make({static_cast<std::size_t>(kPolicyActionCount)});
    return w;
  }
};

inline void validate_aoh_weights(const AOHWeights& w) {
  using detail::require;
  validate_gru_cell(w.gru1);
  validate_gru_cell(w.gru2);
  require(w.embed.rank() == 2 && w.embed.shape()[1] == kPrevActionVocab,
          "policy weights: action embedding must have one column per action");
  const std::size_t e = w.embed.shape()[0];
  const std::size_t h1 = w.gru1.hidden_dim();
  require(w.gru1.input_dim() > e, "policy weights: first cell input too small");
  require(w.att_query.rank() == 2 && w.att_query.shape()[1] == h1,
          "policy weights: query must read the first recurrent state");
  require(w.att_key.rank() == 2 && w.att_value.rank() == 2 &&
              w.att_key.shape()[1] == w.att_value.shape()[1],
          "policy weights: key and value must read the same channels");
  const std::size_t dk = w.att_key.shape()[0];
  require(w.att_query.shape()[0] == dk, "policy weights: query/key width mismatch");
  const std::size_t dv = w.att_value.shape()[0];
  require(w.gru2.input_dim() == dv + h1, "policy weights: second cell input mismatch");
  require(w.head_weight.same_shape(
              {static_cast<std::size_t>(kPolicyActionCount), w.gru2.hidden_dim()}),
          "policy weights: head shape mismatch");
  require(w.head_bias.same_shape({static_cast<std::size_t>(kPolicyActionCount)}),
          "policy weights: head bias shape mismatch");
}

struct ActionDistribution {
  std::array<double, kPolicyActionCount> probs{};
  std::vector<double> hidden;  // concatenated recurrent states
};

/**
 * Deterministic policy forward pass: embed the previous action, advance the
 * first recurrent cell over [instruction embedding, action embedding], attend
 * from its state over the flattened map-embedding positions, advance the
 * second cell over [attention context, first state], and project to a
 * four-way action distribution.
 *
 * `h_prev` may be empty (treated as all zeros) or hidden_dim() long.
 */
inline ActionDistribution aoh_forward(const AOHWeights& w, const Tensor& zm,
                                      const std::vector<double>& zs,
                                      const std::vector<double>& h_prev, Action a_prev) {
  validate_aoh_weights(w);
  using detail::require;
  const std::size_t e = w.embed.shape()[0];
  const std::size_t h1_dim = w.gru1.hidden_dim(), h2_dim = w.gru2.hidden_dim();
  require(zs.size() + e == w.gru1.input_dim(),
          "policy forward: instruction embedding length mismatch");
  require(zm.rank() == 3 && zm.shape()[0] == w.att_key.shape()[1],
          "policy forward: map embedding channel mismatch");
  require(h_prev.empty() || h_prev.size() == h1_dim + h2_dim,
          "policy forward: hidden state length mismatch");

  std::vector<double> h1(h1_dim, 0.0), h2(h2_dim, 0.0);
  if (!h_prev.empty()) {
    std::copy_n(h_prev.begin(), h1_dim, h1.begin());
    std::copy_n(h_prev.begin() + h1_dim, h2_dim, h2.begin());
  }

  // Previous-action embedding: one column of the embedding matrix.
  const std::size_t a = static_cast<std::size_t>(a_prev);
  require(a < kPrevActionVocab, "policy forward: previous action out of range");
  std::vector<double> x1(zs);
  x1.reserve(zs.size() + e);
  for (std::size_t i = 0; i < e; ++i) x1.push_back(w.embed(i, a));
  h1 = gru_cell_forward(w.gru1, x1, h1);

  // Scaled dot-product attention over the map positions.
  const std::size_t C = zm.shape()[0];
  const std::size_t P = zm.shape()[1] * zm.shape()[2];
  const std::size_t dk = w.att_key.shape()[0], dv = w.att_value.shape()[0];
  std::vector<double> q = detail::matvec(w.att_query, h1);
  std::vector<double> scores(P, 0.0);
  std::vector<std::vector<double>> vals(P);
  std::vector<double> pos(C);
  const double* zp = zm.values().data();
  for (std::size_t j = 0; j < P; ++j) {
    for (std::size_t c = 0; c < C; ++c) pos[c] = zp[c * P + j];
    std::vector<double> key = detail::matvec(w.att_key, pos);
    double s = 0.0;
    for (std::size_t i = 0; i < dk; ++i) s += q[i] * key[i];
    scores[j] = s / std::sqrt(static_cast<double>(dk));
    vals[j] = detail::matvec(w.att_value, pos);
  }
  detail::softmax_inplace(scores);
  std::vector<double> ctx(dv, 0.0);
  for (std::size_t j = 0; j < P; ++j)
    for (std::size_t i = 0; i < dv; ++i) ctx[i] += scores[j] * vals[j][i];

  std::vector<double> x2(ctx);
  x2.insert(x2.end(), h1.begin(), h1.end());
  h2 = gru_cell_forward(w.gru2, x2, h2);

  std::vector<double> logits = detail::matvec(w.head_weight, h2);
  for (int i = 0; i < kPolicyActionCount; ++i) logits[i] += w.head_bias(i);
  detail::softmax_inplace(logits);

  ActionDistribution out;
  for (int i = 0; i < kPolicyActionCount; ++i) out.probs[i] = logits[i];
  out.hidden = std::move(h1);
  out.hidden.insert(out.hidden.end(), h2.begin(), h2.end());
  return out;
}

// ---------------------------------------------------------------------------
// Policy interface.
// ---------------------------------------------------------------------------

struct PolicyInput {
  const Tensor* zm = nullptr;               // map embedding, if the policy wants one
  const std::vector<double>* zs = nullptr;  // instruction embedding
  const std::vector<double>* hidden = nullptr;  // empty/omitted = fresh state
  Action a_prev = Action::STOP;             // what actually executed last step
  const Observation* obs = nullptr;         // lets scripted stand-ins localize
};

/**
 * A policy maps the current inputs to a distribution over the four
 * exploration actions plus its next hidden state. Policies never emit the
 * rollback action; only the verification wrapper does. Implementations are
 * immutable once constructed and safe to share.
 */
class ActionPolicy {
 public:
  virtual ~ActionPolicy() = default;
  virtual ActionDistribution predict(const PolicyInput& in) const = 0;
};

class NeuralAOH : public ActionPolicy {
 public:
  explicit NeuralAOH(AOHWeights w) : w_(std::move(w)) { validate_aoh_weights(w_); }

  ActionDistribution predict(const PolicyInput& in) const override {
    detail::require(in.zm != nullptr, "policy: a map embedding is required");
    detail::require(in.zs != nullptr, "policy: an instruction embedding is required");
    static const std::vector<double> kEmpty;
    const std::vector<double>& h = in.hidden ? *in.hidden : kEmpty;
    return aoh_forward(w_, *in.zm, *in.zs, h, in.a_prev);
  }

  const AOHWeights& weights() const { return w_; }

 private:
  AOHWeights w_;
};

// ---------------------------------------------------------------------------
// Scripted path-following policy.
// ---------------------------------------------------------------------------

/**
 * Follows a reference path greedily from the observed pose: turn toward the
 * next unreached waypoint, move forward when roughly aligned, stop past the
 * last one. `hidden` carries the next-waypoint index. With error_rate > 0, a
 * pose-keyed coin swaps the best and runner-up probabilities, so the injected
 * mistake repeats at the same pose and the runner-up is always the fix.
 */
class ScriptedOraclePolicy : public ActionPolicy {
 public:
  ScriptedOraclePolicy(Path reference, double error_rate, std::uint64_t seed)
      : ref_(std::move(reference)), error_rate_(error_rate), seed_(seed) {
    detail::require(!ref_.empty(), "scripted policy: reference path must be non-empty");
    detail::require(error_rate >= 0.0 && error_rate <= 1.0,
                    "scripted policy: error rate must be in [0, 1]");
  }

  ActionDistribution predict(const PolicyInput& in) const override {
    detail::require(in.obs != nullptr, "scripted policy: an observation is required");
    const Pose& pose = in.obs->pose;

    std::size_t idx = 0;
    if (in.hidden && !in.hidden->empty())
      idx = static_cast<std::size_t>((*in.hidden)[0]);
    while (idx < ref_.size() && euclidean({pose.x, pose.y}, ref_[idx]) < kReachTol)
      ++idx;

    Action desired, runner_up;
    if (idx >= ref_.size()) {
      desired = Action::STOP;
      runner_up = Action::FORWARD;
    } else {
      double bearing = std::atan2(ref_[idx].y - pose.y, ref_[idx].x - pose.x) *
                       (180.0 / 3.14159265358979323846);
      double delta = signed_angle_delta(pose.heading, bearing);
      if (std::abs(delta) <= kTurnDeg / 2.0) {
        desired = Action::FORWARD;
        runner_up = delta >= 0.0 ? Action::TURN_LEFT : Action::TURN_RIGHT;
      } else {
        desired = delta > 0.0 ? Action::TURN_LEFT : Action::TURN_RIGHT;
        runner_up = Action::FORWARD;
      }
    }

    ActionDistribution out;
    out.probs.fill(kOtherProb);
    out.probs[static_cast<std::size_t>(desired)] = kDesiredProb;
    out.probs[static_cast<std::size_t>(runner_up)] = kRunnerUpProb;
    if (error_rate_ > 0.0 && pose_coin(pose) < error_rate_)
      std::swap(out.probs[static_cast<std::size_t>(desired)],
                out.probs[static_cast<std::size_t>(runner_up)]);
    out.hidden = {static_cast<double>(idx)};
    return out;
  }

  const Path& reference() const { return ref_; }

  // Reaching within this distance counts a waypoint as passed; covers the
  // residual left after a forward step along a diagonal path segment.
  static constexpr double kReachTol = 0.15;

 private:
  static constexpr double kDesiredProb = 0.70;
  static constexpr double kRunnerUpProb = 0.20;
  static constexpr double kOtherProb = 0.05;

  double pose_coin(const Pose& pose) const {
    std::uint64_t k = fnv1a64_u64(seed_);
    k = fnv1a64_u64(static_cast<std::uint64_t>(std::llround(pose.x * 16.0)), k);
    k = fnv1a64_u64(static_cast<std::uint64_t>(std::llround(pose.y * 16.0)), k);
    k = fnv1a64_u64(static_cast<std::uint64_t>(std::llround(pose.heading / kTurnDeg)), k);
    return Rng(k).uniform01();
  }

  Path ref_;
  double error_rate_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Action selection helpers.
// ---------------------------------------------------------------------------

inline Action argmax_action(const std::array<double, kPolicyActionCount>& probs) {
  int best = 0;
  for (int i = 1; i < kPolicyActionCount; ++i)
    if (probs[i] > probs[best]) best = i;
  return static_cast<Action>(best);
}

// The action with the second-largest probability; ties resolve to the lowest
// action index, after the maximum itself resolves the same way.
inline Action second_best(const std::array<double, kPolicyActionCount>& probs) {
  int best = static_cast<int>(argmax_action(probs));
  int second = -1;
  for (int i = 0; i < kPolicyActionCount; ++i) {
    if (i == best) continue;
    if (second < 0 || probs[i] > probs[second]) second = i;
  }
  return static_cast<Action>(second);
}

// ---------------------------------------------------------------------------
// Exploration/verification wrapper.
// ---------------------------------------------------------------------------

enum class EaVMode { Exploration, Verification };

enum class ThresholdEvent { Tick, VerificationFailed, VerificationPassed };

struct EaVConfig {
  bool term1_enabled = true;   // consult phrase-order progression
  bool term2_enabled = true;   // consult the similarity threshold test
  bool learnable_threshold = true;
  double fixed_threshold = 0.30;  // used when learnable_threshold is false
};

inline EaVConfig configure_eav(bool term1_enabled, bool term2_enabled,
                               std::optional<double> fixed_threshold = std::nullopt) {
  EaVConfig cfg;
  cfg.term1_enabled = term1_enabled;
  cfg.term2_enabled = term2_enabled;
  if (fixed_threshold) {
    if (!(*fixed_threshold >= 0.05 && *fixed_threshold <= 1.0))
      throw ConfigError("fixed verification threshold must lie in [0.05, 1.0]");
    cfg.learnable_threshold = false;
    cfg.fixed_threshold = *fixed_threshold;
  }
  return cfg;
}

struct EaVState {
  int k_star_last = -1;               // most recent gated phrase index; -1 = none yet
  EaVMode mode = EaVMode::Exploration;
  int delta0_centi = kThresholdInitCenti;  // adaptive threshold, hundredths
  int low_action_counter = 0;         // actions since the last decay
  std::vector<double> hidden;         // policy hidden state
  Action a_prev = Action::STOP;       // neutral placeholder before any action

  double delta0() const { return delta0_centi / 100.0; }
};

inline double effective_threshold(const EaVConfig& cfg, const EaVState& st) {
  return cfg.learnable_threshold ? st.delta0() : cfg.fixed_threshold;
}

// Applies one threshold event. With a fixed threshold this is a no-op.
inline void update_threshold(EaVState& st, ThresholdEvent event, const EaVConfig& cfg) {
  if (!cfg.learnable_threshold) return;
  switch (event) {
    case ThresholdEvent::Tick:
      if (++st.low_action_counter >= kThresholdTickWindow) {
        st.low_action_counter = 0;
        st.delta0_centi -= kThresholdTickDropCenti;
      }
      break;
    case ThresholdEvent::VerificationFailed:
      st.delta0_centi -= kThresholdFailDropCenti;
      break;
    case ThresholdEvent::VerificationPassed:
      st.delta0_centi += kThresholdPassRaiseCenti;
      break;
  }
  st.delta0_centi =
      std::clamp(st.delta0_centi, kThresholdFloorCenti, kThresholdCeilCenti);
}

struct EaVDecision {
  Action action = Action::STOP;
  std::array<double, kPolicyActionCount> probs{};  // the policy's distribution
  bool in_order = true;             // phrase-order progression held (when consulted)
  bool verification_checked = false;  // the similarity test ran this step
  double delta_t = std::numeric_limits<double>::quiet_NaN();  // its score
  double threshold_used = std::numeric_limits<double>::quiet_NaN();
  bool turned_back = false;
  bool forced_second_best = false;  // this step consumed a pending verification
  bool rollback_unavailable = false;  // wanted to turn back, had nowhere to go
};

/**
 * One wrapped planning step.
 *
 * In Verification mode the runner-up action of a fresh prediction executes
 * and the mode clears, so a rollback is always followed by one forced
 * alternative and two rollbacks never run back to back. Otherwise the
 * phrase-order test (when enabled) decides whether progression is plausible:
 * sticking to the same phrase or advancing to the next one is in order, and
 * the first gated step accepts any phrase. Out-of-order progression (or every
 * step, when the order test is disabled) triggers the similarity test (when
 * enabled) against the phrase after the last gated one: scoring below the
 * threshold rejects the step — emit the rollback action and arm Verification
 * mode — while scoring at or above it lets the policy's argmax through. With
 * the similarity test disabled, an order violation alone rejects the step.
 *
 * Threshold events apply in a fixed order: the test compares against the
 * threshold as it stood on entry, its pass/fail adjustment lands next, and
 * the per-action decay tick lands last. A rejection with an empty pose stack
 * (nothing to roll back to) falls through to the argmax and is flagged.
 *
 * The gated phrase index advances only on steps that both ran with the gate
 * closed (alpha = 1) and executed a non-rollback action.
 */
inline EaVDecision eav_step(const Observation& obs, const Instruction& instr,
                            const PhraseSelection& sel, const ActionPolicy& policy,
                            const Tensor* zm, const std::vector<double>& zs,
                            const SimilarityProvider& provider, const EaVConfig& cfg,
                            EaVState& state, bool rollback_available) {
  PolicyInput in;
  in.zm = zm;
  in.zs = &zs;
  in.hidden = &state.hidden;
  in.a_prev = state.a_prev;
  in.obs = &obs;
  ActionDistribution dist = policy.predict(in);

  EaVDecision d;
  d.probs = dist.probs;
  d.threshold_used = effective_threshold(cfg, state);

  if (state.mode == EaVMode::Verification) {
    d.action = second_best(dist.probs);
    d.forced_second_best = true;
    state.mode = EaVMode::Exploration;
  } else {
    bool suspicious;
    if (cfg.term1_enabled) {
      d.in_order = sel.alpha == 0 || state.k_star_last < 0 ||
                   sel.k_star == state.k_star_last ||
                   sel.k_star == state.k_star_last + 1;
      suspicious = !d.in_order;
    } else {
      // Order not consulted: every step with a verifiable phrase is checked.
      suspicious = true;
    }

    d.action = argmax_action(dist.probs);
    if (suspicious) {
      const int next_k = state.k_star_last + 1;
      const bool verifiable = state.k_star_last >= 0 &&
                              next_k < static_cast<int>(instr.phrases.size());
      if (cfg.term2_enabled) {
        if (verifiable) {
          d.delta_t = provider.score(instr.phrases[next_k], obs);
          d.verification_checked = true;
          if (d.delta_t < d.threshold_used) {
            if (rollback_available) {
              d.action = Action::TURN_BACK_LAST_STEP;
              d.turned_back = true;
              state.mode = EaVMode::Verification;
            } else {
              d.rollback_unavailable = true;  // fall through to the argmax
            }
            update_threshold(state, ThresholdEvent::VerificationFailed, cfg);
          } else {
            update_threshold(state, ThresholdEvent::VerificationPassed, cfg);
          }
        }
      } else if (cfg.term1_enabled) {
        // Order violation alone rejects the step.
        if (rollback_available) {
          d.action = Action::TURN_BACK_LAST_STEP;
          d.turned_back = true;
          state.mode = EaVMode::Verification;
        } else {
          d.rollback_unavailable = true;
        }
      }
    }
  }

  if (sel.alpha == 1 && d.action != Action::TURN_BACK_LAST_STEP)
    state.k_star_last = sel.k_star;
  update_threshold(state, ThresholdEvent::Tick, cfg);
  state.hidden = std::move(dist.hidden);
  state.a_prev = d.action;
  return d;
}

// ---------------------------------------------------------------------------
// Policy weight (de)serialization.
// ---------------------------------------------------------------------------

namespace detail {

inline void gru_to_tensors(TensorMap& t, const std::string& p, const GruCellWeights& g) {
  t[p + "wr"] = g.wr;
  t[p + "ur"] = g.ur;
  t[p + "br"] = g.br;
  t[p + "wz"] = g.wz;
  t[p + "uz"] = g.uz;
  t[p + "bz"] = g.bz;
  t[p + "wn"] = g.wn;
  t[p + "un"] = g.un;
  t[p + "bn"] = g.bn;
}

inline GruCellWeights gru_from_tensors(const TensorMap& t, const std::string& p,
                                       std::size_t in, std::size_t hidden) {
  GruCellWeights g;
  g.wr = manifest_tensor(t, p + "wr", {hidden, in});
  g.ur = manifest_tensor(t, p + "ur", {hidden, hidden});
  g.br = manifest_tensor(t, p + "br", {hidden});
  g.wz = manifest_tensor(t, p + "wz", {hidden, in});
  g.uz = manifest_tensor(t, p + "uz", {hidden, hidden});
  g.bz = manifest_tensor(t, p + "bz", {hidden});
  g.wn = manifest_tensor(t, p + "wn", {hidden, in});
  g.un = manifest_tensor(t, p + "un", {hidden, hidden});
  g.bn = manifest_tensor(t, p + "bn", {hidden});
  return g;
}

}  // namespace detail

inline TensorMap aoh_weights_to_tensors(const AOHWeights& w) {
  TensorMap t;
  t["embed.weight"] = w.embed;
  detail::gru_to_tensors(t, "gru1.", w.gru1);
  t["att.query.weight"] = w.att_query;
  t["att.key.weight"] = w.att_key;
  t["att.value.weight"] = w.att_value;
  detail::gru_to_tensors(t, "gru2.", w.gru2);
  t["head.weight"] = w.head_weight;
  t["head.bias"] = w.head_bias;
  return t;
}

inline AOHWeights aoh_weights_from_tensors(const TensorMap& t) {
  auto dim_of = [&](const std::string& name, std::size_t axis) {
    auto it = t.find(name);
    if (it == t.end()) throw ParseError("policy weights: missing tensor '" + name + "'");
    if (axis >= it->second.rank())
      throw ParseError("policy weights: tensor '" + name + "' has too few axes");
    return it->second.shape()[axis];
  };
  AOHDims d;
  d.embed_dim = dim_of("embed.weight", 0);
  d.h1 = dim_of("gru1.wr", 0);
  detail::require(dim_of("gru1.wr", 1) > d.embed_dim,
                  "policy weights: first cell input too small");
  d.zs_dim = dim_of("gru1.wr", 1) - d.embed_dim;
  d.dk = dim_of("att.key.weight", 0);
  d.dv = dim_of("att.value.weight", 0);
  d.zm_channels = dim_of("att.key.weight", 1);
  d.h2 = dim_of("gru2.wr", 0);

  AOHWeights w;
  w.embed = manifest_tensor(t, "embed.weight", {d.embed_dim, kPrevActionVocab});
  w.gru1 = detail::gru_from_tensors(t, "gru1.", d.zs_dim + d.embed_dim, d.h1);
  w.att_query = manifest_tensor(t, "att.query.weight", {d.dk, d.h1});
  w.att_key = manifest_tensor(t, "att.key.weight", {d.dk, d.zm_channels});
  w.att_value = manifest_tensor(t, "att.value.weight", {d.dv, d.zm_channels});
  w.gru2 = detail::gru_from_tensors(t, "gru2.", d.dv + d.h1, d.h2);
  w.head_weight = manifest_tensor(
      t, "head.weight", {static_cast<std::size_t>(kPolicyActionCount), d.h2});
  w.head_bias =
      manifest_tensor(t, "head.bias", {static_cast<std::size_t>(kPolicyActionCount)});
  try {
    validate_aoh_weights(w);
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("policy weights: ") + e.what());
  }
  return w;
}

inline std::string aoh_weights_to_json(const AOHWeights& w) {
  return tensors_to_json(aoh_weights_to_tensors(w));
}

inline AOHWeights aoh_weights_from_json(const std::string& text) {
  return aoh_weights_from_tensors(tensors_from_json(text));
}

}  // namespace seqnav
