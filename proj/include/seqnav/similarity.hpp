#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "seqnav/errors.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/scene.hpp"

namespace seqnav {

// Lowercased alphabetic token runs; everything else is a separator.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  detail::require(u.size() == v.size() && !u.empty(),
                  "cosine: dimensions must match and be non-zero");
  double uu = 0, vv = 0, uv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  detail::require(uu > 0.0 && vv > 0.0, "cosine: zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

/**
 * Text-observation similarity in [-1, 1]. Implementations must be
 * deterministic given construction parameters and safe to call concurrently.
 */
class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double score(const std::string& text, const Observation& obs) const = 0;
};

// Cache/noise key for an observation: sorted distinct visible labels plus the
// pose quantized to one forward step / one turn increment.
inline std::string observation_digest(const Observation& obs) {
  std::set<std::string> labels;
  for (const VisibleLandmark& lm : obs.visible_landmarks) labels.insert(lm.label);
  std::string d;
  for (const std::string& l : labels) {
    d += l;
    d += ',';
  }
  d += '|';
  d += std::to_string(static_cast<long long>(std::llround(obs.pose.x / kForwardStepM)));
  d += ':';
  d += std::to_string(static_cast<long long>(std::llround(obs.pose.y / kForwardStepM)));
  d += ':';
  d += std::to_string(static_cast<long long>(std::llround(obs.pose.heading / kTurnDeg)));
  return d;
}

struct OracleConfig {
  double match_scale = 0.9;
  double base_score = 0.05;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;
  // label -> synonym tokens; empty means identity over the fixed vocabulary.
  std::map<std::string, std::vector<std::string>> keyword_map;
};

/**
 * Deterministic similarity stand-in: base + scale * overlap + seeded noise.
 * overlap = |phrase tokens intersected with visible-landmark synonyms| divided
 * by the number of distinct landmark labels the phrase references (at least
 * 1). The noise key ignores the visible set on purpose, so making one more
 * referenced landmark visible can never lower the score.
 */
class SyntheticOracleProvider : public SimilarityProvider {
 public:
  explicit SyntheticOracleProvider(OracleConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.keyword_map.empty())
      for (const std::string& label : landmark_vocabulary())
        cfg_.keyword_map[label] = {label};
  }

  double score(const std::string& text, const Observation& obs) const override {
    detail::require(!text.empty(), "score: text must be non-empty");
    std::vector<std::string> tokens = tokenize(text);
    std::set<std::string> token_set(tokens.begin(), tokens.end());

    auto synonyms_of = [&](const std::string& label) -> std::vector<std::string> {
      auto it = cfg_.keyword_map.find(label);
      if (it != cfg_.keyword_map.end()) return it->second;
      return {label};
    };

    // Distinct labels referenced by the phrase (denominator).
    int refs = 0;
    for (const auto& [label, syns] : cfg_.keyword_map) {
      (void)label;
      if (std::any_of(syns.begin(), syns.end(),
                      [&](const std::string& s) { return token_set.count(s) > 0; }))
        ++refs;
    }

    // Phrase tokens hit by visible-landmark synonyms (numerator).
    std::set<std::string> visible_syms;
    for (const VisibleLandmark& lm : obs.visible_landmarks)
      for (const std::string& s : synonyms_of(lm.label)) visible_syms.insert(s);
    int matched = 0;
    for (const std::string& t : token_set)
      if (visible_syms.count(t)) ++matched;

    double overlap = static_cast<double>(matched) / std::max(1, refs);

    double noise = 0.0;
    if (cfg_.noise_sigma > 0.0) {
      std::string digest = observation_digest(obs);
      std::string pose_key = digest.substr(digest.find('|'));  // pose part only
      std::uint64_t key = fnv1a64_u64(cfg_.seed, fnv1a64(text, fnv1a64(pose_key)));
      noise = Rng(key).truncated_gaussian(cfg_.noise_sigma);
    }
    return std::clamp(cfg_.base_score + cfg_.match_scale * overlap + noise, -1.0, 1.0);
  }

  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
};

}  // namespace seqnav
