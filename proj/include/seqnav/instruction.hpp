#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "seqnav/errors.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/similarity.hpp"

namespace seqnav {

inline std::string collapse_whitespace(const std::string& s) {
  std::string out;
  bool in_ws = true;  // also eats leading whitespace
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!in_ws) out.push_back(' ');
      in_ws = true;
    } else {
      out.push_back(ch);
      in_ws = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

enum class SegmentationStyle {
  TypeI_None,          // whole instruction, single phrase
  TypeII_Commas,       // split at commas and periods
  TypeIII_Conjunctions,  // split at periods and standalone "and"/"then" tokens
  TypeIV_Periods,      // split at periods only
};

inline const char* to_string(SegmentationStyle s) {
  switch (s) {
    case SegmentationStyle::TypeI_None: return "type1";
    case SegmentationStyle::TypeII_Commas: return "type2";
    case SegmentationStyle::TypeIII_Conjunctions: return "type3";
    case SegmentationStyle::TypeIV_Periods: return "type4";
  }
  return "?";
}

inline SegmentationStyle segmentation_style_from_string(const std::string& s) {
  if (s == "type1") return SegmentationStyle::TypeI_None;
  if (s == "type2") return SegmentationStyle::TypeII_Commas;
  if (s == "type3") return SegmentationStyle::TypeIII_Conjunctions;
  if (s == "type4") return SegmentationStyle::TypeIV_Periods;
  throw ConfigError("segmentation: unknown style \"" + s + "\"");
}

struct Instruction {
  std::string raw;
  std::vector<std::string> phrases;
  SegmentationStyle style = SegmentationStyle::TypeIV_Periods;
};

// Splits the instruction into ordered phrases. Delimiters are removed and
// fragments whitespace-normalized; empty fragments are dropped. No clause
// analysis: Type-III matches the exact standalone tokens "and"/"then" only.
inline Instruction segment(const std::string& raw, SegmentationStyle style) {
  detail::require(!raw.empty(), "segment: raw instruction must be non-empty");
  Instruction out;
  out.raw = raw;
  out.style = style;

  auto push = [&](const std::string& frag) {
    std::string c = collapse_whitespace(frag);
    if (!c.empty()) out.phrases.push_back(std::move(c));
  };

  switch (style) {
    case SegmentationStyle::TypeI_None:
      push(raw);
      break;
    case SegmentationStyle::TypeII_Commas:
    case SegmentationStyle::TypeIV_Periods: {
      std::string cur;
      for (char ch : raw) {
        bool cut = ch == '.' || (style == SegmentationStyle::TypeII_Commas && ch == ',');
        if (cut) {
          push(cur);
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      push(cur);
      break;
    }
    case SegmentationStyle::TypeIII_Conjunctions: {
      std::string sentence;
      auto flush_sentence = [&](const std::string& s) {
        // Within a sentence, standalone "and"/"then" words separate fragments.
        std::string frag, word;
        auto end_word = [&] {
          if (word == "and" || word == "then") {
            push(frag);
            frag.clear();
          } else if (!word.empty()) {
            if (!frag.empty()) frag.push_back(' ');
            frag += word;
          }
          word.clear();
        };
        for (char ch : s) {
          if (std::isspace(static_cast<unsigned char>(ch)))
            end_word();
          else
            word.push_back(ch);
        }
        end_word();
        push(frag);
      };
      for (char ch : raw) {
        if (ch == '.') {
          flush_sentence(sentence);
          sentence.clear();
        } else {
          sentence.push_back(ch);
        }
      }
      flush_sentence(sentence);
      break;
    }
  }

  if (out.phrases.empty()) out.phrases.push_back(collapse_whitespace(raw));
  return out;
}

/**
 * Result of matching phrases against the current observation: a softmax
 * simplex over phrases, normalized entropy in [0,1], and the gate decision.
 * k_star is the argmax index regardless of alpha; it is only acted on when
 * alpha == 1.
 */
struct PhraseSelection {
  std::vector<double> raw_similarities;
  std::vector<double> probabilities;
  double entropy = 0.0;
  int alpha = 0;
  int k_star = 0;
};

// Entropy in bits of a simplex, normalized by log2(max(n, 2)) so a single
// phrase is defined maximally confident instead of 0/0.
inline double normalized_entropy(const std::vector<double>& p) {
  detail::require(!p.empty(), "normalized_entropy: empty distribution");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h / std::log2(std::max<std::size_t>(p.size(), 2));
}

inline PhraseSelection select_phrase(const Instruction& instr, const Observation& obs,
                                     const SimilarityProvider& provider,
                                     double phi_threshold = 0.65,
                                     double logit_scale = 100.0) {
  detail::require(!instr.phrases.empty(), "select_phrase: instruction has no phrases");
  detail::require(phi_threshold > 0.0 && phi_threshold < 1.0,
                  "select_phrase: phi_threshold must be in (0,1)");
  detail::require(logit_scale > 0.0, "select_phrase: logit_scale must be positive");

  PhraseSelection sel;
  sel.raw_similarities.reserve(instr.phrases.size());
  for (const std::string& phrase : instr.phrases)
    sel.raw_similarities.push_back(provider.score(phrase, obs));

  // Numerically stable softmax of logit_scale * theta.
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double th : sel.raw_similarities) max_logit = std::max(max_logit, logit_scale * th);
  double sum = 0.0;
  sel.probabilities.reserve(sel.raw_similarities.size());
  for (double th : sel.raw_similarities) {
    double e = std::exp(logit_scale * th - max_logit);
    sel.probabilities.push_back(e);
    sum += e;
  }
  for (double& p : sel.probabilities) p /= sum;

  sel.entropy = normalized_entropy(sel.probabilities);
  sel.alpha = sel.entropy < phi_threshold ? 1 : 0;
  sel.k_star = 0;  // argmax, lowest index on ties
  for (std::size_t k = 1; k < sel.probabilities.size(); ++k)
    if (sel.probabilities[k] > sel.probabilities[sel.k_star])
      sel.k_star = static_cast<int>(k);
  return sel;
}

/**
 * Fixed-dimension text embedding contract for the policy's instruction input.
 */
class InstructionEncoder {
 public:
  virtual ~InstructionEncoder() = default;
  virtual std::vector<double> encode(const std::string& text) const = 0;
  virtual int dim() const = 0;
};

// Deterministic bag-of-tokens embedding: each token hashes to a coordinate
// and a sign, accumulated then L2-normalized. Tokenless text maps to e_0 so
// the output is always a unit vector.
class HashedBagEncoder : public InstructionEncoder {
 public:
  explicit HashedBagEncoder(int dim = 128) : dim_(dim) {
    detail::require(dim > 0, "HashedBagEncoder: dimension must be positive");
  }

  std::vector<double> encode(const std::string& text) const override {
    std::vector<double> v(dim_, 0.0);
    for (const std::string& tok : tokenize(text)) {
      std::uint64_t h = fnv1a64(tok);
      double sign = (h >> 63) ? -1.0 : 1.0;
      v[h % static_cast<std::uint64_t>(dim_)] += sign;
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 == 0.0) {
      v[0] = 1.0;
      return v;
    }
    double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
  }

  int dim() const override { return dim_; }

 private:
  int dim_;
};

// Hard alpha switch: the focused phrase when the gate is confident, the whole
// instruction otherwise.
inline std::vector<double> encode_instruction(const PhraseSelection& sel,
                                              const Instruction& instr,
                                              const InstructionEncoder& encoder) {
  detail::require(sel.probabilities.size() == instr.phrases.size(),
                  "encode_instruction: selection does not match instruction");
  if (sel.alpha == 1) return encoder.encode(instr.phrases[sel.k_star]);
  return encoder.encode(instr.raw);
}

}  // namespace seqnav
