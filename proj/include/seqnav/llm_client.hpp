#pragma once

// Chat-service plumbing for instruction rewriting: exact prompt construction,
// a chat-style wire protocol, pluggable transports (live HTTP, in-memory
// stubs, and record/replay cassettes keyed by request digest), and the two
// rewriting operations — concatenating a pair of instructions and enriching
// one with visual detail — each validated and falling back deterministically
// when the service is absent or misbehaves.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/instruction.hpp"
#include "seqnav/rng.hpp"

namespace seqnav {

// The exact user-turn prompts the remote rewriting services expect; the
// bracketed slots are substituted verbatim, nothing else is altered.
inline constexpr const char* kConcatPromptTemplate =
    "Please help logically connect two navigation instructions into one, "
    "ensuring semantic coherence, with the end of the first serving as the "
    "start of the second. <INS1> <INS2>";
inline constexpr const char* kEnrichPromptTemplate =
    "<IMAGES> Please look closely at these multiple images of the first view "
    "corresponding to a navigation trajectory, and help me enrich the "
    "discriminating details of instruction without changing its logic. The "
    "original instruction is: <INS>";

inline constexpr const char* kCassetteFormat = "seqnav-cassette/1";

namespace detail {

// Replaces exactly one occurrence of `slot`; the slot must be present.
inline std::string replace_slot(std::string text, const std::string& slot,
                                const std::string& value) {
  std::size_t at = text.find(slot);
  require(at != std::string::npos, "prompt template is missing a slot");
  text.replace(at, slot.size(), value);
  return text;
}

inline std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace detail

inline std::string build_concat_prompt(const std::string& ins1,
                                       const std::string& ins2) {
  detail::require(!ins1.empty() && !ins2.empty(),
                  "concat prompt: instructions must be non-empty");
  return detail::replace_slot(
      detail::replace_slot(kConcatPromptTemplate, "<INS1>", ins1), "<INS2>", ins2);
}

// Frame digests stand in for the images; they are joined with single spaces.
inline std::string build_enrich_prompt(const std::string& phrase,
                                       const std::vector<std::string>& frames) {
  detail::require(!phrase.empty(), "enrich prompt: phrase must be non-empty");
  detail::require(!frames.empty(), "enrich prompt: at least one frame digest");
  std::string joined;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i) joined += ' ';
    joined += frames[i];
  }
  return detail::replace_slot(
      detail::replace_slot(kEnrichPromptTemplate, "<IMAGES>", joined), "<INS>",
      phrase);
}

// ---------------------------------------------------------------------------
// Wire protocol.
// ---------------------------------------------------------------------------

// Chat request body for one user turn. Object keys serialize sorted, so the
// same prompt always yields the same bytes (and the same digest).
inline std::string build_chat_request(const std::string& model,
                                      const std::string& prompt) {
  nlohmann::json req;
  req["model"] = model;
  req["messages"] = nlohmann::json::array(
      {nlohmann::json{{"role", "user"}, {"content", prompt}}});
  return req.dump();
}

// Extracts the first choice's message text; anything else is a provider error.
inline std::string parse_chat_response(const std::string& body) {
  try {
    nlohmann::json j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed chat response: ") + e.what());
  }
}

inline std::string chat_request_digest(const std::string& request_body) {
  return detail::hex16(fnv1a64(request_body));
}

// ---------------------------------------------------------------------------
// Transports.
// ---------------------------------------------------------------------------

/**
 * One chat round trip: request body in, raw response body out. Implementations
 * throw ProviderError on transport or protocol failure.
 */
class LLMTransport {
 public:
  virtual ~LLMTransport() = default;
  virtual std::string post_chat(const std::string& request_body) = 0;
};

class HttpLLMTransport final : public LLMTransport {
 public:
  explicit HttpLLMTransport(std::string endpoint, int timeout_ms = 5000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
    detail::require(!endpoint_.empty(), "chat transport: endpoint must be set");
  }

  std::string post_chat(const std::string& request_body) override {
    httplib::Client client(endpoint_);
    auto tmo = std::chrono::milliseconds(timeout_ms_);
    client.set_connection_timeout(tmo);
    client.set_read_timeout(tmo);
    httplib::Result res = client.Post("/chat", request_body, "application/json");
    if (!res)
      throw ProviderError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ProviderError("chat service returned status " +
                          std::to_string(res->status));
    return res->body;
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

/**
 * Replays recorded responses by request digest; an unrecorded request is a
 * provider error. Makes rewriting tests hermetic.
 */
class ReplayTransport final : public LLMTransport {
 public:
  explicit ReplayTransport(std::map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  static ReplayTransport from_json(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("cassette: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
      throw ParseError("cassette: missing format tag");
    if (j["format"] != kCassetteFormat)
      throw ParseError("cassette: unsupported format \"" +
                       j["format"].get<std::string>() + "\"");
    if (!j.contains("entries") || !j["entries"].is_object())
      throw ParseError("cassette: missing entries object");
    std::map<std::string, std::string> entries;
    for (const auto& [digest, value] : j["entries"].items()) {
      if (!value.is_string())
        throw ParseError("cassette: entry \"" + digest + "\" must be a string");
      entries[digest] = value.get<std::string>();
    }
    return ReplayTransport(std::move(entries));
  }

  std::string post_chat(const std::string& request_body) override {
    auto it = entries_.find(chat_request_digest(request_body));
    if (it == entries_.end())
      throw ProviderError("no recorded response for request digest " +
                          chat_request_digest(request_body));
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string> entries_;
};

/**
 * Wraps a live transport and records every exchange, producing a cassette a
 * ReplayTransport can load later.
 */
class RecordingTransport final : public LLMTransport {
 public:
  explicit RecordingTransport(LLMTransport& inner) : inner_(inner) {}

  std::string post_chat(const std::string& request_body) override {
    std::string response = inner_.post_chat(request_body);
    entries_[chat_request_digest(request_body)] = response;
    return response;
  }

  std::string to_json() const {
    nlohmann::json j;
    j["format"] = kCassetteFormat;
    j["entries"] = nlohmann::json::object();
    for (const auto& [digest, response] : entries_) j["entries"][digest] = response;
    return j.dump(2);
  }

  std::size_t size() const { return entries_.size(); }

 private:
  LLMTransport& inner_;
  std::map<std::string, std::string> entries_;
};

// ---------------------------------------------------------------------------
// Client.
// ---------------------------------------------------------------------------

struct LLMConfig {
  std::string model = "llama-13b";
  int max_retries = 1;  // transport attempts per request
};

// One audited exchange: what was asked (and its digest), what came back, and
// whether the result was ultimately used or replaced by a fallback.
struct LLMExchange {
  std::string digest;
  std::string prompt;
  std::string response;    // raw text extracted from the reply; empty on failure
  std::string provenance;  // "remote", "offline", or "unchanged"
};

struct LLMResult {
  std::string text;
  std::string provenance;  // matches the exchange log entry
};

/**
 * A chat client over a pluggable transport. Default-constructed clients are
 * offline: every operation takes its deterministic fallback. The transport is
 * borrowed, not owned. Every request is logged with its digest.
 */
class RemoteLLMClient {
 public:
  RemoteLLMClient() = default;
  RemoteLLMClient(LLMConfig cfg, LLMTransport* transport)
      : cfg_(std::move(cfg)), transport_(transport) {}

  bool online() const { return transport_ != nullptr; }
  const LLMConfig& config() const { return cfg_; }
  const std::vector<LLMExchange>& log() const { return log_; }

  // Raw chat round trip with retries; empty optional-style contract is
  // expressed by ProviderError. Used by the rewriting operations below.
  std::string chat(const std::string& prompt) {
    detail::require(transport_ != nullptr, "chat: client is offline");
    const std::string body = build_chat_request(cfg_.model, prompt);
    const int attempts = std::max(1, cfg_.max_retries);
    for (int i = 0;; ++i) {
      try {
        return parse_chat_response(transport_->post_chat(body));
      } catch (const ProviderError&) {
        if (i + 1 >= attempts) throw;
      }
    }
  }

  void record(const std::string& prompt, const std::string& response,
              const std::string& provenance) {
    log_.push_back(LLMExchange{
        chat_request_digest(build_chat_request(cfg_.model, prompt)), prompt,
        response, provenance});
  }

 private:
  LLMConfig cfg_;
  LLMTransport* transport_ = nullptr;
  std::vector<LLMExchange> log_;
};

// ---------------------------------------------------------------------------
// Rewriting operations.
// ---------------------------------------------------------------------------

/**
 * Deterministic instruction join used whenever no service is configured or a
 * response fails validation: the first instruction loses its trailing period
 * and the second follows after ". Then, " with its first letter lowercased.
 * Splitting the result at sentence-final periods recovers exactly the two
 * inputs' sentence sets, so downstream segmentation sees every boundary.
 */
inline std::string concat_instructions_offline(const std::string& a,
                                               const std::string& b) {
  std::string left = collapse_whitespace(a);
  std::string right = collapse_whitespace(b);
  detail::require(!left.empty() && !right.empty(),
                  "concat: instructions must be non-empty");
  while (!left.empty() && left.back() == '.') left.pop_back();
  while (!left.empty() && left.back() == ' ') left.pop_back();
  detail::require(!left.empty(), "concat: first instruction is only periods");
  if (right[0] >= 'A' && right[0] <= 'Z')
    right[0] = static_cast<char>(right[0] - 'A' + 'a');
  return left + ". Then, " + right;
}

/**
 * Joins two instructions through the chat service, validating that the reply
 * is non-empty and longer than both inputs; any transport or validation
 * failure silently degrades to the offline join. The provenance field says
 * which path produced the text.
 */
inline LLMResult llm_concat(RemoteLLMClient& client, const std::string& ins1,
                            const std::string& ins2) {
  detail::require(!ins1.empty() && !ins2.empty(),
                  "llm concat: instructions must be non-empty");
  const std::string prompt = build_concat_prompt(ins1, ins2);
  if (client.online()) {
    try {
      std::string reply = collapse_whitespace(client.chat(prompt));
      if (!reply.empty() && reply.size() > std::max(ins1.size(), ins2.size())) {
        client.record(prompt, reply, "remote");
        return {reply, "remote"};
      }
      client.record(prompt, reply, "offline");  // validation rejected it
    } catch (const ProviderError&) {
      client.record(prompt, "", "offline");
    }
  } else {
    client.record(prompt, "", "offline");
  }
  return {concat_instructions_offline(ins1, ins2), "offline"};
}

/**
 * Asks the chat service to add discriminating visual detail to one phrase,
 * given frame digests standing in for first-person images. The reply must
 * keep at least the original sentence count; otherwise — or on any failure —
 * the phrase is returned unchanged with provenance "unchanged".
 */
inline LLMResult llava_enrich(RemoteLLMClient& client, const std::string& phrase,
                              const std::vector<std::string>& frames) {
  detail::require(!phrase.empty(), "enrich: phrase must be non-empty");
  detail::require(!frames.empty(), "enrich: at least one frame digest required");
  const std::string prompt = build_enrich_prompt(phrase, frames);
  if (client.online()) {
    try {
      std::string reply = collapse_whitespace(client.chat(prompt));
      std::size_t original_sentences =
          segment(phrase, SegmentationStyle::TypeIV_Periods).phrases.size();
      if (!reply.empty() &&
          segment(reply, SegmentationStyle::TypeIV_Periods).phrases.size() >=
              original_sentences) {
        client.record(prompt, reply, "remote");
        return {reply, "remote"};
      }
      client.record(prompt, reply, "unchanged");
    } catch (const ProviderError&) {
      client.record(prompt, "", "unchanged");
    }
  } else {
    client.record(prompt, "", "unchanged");
  }
  return {phrase, "unchanged"};
}

}  // namespace seqnav
