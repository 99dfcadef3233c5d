#pragma once

#include <chrono>
#include <cmath>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/similarity.hpp"

namespace seqnav {

struct RemoteEmbeddingConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8091"
  double timeout_s = 5.0;
};

/**
 * Similarity via a remote embedding service. Wire protocol: POST /embed with
 * {"texts": ["..."]}, response {"embeddings": [[...]]}. Vectors are
 * re-normalized locally before the cosine; responses are cached by text (and
 * by observation digest for the visual side), so a warm score never touches
 * the network and is bit-identical to the cold one.
 */
class RemoteEmbeddingClient : public SimilarityProvider {
 public:
  explicit RemoteEmbeddingClient(RemoteEmbeddingConfig cfg) : cfg_(std::move(cfg)) {
    detail::require(!cfg_.endpoint.empty(), "remote embedding endpoint must be set");
  }

  double score(const std::string& text, const Observation& obs) const override {
    detail::require(!text.empty(), "score: text must be non-empty");
    std::vector<double> u = embed(text, text);
    std::vector<double> v = embed(observation_digest(obs), observation_tokens(obs));
    return cosine(u, v);
  }

  // The observation rendered as a token string for the text encoder.
  static std::string observation_tokens(const Observation& obs) {
    std::set<std::string> labels;
    for (const VisibleLandmark& lm : obs.visible_landmarks) labels.insert(lm.label);
    std::string s = "visible:";
    for (const std::string& l : labels) {
      s += ' ';
      s += l;
    }
    return s;
  }

  std::size_t cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  std::vector<double> embed(const std::string& cache_key, const std::string& text) const {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(cache_key);
      if (it != cache_.end()) return it->second;
    }
    std::vector<double> vec = fetch(text);
    std::lock_guard<std::mutex> lock(mu_);
    // First writer wins so concurrent fills stay order-independent.
    auto [it, inserted] = cache_.emplace(cache_key, std::move(vec));
    (void)inserted;
    return it->second;
  }

  std::vector<double> fetch(const std::string& text) const {
    httplib::Client client(cfg_.endpoint);
    auto tmo = std::chrono::milliseconds(static_cast<int>(cfg_.timeout_s * 1000));
    client.set_connection_timeout(tmo);
    client.set_read_timeout(tmo);

    nlohmann::json req;
    req["texts"] = {text};
    httplib::Result res = client.Post("/embed", req.dump(), "application/json");
    if (!res)
      throw ProviderError("embedding request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ProviderError("embedding service returned status " +
                          std::to_string(res->status));
    try {
      nlohmann::json body = nlohmann::json::parse(res->body);
      const auto& embs = body.at("embeddings");
      if (!embs.is_array() || embs.size() != 1)
        throw ProviderError("embedding response must carry exactly one vector");
      std::vector<double> v = embs[0].get<std::vector<double>>();
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      if (v.empty() || n2 <= 0.0 || !std::isfinite(n2))
        throw ProviderError("embedding service returned a degenerate vector");
      double inv = 1.0 / std::sqrt(n2);
      for (double& x : v) x *= inv;
      return v;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
  }

  RemoteEmbeddingConfig cfg_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

}  // namespace seqnav
