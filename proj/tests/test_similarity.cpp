#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "seqnav/remote_embedding.hpp"
#include "seqnav/similarity.hpp"

using namespace seqnav;

namespace {

Observation obs_with(std::vector<std::string> labels, Pose pose = {1.0, 1.0, 0.0}) {
  Observation o;
  o.pose = pose;
  for (auto& l : labels) o.visible_landmarks.push_back({l, 0.0, 1.0});
  return o;
}

}  // namespace

TEST_CASE("tokenize") {
  auto t = tokenize("Walk past the couch!");
  REQUIRE(t.size() == 4);
  CHECK(t[0] == "walk");
  CHECK(t[3] == "couch");
  CHECK(tokenize("...").empty());
  CHECK(tokenize("then, STOP.") == std::vector<std::string>{"then", "stop"});
}

TEST_CASE("cosine") {
  std::vector<double> u{1, 2, 3}, w{-1, -2, -3}, z{0, 0, 0};
  CHECK(cosine(u, u) == Catch::Approx(1.0).margin(1e-12));
  CHECK(cosine(u, w) == Catch::Approx(-1.0).margin(1e-12));
  CHECK(cosine({1, 0}, {0, 1}) == 0.0);
  CHECK_THROWS_AS(cosine(u, z), ContractViolation);
  CHECK_THROWS_AS(cosine(u, {1, 2}), ContractViolation);
}

TEST_CASE("oracle scoring formula, noise off") {
  OracleConfig cfg;
  cfg.noise_sigma = 0.0;
  SyntheticOracleProvider p(cfg);

  CHECK(p.score("walk past the couch", obs_with({"couch"})) ==
        Catch::Approx(0.95).margin(1e-12));
  CHECK(p.score("find the fireplace", obs_with({"couch"})) == 0.05);
  CHECK(p.score("pass the couch and the clock", obs_with({"couch"})) ==
        Catch::Approx(0.5).margin(1e-12));
  CHECK(p.score("go forward", obs_with({"couch"})) == 0.05);
  CHECK_THROWS_AS(p.score("", obs_with({})), ContractViolation);
}

TEST_CASE("oracle determinism and noise bounds") {
  OracleConfig cfg;
  cfg.seed = 42;
  SyntheticOracleProvider p(cfg);
  Observation o = obs_with({"couch", "vase"});
  double a = p.score("walk to the couch", o);
  double b = p.score("walk to the couch", o);
  CHECK(a == b);

  OracleConfig clean = cfg;
  clean.noise_sigma = 0.0;
  SyntheticOracleProvider pc(clean);
  double c = pc.score("walk to the couch", o);
  CHECK(std::abs(a - c) <= 3.0 * cfg.noise_sigma + 1e-15);
}

TEST_CASE("oracle monotonicity: extra matching landmark never lowers the score") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    OracleConfig cfg;
    cfg.seed = seed;
    SyntheticOracleProvider p(cfg);
    Pose pose{2.0, 3.0, 45.0};
    double without = p.score("pass the couch and the clock", obs_with({"couch"}, pose));
    double with_both =
        p.score("pass the couch and the clock", obs_with({"couch", "clock"}, pose));
    CHECK(with_both >= without);
  }
}

TEST_CASE("oracle scores stay in [-1, 1]") {
  OracleConfig cfg;
  cfg.base_score = 0.95;
  cfg.match_scale = 0.9;
  cfg.noise_sigma = 0.0;
  SyntheticOracleProvider p(cfg);
  CHECK(p.score("the couch", obs_with({"couch"})) == 1.0);

  OracleConfig neg;
  neg.base_score = -1.5;
  neg.noise_sigma = 0.0;
  CHECK(SyntheticOracleProvider(neg).score("anything", obs_with({})) == -1.0);
}

TEST_CASE("keyword map: synonyms count as references") {
  OracleConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.keyword_map["couch"] = {"couch", "sofa"};
  SyntheticOracleProvider p(cfg);
  CHECK(p.score("sit on the sofa", obs_with({"couch"})) ==
        Catch::Approx(0.95).margin(1e-12));
}

TEST_CASE("observation digest: label order independent, pose quantized") {
  Observation a = obs_with({"couch", "vase"});
  Observation b = obs_with({"vase", "couch"});
  CHECK(observation_digest(a) == observation_digest(b));

  Observation c = obs_with({"couch"}, {0.26, 0.0, 0.0});
  Observation d = obs_with({"couch"}, {0.24, 0.0, 0.0});
  Observation e = obs_with({"couch"}, {0.38, 0.0, 0.0});
  CHECK(observation_digest(c) == observation_digest(d));
  CHECK(observation_digest(c) != observation_digest(e));
}

TEST_CASE("remote embedding client") {
  httplib::Server srv;
  std::atomic<int> requests{0};
  srv.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++requests;
    auto body = nlohmann::json::parse(req.body);
    std::string text = body["texts"][0].get<std::string>();
    if (text == "ERR500") {
      res.status = 500;
      return;
    }
    if (text == "BADJSON") {
      res.set_content("{not json", "application/json");
      return;
    }
    if (text == "ZERO") {
      res.set_content(nlohmann::json{{"embeddings", {{0.0, 0.0, 0.0}}}}.dump(),
                      "application/json");
      return;
    }
    // Deterministic pseudo-embedding from the text hash.
    Rng rng(fnv1a64(text));
    std::vector<double> v(8);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    res.set_content(nlohmann::json{{"embeddings", {v}}}.dump(), "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  RemoteEmbeddingConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  RemoteEmbeddingClient client(cfg);

  SECTION("identical text and observation tokens give cosine 1") {
    Observation o = obs_with({"couch"});
    double s = client.score(RemoteEmbeddingClient::observation_tokens(o), o);
    CHECK(s == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("warm cache bypasses the network and is bit-identical") {
    Observation o = obs_with({"vase", "lamp"});
    double cold = client.score("head to the vase", o);
    int after_cold = requests.load();
    double warm = client.score("head to the vase", o);
    CHECK(warm == cold);
    CHECK(requests.load() == after_cold);
  }

  SECTION("service failures raise provider errors") {
    Observation o = obs_with({"couch"});
    CHECK_THROWS_AS(client.score("ERR500", o), ProviderError);
    CHECK_THROWS_AS(client.score("BADJSON", o), ProviderError);
    CHECK_THROWS_AS(client.score("ZERO", o), ProviderError);
  }

  SECTION("concurrent scoring is consistent") {
    Observation o = obs_with({"mirror"});
    double expect = client.score("find the mirror", o);
    std::vector<std::thread> workers;
    std::vector<double> got(4, 0.0);
    for (int i = 0; i < 4; ++i)
      workers.emplace_back([&, i] { got[i] = client.score("find the mirror", o); });
    for (auto& w : workers) w.join();
    for (double g : got) CHECK(g == expect);
  }

  srv.stop();
  server_thread.join();

  SECTION("unreachable endpoint raises a provider error") {
    RemoteEmbeddingConfig bad;
    bad.endpoint = "http://127.0.0.1:1";
    bad.timeout_s = 0.5;
    RemoteEmbeddingClient c2(bad);
    CHECK_THROWS_AS(c2.score("hello", obs_with({})), ProviderError);
  }
}
