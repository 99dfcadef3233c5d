#include <catch2/catch_amalgamated.hpp>

#include "seqnav/geometry.hpp"
#include "seqnav/rng.hpp"

using namespace seqnav;

TEST_CASE("apply_action basic moves") {
  Pose p0{0, 0, 0};
  Pose p1 = apply_action(p0, Action::FORWARD);
  CHECK(p1.x == 0.25);
  CHECK(p1.y == 0.0);
  CHECK(p1.heading == 0.0);

  Pose p2 = apply_action(Pose{1, 1, 0}, Action::TURN_LEFT);
  CHECK(p2 == Pose{1, 1, 15});

  Pose p3 = apply_action(Pose{3, 4, 90}, Action::STOP);
  CHECK(p3 == Pose{3, 4, 90});

  CHECK_THROWS_AS(apply_action(p0, Action::TURN_BACK_LAST_STEP), ContractViolation);
}

TEST_CASE("turn round-trip is exact on the 15-degree lattice") {
  // Headings reachable through the dynamics are multiples of 15 (start
  // headings are quantized); on that lattice +15/-15 round-trips bit-exactly.
  for (int k = 0; k < 24; ++k) {
    Pose p{1.375, -2.5, 15.0 * k};
    Pose back = apply_action(apply_action(p, Action::TURN_LEFT), Action::TURN_RIGHT);
    CHECK(back == p);
    Pose back2 = apply_action(apply_action(p, Action::TURN_RIGHT), Action::TURN_LEFT);
    CHECK(back2 == p);
  }
}

TEST_CASE("turn round-trip within 1e-12 for arbitrary headings") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    Pose p{0, 0, rng.uniform(0.0, 360.0)};
    Pose back = apply_action(apply_action(p, Action::TURN_LEFT), Action::TURN_RIGHT);
    CHECK(std::abs(back.heading - p.heading) < 1e-12);
  }
}

TEST_CASE("24 left turns return the original heading") {
  Pose p{0.5, 0.25, 45.0};
  Pose q = p;
  for (int i = 0; i < 24; ++i) q = apply_action(q, Action::TURN_LEFT);
  CHECK(q == p);
}

TEST_CASE("normalize_heading wraps into [0,360)") {
  CHECK(normalize_heading(360.0) == 0.0);
  CHECK(normalize_heading(-15.0) == 345.0);
  CHECK(normalize_heading(725.0) == 5.0);
  CHECK(normalize_heading(0.0) == 0.0);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    double h = normalize_heading(rng.uniform(-4000.0, 4000.0));
    CHECK(h >= 0.0);
    CHECK(h < 360.0);
  }
}

TEST_CASE("heading_vector is exact on the axes") {
  CHECK(heading_vector(0.0) == Vec2{1, 0});
  CHECK(heading_vector(90.0) == Vec2{0, 1});
  CHECK(heading_vector(180.0) == Vec2{-1, 0});
  CHECK(heading_vector(270.0) == Vec2{0, -1});
  CHECK(heading_vector(450.0) == Vec2{0, 1});
  for (int k = 0; k < 24; ++k) {
    Vec2 v = heading_vector(15.0 * k);
    CHECK(std::abs(norm(v) - 1.0) < 1e-15);
  }
}

TEST_CASE("path_length") {
  CHECK(path_length({{0, 0}}) == 0.0);
  CHECK(path_length({{0, 0}, {3, 4}}) == 5.0);
  CHECK(path_length({{0, 0}, {1, 0}, {1, 1}}) == 2.0);
  CHECK_THROWS_AS(path_length({}), ContractViolation);
}

TEST_CASE("path_length is rigid-motion invariant") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Path p;
    int n = 2 + rng.below(8);
    for (int i = 0; i < n; ++i) p.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    double base = path_length(p);

    double a = rng.uniform(0, 6.28318);
    double c = std::cos(a), s = std::sin(a);
    Vec2 t{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    Path q;
    for (auto v : p) q.push_back({c * v.x - s * v.y + t.x, s * v.x + c * v.y + t.y});
    CHECK(std::abs(path_length(q) - base) < 1e-9);
  }
}

TEST_CASE("euclidean basics and triangle inequality") {
  CHECK(euclidean({0, 0}, {0, 0}) == 0.0);
  CHECK(euclidean({0, 0}, {1, 0}) == 1.0);
  CHECK(euclidean({1, 2}, {4, 6}) == 5.0);

  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    Vec2 a{rng.uniform(-9, 9), rng.uniform(-9, 9)};
    Vec2 b{rng.uniform(-9, 9), rng.uniform(-9, 9)};
    Vec2 c{rng.uniform(-9, 9), rng.uniform(-9, 9)};
    CHECK(euclidean(a, c) <= euclidean(a, b) + euclidean(b, c) + 1e-12);
    CHECK(euclidean(a, b) == euclidean(b, a));
  }
}

TEST_CASE("rng determinism and ranges") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    auto va = a.next_u64();
    all_equal = all_equal && (va == b.next_u64());
    any_diff = any_diff || (va != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    int v = r.below(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
  CHECK_THROWS_AS(r.below(0), ContractViolation);
}

TEST_CASE("gaussian sanity and truncation") {
  Rng r(2024);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double g = r.gaussian();
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);

  for (int i = 0; i < 5000; ++i) {
    double t = r.truncated_gaussian(0.02);
    CHECK(t >= -0.06);
    CHECK(t <= 0.06);
  }
  CHECK(r.truncated_gaussian(0.0) == 0.0);
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  // Order sensitivity of the u64 fold.
  CHECK(fnv1a64_u64(1, fnv1a64_u64(2)) != fnv1a64_u64(2, fnv1a64_u64(1)));
}
