#include <doctest.h>

#include <cmath>
#include <set>

#include "groundlab/error.hpp"
#include "groundlab/scenario.hpp"

using namespace groundlab;

namespace {

double min_pairwise_distance(const Scenario& s) {
  double best = 1e9;
  for (std::size_t i = 0; i < s.entities.size(); ++i)
    for (std::size_t j = i + 1; j < s.entities.size(); ++j)
      best = std::min(best, std::hypot(s.entities[i].x - s.entities[j].x, s.entities[i].y - s.entities[j].y));
  return best;
}

std::size_t intersection(const Scenario& s) {
  std::set<int> a(s.view_a.visible.begin(), s.view_a.visible.end());
  std::size_t n = 0;
  for (int id : s.view_b.visible) n += a.count(id);
  return n;
}

}  // namespace

TEST_CASE("generated scenario has the requested shared count") {
  ScenarioConfig cfg;
  Rng rng(11);
  const auto s = generate_scenario(cfg, 4, rng, "s4");
  CHECK(s.view_a.visible.size() == 7);
  CHECK(s.view_b.visible.size() == 7);
  CHECK(intersection(s) == 4);
  CHECK(s.entities.size() == 10);
  CHECK_NOTHROW(validate_scenario(s, cfg));
}

TEST_CASE("generation is deterministic given the seed") {
  ScenarioConfig cfg;
  Rng r1(99), r2(99);
  const auto a = generate_scenario(cfg, 6, r1, "x");
  const auto b = generate_scenario(cfg, 6, r2, "x");
  CHECK(a == b);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("every sample honors separation, containment and shared count") {
  ScenarioConfig cfg;
  for (int k = 4; k <= 6; ++k) {
    Rng rng(static_cast<std::uint64_t>(1000 + k));
    for (int i = 0; i < 1000; ++i) {
      const auto s = generate_scenario(cfg, k, rng);
      REQUIRE(intersection(s) == static_cast<std::size_t>(k));
      REQUIRE(min_pairwise_distance(s) >= cfg.min_separation);
      for (const View* v : {&s.view_a, &s.view_b})
        for (int id : v->visible) {
          const auto& e = s.entity(id);
          REQUIRE(std::hypot(e.x - v->center_x, e.y - v->center_y) + e.size <= v->radius + 1e-12);
        }
      // private entities stay out of the other view
      for (const auto& e : s.entities) {
        const bool in_a = s.view_a.index_of(e.id) >= 0, in_b = s.view_b.index_of(e.id) >= 0;
        REQUIRE((in_a || in_b));
      }
    }
  }
}

TEST_CASE("views are ordered by (y, x)") {
  ScenarioConfig cfg;
  Rng rng(5);
  const auto s = generate_scenario(cfg, 5, rng);
  for (const View* v : {&s.view_a, &s.view_b})
    for (std::size_t i = 1; i < v->visible.size(); ++i) {
      const auto& p = s.entity(v->visible[i - 1]);
      const auto& q = s.entity(v->visible[i]);
      CHECK((p.y < q.y || (p.y == q.y && p.x < q.x)));
    }
}

TEST_CASE("num_shared outside 4..6 is rejected") {
  ScenarioConfig cfg;
  Rng rng(1);
  CHECK_THROWS_AS(generate_scenario(cfg, 3, rng), InvalidArgument);
  CHECK_THROWS_AS(generate_scenario(cfg, 7, rng), InvalidArgument);
}

TEST_CASE("exhausted attempts raise a generation error") {
  ScenarioConfig cfg;
  cfg.min_separation = 0.9;
  cfg.max_attempts = 50;
  Rng rng(3);
  CHECK_THROWS_AS(generate_scenario(cfg, 6, rng), GenerationError);
}

TEST_CASE("normalize_entity maps onto [-1, 1]") {
  View v{Player::A, 0.5, -0.25, 2.0, {7}};
  SUBCASE("center") {
    Entity e{7, 0.5, -0.25, 0.04, 128.0};
    const auto n = normalize_entity(e, v);
    CHECK(n.x == doctest::Approx(0.0));
    CHECK(n.y == doctest::Approx(0.0));
    CHECK(n.color == doctest::Approx(0.0));
  }
  SUBCASE("half radius east") {
    Entity e{7, 0.5 + 1.0, -0.25, 0.04, 0.0};
    const auto n = normalize_entity(e, v);
    CHECK(n.x == doctest::Approx(0.5));
    CHECK(n.y == doctest::Approx(0.0));
  }
  SUBCASE("color endpoints") {
    CHECK(normalize_entity({7, 0, 0, 0.02, 0.0}, v).color == doctest::Approx(-1.0));
    CHECK(normalize_entity({7, 0, 0, 0.06, 256.0}, v).color == doctest::Approx(1.0));
    CHECK(normalize_entity({7, 0, 0, 0.02, 0.0}, v).size == doctest::Approx(-1.0));
    CHECK(normalize_entity({7, 0, 0, 0.06, 0.0}, v).size == doctest::Approx(1.0));
  }
  SUBCASE("entity outside the view") {
    CHECK_THROWS_AS(normalize_entity({3, 0, 0, 0.02, 0.0}, v), InvalidArgument);
  }
}

TEST_CASE("normalization inverts exactly") {
  ScenarioConfig cfg;
  Rng rng(8);
  const auto s = generate_scenario(cfg, 4, rng);
  for (int id : s.view_b.visible) {
    const auto& e = s.entity(id);
    const auto back = denormalize_entity(normalize_entity(e, s.view_b), s.view_b, id);
    CHECK(back.x == doctest::Approx(e.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(e.y).epsilon(1e-12));
    CHECK(back.size == doctest::Approx(e.size).epsilon(1e-12));
    CHECK(back.color == doctest::Approx(e.color).epsilon(1e-12));
  }
}

TEST_CASE("pair features") {
  View v{Player::A, 0.0, 0.0, 1.0, {0, 1, 2}};
  const Entity a{0, 0.0, 0.0, 0.04, 100.0};
  const Entity b{1, 0.3, 0.4, 0.05, 60.0};
  const Entity same{2, 0.0, 0.0, 0.04, 100.0};
  SUBCASE("identical attributes give zeros") {
    for (double f : pair_features(a, same, v)) CHECK(f == doctest::Approx(0.0));
  }
  SUBCASE("3-4-5 distance") { CHECK(pair_features(a, b, v)[2] == doctest::Approx(0.5)); }
  SUBCASE("antisymmetric except distance") {
    const auto ab = pair_features(a, b, v);
    const auto ba = pair_features(b, a, v);
    CHECK(ab[0] == doctest::Approx(-ba[0]));
    CHECK(ab[1] == doctest::Approx(-ba[1]));
    CHECK(ab[2] == doctest::Approx(ba[2]));
    CHECK(ab[3] == doctest::Approx(-ba[3]));
    CHECK(ab[4] == doctest::Approx(-ba[4]));
  }
  SUBCASE("same entity is an error") { CHECK_THROWS_AS(pair_features(a, a, v), InvalidArgument); }
}

TEST_CASE("scenario JSON round-trips") {
  ScenarioConfig cfg;
  Rng rng(21);
  const auto s = generate_scenario(cfg, 5, rng, "rt");
  const auto j = to_json(s);
  CHECK(scenario_from_json(nlohmann::json::parse(j.dump())) == s);
  CHECK(j.contains("views"));
  CHECK(j["views"]["A"].contains("center"));
  CHECK(j["views"]["B"]["visible"].size() == 7);
}
