#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "groundlab/agreement.hpp"
#include "groundlab/error.hpp"
#include "groundlab/random.hpp"
#include "groundlab/synthetic.hpp"

using namespace groundlab;

namespace {

// Pairwise definition computed by enumerating ordered coder pairs.
struct Oracle {
  double ao, ae;
};

Oracle fleiss_oracle(const std::vector<std::vector<int>>& table) {
  double ao = 0.0;
  std::map<int, double> counts;
  double labels = 0.0;
  for (const auto& item : table) {
    double agree = 0.0, pairs = 0.0;
    for (std::size_t a = 0; a < item.size(); ++a)
      for (std::size_t b = 0; b < item.size(); ++b) {
        if (a == b) continue;
        pairs += 1.0;
        agree += item[a] == item[b];
      }
    ao += agree / pairs;
    for (int l : item) counts[l] += 1.0, labels += 1.0;
  }
  double ae = 0.0;
  for (const auto& [k, c] : counts) ae += (c / labels) * (c / labels);
  return {ao / static_cast<double>(table.size()), ae};
}

EntityMask mask(std::initializer_list<int> bits) {
  EntityMask m;
  for (int b : bits) m.set(static_cast<std::size_t>(b));
  return m;
}

}  // namespace

TEST_CASE("majority vote") {
  SUBCASE("worked example") {
    std::vector<JudgedMask> j{{mask({0, 1}), false}, {mask({0}), false}, {mask({0, 1}), false}};
    const auto g = aggregate_gold(j);
    CHECK(g.referents == mask({0, 1}));
    CHECK_FALSE(g.dropped);
  }
  SUBCASE("tie excludes") {
    std::vector<JudgedMask> j{{mask({2}), false}, {mask({}), false}};
    CHECK(aggregate_gold(j).referents.none());
  }
  SUBCASE("unidentifiable majority drops") {
    std::vector<JudgedMask> j{{mask({}), true}, {mask({}), true}, {mask({4}), false}};
    CHECK(aggregate_gold(j).dropped);
  }
  SUBCASE("random tables against per-entity counts") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = 1 + rng.below(6);
      std::vector<JudgedMask> j(n);
      for (auto& x : j) {
        x.referents = EntityMask(rng.below(128));
        x.unidentifiable = rng.uniform() < 0.2;
      }
      const auto g = aggregate_gold(j);
      std::size_t u = 0;
      for (const auto& x : j) u += x.unidentifiable;
      CHECK(g.dropped == (2 * u > n));
      for (std::size_t e = 0; e < kViewSize; ++e) {
        std::size_t c = 0;
        for (const auto& x : j) c += x.referents[e];
        CHECK(g.referents[e] == (!g.dropped && 2 * c > n));
      }
    }
  }
}

TEST_CASE("pairwise entity agreement") {
  auto p = pairwise_entity_agreement(mask({0, 1}), mask({0}));
  CHECK(p.agreement == doctest::Approx(6.0 / 7.0));
  CHECK_FALSE(p.exact);
  p = pairwise_entity_agreement(mask({}), mask({}));
  CHECK(p.agreement == 1.0);
  CHECK(p.exact);
  p = pairwise_entity_agreement(EntityMask().set(), EntityMask());
  CHECK(p.agreement == 0.0);

  const auto c = fixtures::micro_corpus();
  CHECK_THROWS_AS(pairwise_entity_agreement(c, c.judgements[0], c.judgements[3]), InvalidArgument);
  CHECK(pairwise_entity_agreement(c, c.judgements[0], c.judgements[2]).agreement == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("Fleiss multi-pi") {
  SUBCASE("worked example") {
    const auto r = fleiss_multi_pi({{1, 1, 0}, {0, 0, 0}});
    CHECK(r.observed == doctest::Approx(2.0 / 3.0));
    CHECK(r.expected == doctest::Approx(5.0 / 9.0));
    REQUIRE(r.multi_pi);
    CHECK(*r.multi_pi == doctest::Approx(0.25));
  }
  SUBCASE("all one category leaves pi undefined") {
    const auto r = fleiss_multi_pi({{1, 1}, {1, 1}});
    CHECK(r.observed == 1.0);
    CHECK_FALSE(r.multi_pi);
  }
  SUBCASE("single coder rejected") { CHECK_THROWS_AS(fleiss_multi_pi({{1, 0}, {1}}), InvalidArgument); }
  SUBCASE("random tables against pair enumeration") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::vector<int>> table(1 + rng.below(20));
      const int k = 2 + static_cast<int>(rng.below(4));
      for (auto& item : table) {
        item.resize(2 + rng.below(4));
        for (auto& l : item) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      }
      const auto o = fleiss_oracle(table);
      const auto r = fleiss_multi_pi(table);
      CHECK(std::abs(r.observed - o.ao) < 1e-12);
      CHECK(std::abs(r.expected - o.ae) < 1e-12);
      if (o.ae < 1.0) {
        REQUIRE(r.multi_pi);
        CHECK(std::abs(*r.multi_pi - (o.ao - o.ae) / (1.0 - o.ae)) < 1e-12);
        CHECK(*r.multi_pi <= 1.0 + 1e-12);
      }
    }
  }
  SUBCASE("identical labels give pi = 1") {
    const auto r = fleiss_multi_pi({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
    REQUIRE(r.multi_pi);
    CHECK(*r.multi_pi == doctest::Approx(1.0));
  }
}

TEST_CASE("referent agreement on the micro corpus") {
  const auto c = fixtures::micro_corpus();
  const auto r = referent_agreement(c);
  // Two manual markables x 7 entities of each speaker's view.
  CHECK(r.items == 14);
  std::vector<std::vector<int>> table;
  const auto& s = c.scenarios.at("s0");
  for (const auto& [mid, view] : std::vector<std::pair<std::string, const View*>>{{"m1", &s.view_a}, {"m3", &s.view_b}})
    for (int e : view->visible) {
      std::vector<int> item;
      for (const auto& j : c.judgements)
        if (j.markable_id == mid) item.push_back(std::count(j.referents.begin(), j.referents.end(), e) > 0);
      table.push_back(item);
    }
  const auto o = fleiss_oracle(table);
  CHECK(r.observed == doctest::Approx(o.ao));
  CHECK(r.expected == doctest::Approx(o.ae));
  // m1 exact pairs: x=y only -> 1/3; m3: x=y only -> 1/3.
  CHECK(r.exact_match == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("span agreement") {
  SUBCASE("two annotators on one 3-token utterance") {
    const auto r = span_agreement({{{0, 0, 1}}, {{0, 0, 2}}}, {3});
    CHECK(r.start.observed == doctest::Approx(1.0));
    // is-end labels: (1,0,0) vs (0,1,0); only the third token agrees.
    CHECK(r.end.observed == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("identical spans") {
    const auto r = span_agreement({{{0, 1, 3}, {1, 0, 1}}, {{0, 1, 3}, {1, 0, 1}}}, {4, 2});
    CHECK(r.start.observed == 1.0);
    CHECK(r.end.observed == 1.0);
    CHECK(r.start.items == 6);
  }
  SUBCASE("corpus-level") {
    SyntheticConfig cfg;
    cfg.dialogues = 40;
    cfg.seed = 2;
    cfg.span_annotated_fraction = 0.5;
    const auto c = synthesize_corpus(cfg);
    const auto r = span_agreement(c);
    CHECK(r.dialogues > 0);
    CHECK(r.start.observed > 0.5);
    CHECK(r.start.observed <= 1.0);
  }
}

TEST_CASE("agreement by referent count") {
  SyntheticConfig cfg;
  cfg.dialogues = 60;
  cfg.seed = 8;
  const auto c = synthesize_corpus(cfg);
  const auto rows = agreement_by_referent_count(c);
  double pct = 0.0;
  for (const auto& r : rows) {
    pct += r.judgement_pct;
    CHECK(r.exact <= r.agreement + 1e-12);
    CHECK(r.agreement <= 1.0);
  }
  CHECK(pct == doctest::Approx(100.0));
}

TEST_CASE("token correlation") {
  SUBCASE("perfect anti-correlation") {
    AnnotatedCorpus c;
    const auto s = fixtures::fixed_scenario();
    c.scenarios.emplace(s.id, s);
    Dialogue d;
    d.id = "d0";
    d.scenario_id = s.id;
    d.events = {Message{Player::A, {"the", "dot"}}, Message{Player::A, {"tiny", "dot"}},
                Message{Player::A, {"the", "dot"}}, Message{Player::A, {"tiny", "dot"}},
                Selection{Player::A, 3}, Selection{Player::B, 3}};
    d.outcome = true;
    c.dialogues.emplace(d.id, d);
    for (int u = 0; u < 4; ++u) {
      const std::string mid = "m" + std::to_string(u);
      c.markables.emplace(mid, Markable{mid, "d0", u, 0, 2, Player::A, {}, std::nullopt, std::nullopt});
      const bool exact = u % 2 == 0;
      c.judgements.push_back({mid, "x", {3}, false, false});
      c.judgements.push_back({mid, "y", exact ? std::vector<int>{3} : std::vector<int>{4}, false, false});
    }
    c.reindex();
    const auto r = token_exact_match_correlation(c, 1);
    const auto it = std::find_if(r.tokens.begin(), r.tokens.end(), [](const auto& t) { return t.token == "tiny"; });
    REQUIRE(it != r.tokens.end());
    CHECK(it->rho == doctest::Approx(-1.0));
    CHECK(it->markables == 2);
    CHECK(std::find(r.zero_variance.begin(), r.zero_variance.end(), "dot") != r.zero_variance.end());
    CHECK(r.tokens.front().rho <= r.tokens.back().rho);
  }
}

TEST_CASE("kernel density") {
  SUBCASE("single sample closed form") {
    KernelDensity k({128.0}, {Bandwidth::Rule::Fixed, 10.0});
    CHECK(k(128.0) == doctest::Approx(1.0 / (10.0 * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-12));
  }
  SUBCASE("integrates to one over the extended support") {
    Rng rng(5);
    std::vector<double> xs;
    for (int i = 0; i < 50; ++i) xs.push_back(rng.uniform(0.0, 256.0));
    KernelDensity k(xs);
    const auto [lo, hi] = k.extended_support();
    CHECK(std::abs(k.integrate(lo, hi) - 1.0) < 1e-3);
    CHECK(overlap_integral(k, k) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(k.curve().size() == 512);
  }
  SUBCASE("Silverman bandwidth") {
    const std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const double sd = std::sqrt(110.0 / 12.0);
    const double iqr = 7.75 - 3.25;
    CHECK(silverman_bandwidth(xs) == doctest::Approx(0.9 * std::min(sd, iqr / 1.34) * std::pow(10.0, -0.2)));
    const std::vector<double> same{3, 3, 3};
    CHECK_THROWS_AS(silverman_bandwidth(same), InvalidArgument);
    const std::vector<double> one{3};
    CHECK_THROWS_AS(silverman_bandwidth(one), InvalidArgument);
  }
  SUBCASE("disjoint densities barely overlap") {
    KernelDensity a({10.0, 12.0}, {Bandwidth::Rule::Fixed, 2.0});
    KernelDensity b({240.0, 245.0}, {Bandwidth::Rule::Fixed, 2.0});
    CHECK(overlap_integral(a, b) < 1e-6);
  }
}

TEST_CASE("color KDE from a synthetic corpus") {
  SyntheticConfig cfg;
  cfg.dialogues = 120;
  cfg.seed = 21;
  const auto c = synthesize_corpus(cfg);
  const auto gold = build_gold(c);
  const auto k = color_kde(c, gold, {"black", "light"});
  CHECK(k.at("black").samples().size() > 5);
  double mb = 0, ml = 0;
  for (double x : k.at("black").samples()) mb += x;
  for (double x : k.at("light").samples()) ml += x;
  CHECK(mb / k.at("black").samples().size() < ml / k.at("light").samples().size());
  CHECK_THROWS_AS(color_kde(c, gold, {"chartreuse"}), InvalidArgument);
}
