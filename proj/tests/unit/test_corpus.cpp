#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "groundlab/agreement.hpp"
#include "groundlab/corpus.hpp"
#include "groundlab/error.hpp"
#include "groundlab/io.hpp"
#include "groundlab/synthetic.hpp"

using namespace groundlab;

TEST_CASE("micro corpus validates") {
  auto c = fixtures::micro_corpus();
  CHECK_NOTHROW(c.validate());
  CHECK(c.vocabulary().at("see") == 2);
  CHECK(c.markables_of("d0") == std::vector<std::string>{"m1", "m2", "m3"});
}

TEST_CASE("empty corpus files load as an empty corpus") {
  fixtures::TempDir dir;
  for (const char* f : {"scenarios.json", "dialogues.json", "markables.json", "judgements.json"})
    write_file_atomic(dir.path() / f, "[]");
  const auto c = load_corpus(dir.path());
  CHECK(c.dialogues.empty());
  CHECK(c.markables.empty());
  CHECK(c.judgements.empty());
}

TEST_CASE("integrity errors name the offending markable") {
  auto c = fixtures::micro_corpus();
  SUBCASE("end before start") {
    c.markables.at("m3").end_token = 3;
    c.reindex();
    try {
      c.validate();
      FAIL("expected an integrity error");
    } catch (const IntegrityError& e) {
      CHECK(std::string(e.what()).find("m3") != std::string::npos);
    }
  }
  SUBCASE("overlap") {
    c.markables.emplace("m4", Markable{"m4", "d0", 0, 4, 6, Player::A, {}, std::nullopt, std::nullopt});
    c.reindex();
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("nesting") {
    c.markables.emplace("m4", Markable{"m4", "d0", 0, 3, 4, Player::A, {}, std::nullopt, std::nullopt});
    c.reindex();
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("speaker mismatch") {
    c.markables.at("m3").speaker = Player::A;
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("two flags") {
    c.markables.at("m1").flags = {true, true, false};
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("cross-utterance link") {
    c.markables.at("m3").anaphora_of = "m1";
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("referent outside the speaker view") {
    c.judgements[3].referents = {0};  // m3 is spoken by B, who cannot see entity 0
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("too few judgements") {
    c.judgements.pop_back();
    c.reindex();
    CHECK_THROWS_AS(c.validate(), IntegrityError);
    CHECK_NOTHROW(c.validate({.min_judgements = 2}));
  }
  SUBCASE("dangling scenario") {
    c.dialogues.at("d0").scenario_id = "nope";
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
  SUBCASE("outcome disagrees with selections") {
    c.dialogues.at("d0").outcome = false;
    CHECK_THROWS_AS(c.validate(), IntegrityError);
  }
}

TEST_CASE("schema errors on malformed fields") {
  fixtures::TempDir dir;
  save_corpus(fixtures::micro_corpus(), dir.path());
  auto j = read_json(dir.path() / "markables.json");
  j[0]["start_token"] = "two";
  write_json(dir.path() / "markables.json", j);
  CHECK_THROWS_AS(load_corpus(dir.path()), SchemaError);
}

TEST_CASE("save/load round-trips random corpora") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    SyntheticConfig cfg;
    cfg.dialogues = 15;
    cfg.seed = seed;
    cfg.span_annotated_fraction = 0.5;
    const auto c = synthesize_corpus(cfg);
    fixtures::TempDir dir;
    save_corpus(c, dir.path());
    const auto back = load_corpus(dir.path());
    CHECK(back == c);
    CHECK(back.vocabulary() == c.vocabulary());
  }
}

TEST_CASE("propagation rules") {
  auto c = fixtures::micro_corpus();
  GoldMap manual;
  manual["m1"] = GoldReferent{mask_from_ids(c.scenarios.at("s0").view_a, {3}), false, GoldSource::Majority};
  manual["m3"] = GoldReferent{mask_from_ids(c.scenarios.at("s0").view_b, {3}), false, GoldSource::Majority};

  SUBCASE("anaphora copies its antecedent") {
    const auto g = propagate_auto_referents(c, manual);
    CHECK(g.at("m2").referents == g.at("m1").referents);
    CHECK(g.at("m2").source == GoldSource::Anaphora);
  }
  SUBCASE("no-referent and all-referents") {
    c.markables.at("m3").flags.no_referent = true;
    c.markables.at("m1").flags.all_referents = true;
    const auto g = propagate_auto_referents(c, manual);
    CHECK(g.at("m3").referents.none());
    CHECK(g.at("m1").referents.all());
    CHECK(g.at("m2").referents.all());
  }
  SUBCASE("transitive chain") {
    // m5 -> m4 -> m1 within utterance 0
    auto& d = c.dialogues.at("d0");
    std::get<Message>(d.events[0]).tokens = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"};
    c.markables.emplace("m4", Markable{"m4", "d0", 0, 8, 9, Player::A, {}, std::string("m2"), std::nullopt});
    c.markables.emplace("m5", Markable{"m5", "d0", 0, 10, 11, Player::A, {}, std::string("m4"), std::nullopt});
    c.reindex();
    manual["m1"].referents = mask_from_ids(c.scenarios.at("s0").view_a, {1, 2});
    const auto g = propagate_auto_referents(c, manual);
    CHECK(ids_from_mask(c.scenarios.at("s0").view_a, g.at("m5").referents) == std::vector<int>{1, 2});
  }
  SUBCASE("generic markables are excluded") {
    c.markables.at("m3").flags.generic = true;
    const auto g = propagate_auto_referents(c, manual);
    CHECK(g.count("m3") == 0);
  }
  SUBCASE("cycle") {
    c.markables.at("m1").cataphora_of = "m2";
    CHECK_THROWS_AS(propagate_auto_referents(c, manual), IntegrityError);
  }
  SUBCASE("link to generic") {
    c.markables.at("m1").flags.generic = true;
    CHECK_THROWS_AS(propagate_auto_referents(c, manual), IntegrityError);
  }
  SUBCASE("idempotent") {
    const auto once = propagate_auto_referents(c, manual);
    CHECK(propagate_auto_referents(c, once) == once);
  }
}

TEST_CASE("corpus-wide invariants on a synthetic corpus") {
  SyntheticConfig cfg;
  cfg.dialogues = 200;
  cfg.seed = 17;
  const auto c = synthesize_corpus(cfg);
  CHECK_NOTHROW(c.validate());
  for (const auto& j : c.judgements) {
    const auto& view = c.speaker_view(c.markables.at(j.markable_id));
    for (int e : j.referents) CHECK(view.index_of(e) >= 0);
  }
  for (const auto& [did, d] : c.dialogues) {
    const auto& ids = c.markables_of(did);
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const auto& x = c.markables.at(ids[a]);
        const auto& y = c.markables.at(ids[b]);
        if (x.utterance_index != y.utterance_index) continue;
        CHECK((x.end_token <= y.start_token || y.end_token <= x.start_token));
      }
  }
  const auto gold = build_gold(c);
  CHECK(propagate_auto_referents(c, gold) == gold);
}

TEST_CASE("corpus statistics") {
  auto c = fixtures::micro_corpus();
  const auto s = corpus_stats(c);
  CHECK(s.markables == 3);
  CHECK(s.anaphora == 1);
  CHECK(s.manual_markables == 2);
  CHECK(s.judged_markables == 2);
  CHECK(s.judgements == 6);
  CHECK(s.unidentifiable_pct == doctest::Approx(100.0 / 6.0));
  CHECK(s.manual_markables == s.markables - s.all_referents - s.no_referent - s.anaphora - s.cataphora);
}

TEST_CASE("published markable category counts are consistent") {
  CHECK(40172 - 128 - 1149 - 4548 - 6 == 34341);
}

TEST_CASE("split sizes") {
  auto make = [](int n) {
    SyntheticConfig cfg;
    cfg.dialogues = n;
    cfg.seed = 4;
    return synthesize_corpus(cfg);
  };
  SUBCASE("N = 10") {
    const auto sp = split_dataset(make(10), 1);
    CHECK(sp.train.size() == 8);
    CHECK(sp.valid.size() == 1);
    CHECK(sp.test.size() == 1);
  }
  SUBCASE("N = 5191 arithmetic") {
    CHECK(5191 / 10 == 519);
    CHECK(5191 - 2 * 519 == 4153);
  }
  SUBCASE("deterministic and disjoint") {
    const auto c = make(57);
    const auto a = split_dataset(c, 9);
    const auto b = split_dataset(c, 9);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    std::set<std::string> all(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 57);
    CHECK(a.valid.size() == 5);
    CHECK(a.train.size() == 47);
    CHECK(split_dataset(c, 10).train != a.train);
  }
  SUBCASE("too small") { CHECK_THROWS_AS(split_dataset(make(9), 1), InvalidArgument); }
}
