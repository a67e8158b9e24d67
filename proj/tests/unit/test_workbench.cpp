#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <regex>

#include "fixtures.hpp"
#include "golden.hpp"
#include "groundlab/agreement.hpp"
#include "groundlab/config.hpp"
#include "groundlab/error.hpp"
#include "groundlab/import.hpp"
#include "groundlab/io.hpp"
#include "groundlab/render.hpp"

using namespace groundlab;
using nlohmann::json;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

void check_golden(const std::string& name, const std::string& actual) {
  const std::filesystem::path path = std::filesystem::path(GROUNDLAB_GOLDEN_DIR) / name;
  if (std::getenv("GROUNDLAB_UPDATE_GOLDEN")) write_file_atomic(path, actual);
  REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden file " << path);
  CHECK(read_file(path) == actual);
}

}  // namespace

TEST_CASE("gray fill maps color endpoints and rounds") {
  CHECK(gray_hex(0.0) == "#000000");
  CHECK(gray_hex(255.0) == "#ffffff");
  CHECK(gray_hex(255.9) == "#ffffff");
  CHECK(gray_hex(127.5) == "#808080");
  CHECK(gray_hex(-3.0) == "#000000");
}

TEST_CASE("view rendering draws outline dots and rings") {
  auto s = fixtures::fixed_scenario();
  s.entities[2].color = 0.0;
  s.entities[3].color = 255.0;
  const auto plain = render_view(s, Player::A);
  CHECK(count(plain, "<circle") == 1 + kViewSize);
  CHECK(count(plain, "stroke=\"#000000\"") == 1);
  CHECK(plain.find("fill=\"#000000\" data-entity=\"2\"") != std::string::npos);
  CHECK(plain.find("fill=\"#ffffff\" data-entity=\"3\"") != std::string::npos);
  CHECK(plain.find(highlight_palette()[0]) == std::string::npos);

  const auto ringed = render_view(s, Player::A, {{{3, 4}, "#e6194b"}, {{4}, "#3cb44b"}});
  CHECK(count(ringed, "<circle") == 1 + kViewSize + 3);
  CHECK(count(ringed, "stroke=\"#e6194b\"") == 2);
  CHECK(count(ringed, "stroke=\"#3cb44b\"") == 1);

  CHECK_THROWS_AS(render_view(s, Player::A, {{{8}, "#e6194b"}}), InvalidArgument);
  CHECK_THROWS_AS(render_view(s, Player::B, {{{0}, "#e6194b"}}), InvalidArgument);
}

TEST_CASE("dot radius is proportional to entity size") {
  const auto s = fixtures::fixed_scenario();
  const auto svg = render_view(s, Player::A);
  const std::regex dot(R"re(r="([0-9.]+)" fill="#[0-9a-f]{6}" data-entity="(\d+)")re");
  int seen = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), dot); it != std::sregex_iterator(); ++it) {
    const double r = std::stod((*it)[1]);
    const int id = std::stoi((*it)[2]);
    CHECK(std::abs(r - s.entity(id).size * 140.0) <= 0.005);
    ++seen;
  }
  CHECK(seen == kViewSize);
}

TEST_CASE("rendering is byte deterministic") {
  CHECK(fixtures::golden_scenario_svg() == fixtures::golden_scenario_svg());
  CHECK(fixtures::golden_dialogue_svg() == fixtures::golden_dialogue_svg());
}

TEST_CASE("golden scenario and dialogue renderings") {
  check_golden("scenario.svg", fixtures::golden_scenario_svg());
  check_golden("dialogue.svg", fixtures::golden_dialogue_svg());
}

TEST_CASE("dialogue rendering underlines spans and keys rings") {
  const auto s = fixtures::fixed_scenario();
  const std::vector<Message> msgs{{Player::A, {"i", "see", "a", "black", "dot"}}, {Player::B, {"no", "dots", "here"}}};

  const auto text_only = render_dialogue(s, msgs, {});
  CHECK(count(text_only, "<line") == 0);
  CHECK(count(text_only, "class=\"view\"") == 2);
  CHECK(count(text_only, "<text") == 2 + 2);

  const std::vector<RenderedMarkable> ms{{0, 2, 5, Player::A, {3}}, {1, 1, 2, Player::B, {}}};
  const auto svg = render_dialogue(s, msgs, ms);
  CHECK(count(svg, "<line") == 2);
  CHECK(count(svg, "stroke=\"" + highlight_palette()[0] + "\"") == 2);
  CHECK(count(svg, "stroke=\"" + highlight_palette()[1] + "\"") == 1);

  CHECK_THROWS_AS(render_dialogue(s, msgs, {{0, 3, 6, Player::A, {}}}), InvalidArgument);
  CHECK_THROWS_AS(render_dialogue(s, msgs, {{2, 0, 1, Player::A, {}}}), InvalidArgument);
  CHECK_THROWS_AS(render_dialogue(s, msgs, {{0, 1, 1, Player::A, {}}}), InvalidArgument);
  CHECK_THROWS_AS(render_dialogue(s, msgs, {{0, 0, 1, Player::A, {8}}}), InvalidArgument);
}

TEST_CASE("judgements render one panel each") {
  const auto c = fixtures::micro_corpus();
  const auto svg = render_judgements(c, "m1");
  CHECK(count(svg, "class=\"view\"") == 3);
  CHECK(svg.find(">x</text>") != std::string::npos);
  CHECK(svg.find(">z</text>") != std::string::npos);
  CHECK_THROWS_AS(render_judgements(c, "nope"), InvalidArgument);
}

TEST_CASE("text is escaped") {
  const auto s = fixtures::fixed_scenario();
  const auto svg = render_dialogue(s, {{Player::A, {"<b>", "&"}}}, {});
  CHECK(svg.find("&lt;b&gt; &amp;") != std::string::npos);
}

TEST_CASE("config files parse with version comments and typed getters") {
  const auto c = Config::parse("# experiment\nversion = 1\nmodel.hidden_dim = 64  # small\nname = run a\nflag = true\n");
  CHECK(c.get_int("model.hidden_dim", 0) == 64);
  CHECK(c.get_string("name", "") == "run a");
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_double("missing", 2.5) == 2.5);
  CHECK(Config::parse(c.dump()).values() == c.values());

  CHECK_THROWS_AS(Config::parse("a = 1\n"), SchemaError);
  CHECK_THROWS_AS(Config::parse("version = 2\n"), SchemaError);
  CHECK_THROWS_AS(Config::parse("version = 1\nbroken line\n"), SchemaError);
  CHECK_THROWS_AS(Config::parse("version = 1\na = 1\na = 2\n"), SchemaError);
  CHECK_THROWS_AS(Config::parse("").values(), SchemaError);
  const auto bad = Config::parse("version = 1\nn = 1x\n");
  CHECK_THROWS_AS(bad.get_int("n", 0), InvalidArgument);
  CHECK_THROWS_AS(bad.get_double("n", 0), InvalidArgument);
  CHECK_THROWS_AS(bad.get_bool("n", false), InvalidArgument);
}

TEST_CASE("character offsets map onto tokens") {
  const std::string text = "0: i see a black dot\n1: yes  it\n";
  const auto map = map_characters(text);
  REQUIRE(map.lines.size() == 2);
  const auto black = text.find("black dot");
  const auto loc = map.locate(black, black + 9);
  REQUIRE(loc);
  CHECK(*loc == std::array<int, 3>{0, 3, 5});
  const auto it = text.find("it");
  CHECK(*map.locate(it, it + 2) == std::array<int, 3>{1, 1, 2});
  CHECK_FALSE(map.locate(0, 2));
}

namespace {

json kb_entity(int id, double x, double y) {
  return {{"id", std::to_string(id)}, {"x", x}, {"y", y}, {"size", 10}, {"color", "rgb(" + std::to_string(id * 10) + "," + std::to_string(id * 10) + "," + std::to_string(id * 10) + ")"}};
}

json released_scenario() {
  json a = json::array(), b = json::array();
  for (int i = 0; i < 7; ++i) a.push_back(kb_entity(10 + i, 100 + 20 * i, 150 + 10 * i));
  for (int i = 2; i < 9; ++i) b.push_back(kb_entity(10 + i, 100 + 20 * i - 60, 150 + 10 * i + 30));
  return {{"uuid", "S_1"}, {"kbs", {a, b}}};
}

}  // namespace

TEST_CASE("released scenario import recovers the shared frame") {
  const auto s = import_scenario(released_scenario());
  CHECK(s.id == "S_1");
  CHECK(s.entities.size() == 9);
  CHECK(s.num_shared == 5);
  CHECK(s.shared_ids() == std::vector<int>{12, 13, 14, 15, 16});
  CHECK(s.view_b.center_x == doctest::Approx(60.0 / 200.0));
  CHECK(s.view_b.center_y == doctest::Approx(-(-30.0) / 200.0));
  const auto& e = s.entity(18);
  CHECK(e.x == doctest::Approx((100 + 160 - 215) / 200.0));
  CHECK(e.y == doctest::Approx(-(150 + 80 - 215) / 200.0));
  CHECK(e.size == doctest::Approx(10.0 / 200.0));
  CHECK(e.color == 180.0);
  for (const auto* v : {&s.view_a, &s.view_b}) {
    REQUIRE(v->visible.size() == 7);
    for (std::size_t i = 1; i < 7; ++i) CHECK(s.entity(v->visible[i - 1]).y <= s.entity(v->visible[i]).y);
  }
}

TEST_CASE("released files import into a valid corpus") {
  fixtures::TempDir dir;
  const json transcripts = json::array(
      {{{"uuid", "C_1"},
        {"scenario_uuid", "S_1"},
        {"scenario", released_scenario()},
        {"events",
         {{{"action", "message"}, {"agent", 0}, {"data", "I see a black dot"}},
          {{"action", "message"}, {"agent", 1}, {"data", "yes it"}},
          {{"action", "select"}, {"agent", 0}, {"data", "13"}},
          {{"action", "select"}, {"agent", 1}, {"data", "13"}}}}},
       {{"uuid", "C_2"},
        {"scenario", released_scenario()},
        {"events", {{{"action", "select"}, {"agent", 0}, {"data", "13"}}}}}});
  write_json(dir.path() / "final_transcripts.json", transcripts);

  const std::string text = "0: I see a black dot\n1: yes it\n";
  const auto p_black = text.find("a black dot");
  const auto p_it = text.find("it\n");
  const json markables = {
      {"C_1",
       {{"text", text},
        {"markables",
         {{{"markable_id", "M1"}, {"start", p_black}, {"end", p_black + 11}},
          {{"markable_id", "M1b"}, {"start", p_black + 2}, {"end", p_black + 7}},
          {{"markable_id", "M2"}, {"start", p_it}, {"end", p_it + 2}, {"no-referent", false}}}}}},
      {"C_9", {{"text", ""}, {"markables", json::array()}}}};
  write_json(dir.path() / "markable_annotation.json", markables);

  const json referents = {
      {"C_1",
       {{"M1",
         {{{"referents", {"agent_0_13"}}},
          {{"referents", {"agent_0_13", "agent_0_14"}}},
          {{"referents", {"agent_0_13"}}, {"ambiguous", true}}}},
        {"M2", {{{"referents", {"agent_1_13"}}}, {{"referents", {"agent_1_18"}}}, {{"referents", {"agent_1_10"}}},
                {{"referents", {"agent_1_13"}}}}}}}};
  write_json(dir.path() / "referent_annotation.json", referents);

  const auto result = import_released(dir.path());
  const auto& c = result.corpus;
  c.validate();
  CHECK(c.dialogues.size() == 1);
  CHECK(c.dialogues.at("C_1").outcome);
  CHECK(c.dialogues.at("C_1").messages()[0]->tokens == std::vector<std::string>{"i", "see", "a", "black", "dot"});
  REQUIRE(c.markables.size() == 2);
  const auto& m1 = c.markables.at("M1");
  CHECK(m1.utterance_index == 0);
  CHECK(m1.start_token == 2);
  CHECK(m1.end_token == 5);
  CHECK(c.markables.at("M2").speaker == Player::B);
  CHECK(c.judgements.size() == 6);
  CHECK(result.report.skipped.at("incomplete or invalid selections") == 1);
  CHECK(result.report.skipped.at("overlapping markable") == 1);
  CHECK(result.report.skipped.at("annotation for unknown dialogue") == 1);
  CHECK(result.report.skipped.at("referent outside the speaker's view") == 1);
  CHECK_FALSE(result.report.aggregated_only);
  CHECK(aggregate_gold(c, "M1").referents.count() == 1);
}
