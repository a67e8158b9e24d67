#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "groundlab/corpus.hpp"
#include "groundlab/scenario.hpp"

namespace fixtures {

/// Scenario with fixed geometry: A sees 0..6, B sees 2..8 (five shared).
inline groundlab::Scenario fixed_scenario(const std::string& id = "s0") {
  using namespace groundlab;
  Scenario s;
  s.id = id;
  s.num_shared = 5;
  for (int i = 0; i < 9; ++i)
    s.entities.push_back(Entity{i, -0.5 + 0.12 * i, -0.3 + 0.09 * i, 0.02 + 0.004 * i, 20.0 + 25.0 * i});
  s.view_a = View{Player::A, -0.2, 0.0, 1.0, {0, 1, 2, 3, 4, 5, 6}};
  s.view_b = View{Player::B, 0.2, 0.0, 1.0, {2, 3, 4, 5, 6, 7, 8}};
  return s;
}

/// One dialogue: A says "i see a black dot and it is small", B "yes i see it".
inline groundlab::AnnotatedCorpus micro_corpus() {
  using namespace groundlab;
  AnnotatedCorpus c;
  const auto s = fixed_scenario();
  c.scenarios.emplace(s.id, s);
  Dialogue d;
  d.id = "d0";
  d.scenario_id = s.id;
  d.events = {Message{Player::A, {"i", "see", "a", "black", "dot", "and", "it", "is", "small"}},
              Message{Player::B, {"yes", "i", "see", "it"}}, Selection{Player::A, 3}, Selection{Player::B, 3}};
  d.outcome = true;
  c.dialogues.emplace(d.id, d);

  Markable m1{"m1", "d0", 0, 2, 5, Player::A, {}, std::nullopt, std::nullopt};
  Markable m2{"m2", "d0", 0, 6, 7, Player::A, {}, std::string("m1"), std::nullopt};
  Markable m3{"m3", "d0", 1, 3, 4, Player::B, {}, std::nullopt, std::nullopt};
  for (const auto& m : {m1, m2, m3}) c.markables.emplace(m.id, m);
  c.judgements = {{"m1", "x", {3}, false, false},    {"m1", "y", {3}, false, false},
                  {"m1", "z", {3, 4}, false, false}, {"m3", "x", {3}, false, false},
                  {"m3", "y", {3}, false, false},    {"m3", "z", {}, false, true}};
  c.reindex();
  return c;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("groundlab_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
