#include "groundlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "groundlab/error.hpp"

namespace groundlab {

std::string color_word(double color) {
  if (color < 64.0) return "black";
  if (color < 128.0) return "dark";
  if (color < 192.0) return "gray";
  return "light";
}

std::string size_word(double size, const ScenarioConfig& config) {
  const double third = (config.size_max - config.size_min) / 3.0;
  if (size < config.size_min + third) return "small";
  if (size < config.size_min + 2.0 * third) return "medium";
  return "large";
}

std::string location_word(const Entity& e, const View& view) {
  const double dy = (e.y - view.center_y) / view.radius;
  if (dy > 1.0 / 3.0) return "top";
  if (dy < -1.0 / 3.0) return "bottom";
  return "middle";
}

int matching_slot(const Scenario& s, Player p, const Entity& e, const ScenarioConfig& config,
                  const std::string& location) {
  const auto& view = s.view(p);
  const auto cw = color_word(e.color);
  const auto sw = size_word(e.size, config);
  int best = -1;
  double best_gap = 1e9;
  for (std::size_t i = 0; i < view.visible.size(); ++i) {
    const auto& c = s.entity(view.visible[i]);
    if (color_word(c.color) != cw || size_word(c.size, config) != sw) continue;
    if (!location.empty() && location_word(c, view) != location) continue;
    const double gap = std::abs(c.color - e.color);
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

struct PendingMarkable {
  int utterance;
  int start, end;
  Player speaker;
  MarkableFlags flags;
  int anaphora_of = -1;  // index into the pending list
  std::vector<int> referents;
};

struct Script {
  std::vector<Event> events;
  std::vector<PendingMarkable> markables;
  bool success = false;
};

std::vector<std::string> split(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

Script play_script(const Scenario& s, const SyntheticConfig& cfg, Rng& rng) {
  Script script;
  int utterance = 0;
  auto say = [&](Player p, const std::vector<std::string>& tokens) {
    script.events.emplace_back(Message{p, tokens});
    return utterance++;
  };
  auto describe = [&](const Entity& e) {
    return std::vector<std::string>{"a", size_word(e.size, cfg.scenario), color_word(e.color), "dot"};
  };

  if (rng.uniform() < cfg.opener_rate) {
    if (rng.uniform() < 0.5) {
      const int u = say(Player::A, split("all my dots are spread out"));
      script.markables.push_back({u, 0, 3, Player::A, {false, true, false}, -1, {}});
    } else {
      const int u = say(Player::A, split("it is hard to tell small dots apart"));
      script.markables.push_back({u, 5, 7, Player::A, {true, false, false}, -1, {}});
    }
  }

  Player speaker = Player::A;
  std::vector<int> proposed[2];
  for (int round = 0; round < cfg.max_proposals; ++round) {
    const auto& view = s.view(speaker);
    std::vector<int> options;
    for (int id : view.visible)
      if (std::find(proposed[int(speaker)].begin(), proposed[int(speaker)].end(), id) == proposed[int(speaker)].end())
        options.push_back(id);
    if (options.empty()) break;
    const int candidate = options[rng.below(options.size())];
    proposed[int(speaker)].push_back(candidate);
    const auto& ce = s.entity(candidate);

    std::vector<std::string> toks;
    int desc_start;
    const bool after_reject = round > 0;
    if (after_reject) {
      toks = split("no , i do n't have that . i have");
      desc_start = static_cast<int>(toks.size());
    } else {
      toks = split("i have");
      desc_start = 2;
    }
    const auto d = describe(ce);
    toks.insert(toks.end(), d.begin(), d.end());
    const auto where = cfg.spatial_words ? location_word(ce, view) : std::string();
    if (!where.empty()) {
      for (const auto& t : split(where == "middle" ? "in the" : "on the")) toks.push_back(t);
      toks.push_back(where);
    }
    const bool anaphora = rng.uniform() < cfg.anaphora_rate;
    if (anaphora) {
      for (const auto& t : split(", do you see it ?")) toks.push_back(t);
    }
    const int u = say(speaker, toks);
    if (after_reject) script.markables.push_back({u, 6, 7, speaker, {false, false, true}, -1, {}});
    const int desc_index = static_cast<int>(script.markables.size());
    script.markables.push_back({u, desc_start, desc_start + 4, speaker, {}, -1, {candidate}});
    if (anaphora) {
      const int it = static_cast<int>(toks.size()) - 2;
      script.markables.push_back({u, it, it + 1, speaker, {}, desc_index, {candidate}});
    }

    const Player listener = other(speaker);
    const int slot = matching_slot(s, listener, ce, cfg.scenario, where);
    if (slot >= 0) {
      const int match = s.view(listener).visible[static_cast<std::size_t>(slot)];
      const int v = say(listener, split("yes , i see it . let 's pick it"));
      const int first_it = static_cast<int>(script.markables.size());
      script.markables.push_back({v, 4, 5, listener, {}, -1, {match}});
      script.markables.push_back({v, 9, 10, listener, {}, first_it, {match}});
      // the proposer selects first, then the listener
      script.events.emplace_back(Selection{speaker, candidate});
      script.events.emplace_back(Selection{listener, match});
      script.success = match == candidate;
      return script;
    }
    speaker = listener;
  }
  return script;
}

void add_judgements(AnnotatedCorpus& c, const Markable& m, const std::vector<int>& gold, const View& view,
                    const SyntheticConfig& cfg, Rng& rng) {
  for (int a = 0; a < cfg.judgements_per_markable; ++a) {
    ReferentJudgement j;
    j.markable_id = m.id;
    j.annotator_id = "ann" + std::to_string(rng.below(40));
    std::vector<int> refs = gold;
    if (rng.uniform() < cfg.unidentifiable_rate) {
      j.unidentifiable = true;
      refs.clear();
    } else {
      if (rng.uniform() < cfg.ambiguous_rate) {
        j.ambiguous = true;
        refs.push_back(view.visible[rng.below(view.visible.size())]);
      }
      if (rng.uniform() < cfg.extra_referent_rate) refs.push_back(view.visible[rng.below(view.visible.size())]);
      if (!refs.empty() && rng.uniform() < cfg.missing_referent_rate) refs.erase(refs.begin() + static_cast<long>(rng.below(refs.size())));
    }
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    j.referents = refs;
    c.judgements.push_back(std::move(j));
  }
}

}  // namespace

AnnotatedCorpus synthesize_corpus(const SyntheticConfig& config) {
  if (config.dialogues < 0) throw InvalidArgument("dialogue count must be non-negative");
  AnnotatedCorpus c;
  Rng rng(config.seed);
  for (int n = 0; n < config.dialogues; ++n) {
    const int k = 4 + static_cast<int>(rng.below(3));
    char id[32];
    std::snprintf(id, sizeof id, "d%05d", n);
    Script script;
    Scenario scenario;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw GenerationError("synthetic dialogue " + std::string(id) + " never succeeded");
      scenario = generate_scenario(config.scenario, k, rng, std::string("s") + (id + 1));
      script = play_script(scenario, config, rng);
      if (script.success) break;
    }
    Dialogue d;
    d.id = id;
    d.scenario_id = scenario.id;
    d.events = script.events;
    d.outcome = true;

    std::vector<std::string> ids;
    for (std::size_t i = 0; i < script.markables.size(); ++i) ids.push_back(d.id + "_m" + std::to_string(i));
    for (std::size_t i = 0; i < script.markables.size(); ++i) {
      const auto& p = script.markables[i];
      Markable m;
      m.id = ids[i];
      m.dialogue_id = d.id;
      m.utterance_index = p.utterance;
      m.start_token = p.start;
      m.end_token = p.end;
      m.speaker = p.speaker;
      m.flags = p.flags;
      if (p.anaphora_of >= 0) m.anaphora_of = ids[static_cast<std::size_t>(p.anaphora_of)];
      if (!m.is_auto() && !m.flags.generic)
        add_judgements(c, m, p.referents, scenario.view(m.speaker), config, rng);
      c.markables.emplace(m.id, m);
    }

    if (rng.uniform() < config.span_annotated_fraction) {
      for (int a = 0; a < config.span_annotators; ++a) {
        SpanAnnotation sa;
        sa.annotator_id = "span" + std::to_string(a);
        sa.dialogue_id = d.id;
        for (const auto& p : script.markables) {
          if (rng.uniform() < 0.03) continue;
          TokenSpan sp{p.utterance, p.start, p.end};
          if (sp.end_token - sp.start_token > 1 && rng.uniform() < 0.05) ++sp.start_token;
          sa.spans.push_back(sp);
        }
        c.span_annotations.push_back(std::move(sa));
      }
    }
    c.scenarios.emplace(scenario.id, std::move(scenario));
    c.dialogues.emplace(d.id, std::move(d));
  }
  c.reindex();
  return c;
}

}  // namespace groundlab
