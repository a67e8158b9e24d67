#include "groundlab/import.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"

namespace groundlab {

namespace {

using nlohmann::json;

int parse_id(const json& v) {
  if (v.is_number_integer()) return v.get<int>();
  const auto s = v.get<std::string>();
  std::size_t used = 0;
  const int id = std::stoi(s, &used);
  if (used != s.size()) throw SchemaError("entity id is not an integer: " + s);
  return id;
}

double parse_color(const json& v) {
  if (v.is_number()) return v.get<double>();
  const auto s = v.get<std::string>();
  const auto open = s.find('(');
  if (open == std::string::npos) throw SchemaError("unrecognized color " + s);
  return std::stod(s.substr(open + 1));
}

int parse_referent(const std::string& s) {
  const auto pos = s.rfind('_');
  return std::stoi(pos == std::string::npos ? s : s.substr(pos + 1));
}

Player parse_agent(const json& v) {
  const int a = v.is_string() ? std::stoi(v.get<std::string>()) : v.get<int>();
  if (a != 0 && a != 1) throw SchemaError("agent must be 0 or 1");
  return a == 0 ? Player::A : Player::B;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool flag(const json& m, const char* key) {
  const auto it = m.find(key);
  return it != m.end() && it->is_boolean() && it->get<bool>();
}

std::optional<std::string> link(const json& m, const char* key) {
  const auto it = m.find(key);
  if (it == m.end() || it->is_null() || it->is_boolean()) return std::nullopt;
  return it->get<std::string>();
}

ReferentJudgement judgement(const std::string& mid, const std::string& annotator, const json& j) {
  ReferentJudgement r;
  r.markable_id = mid;
  r.annotator_id = j.value("annotator", j.value("worker_id", annotator));
  for (const auto& ref : j.value("referents", json::array())) r.referents.push_back(parse_referent(ref.get<std::string>()));
  std::sort(r.referents.begin(), r.referents.end());
  r.referents.erase(std::unique(r.referents.begin(), r.referents.end()), r.referents.end());
  r.ambiguous = flag(j, "ambiguous");
  r.unidentifiable = flag(j, "unidentifiable");
  return r;
}

}  // namespace

json to_json(const ImportReport& r) {
  return {{"dialogues", r.dialogues},
          {"markables", r.markables},
          {"judgements", r.judgements},
          {"aggregated_only", r.aggregated_only},
          {"skipped", r.skipped}};
}

Scenario import_scenario(const json& scenario, const ImportOptions& options) {
  const auto& kbs = scenario.at("kbs");
  if (kbs.size() != 2) throw SchemaError("scenario must list two knowledge bases");
  struct Raw {
    int id;
    double x, y, size, color;
  };
  std::vector<Raw> raw[2];
  for (int p = 0; p < 2; ++p)
    for (const auto& e : kbs[static_cast<std::size_t>(p)])
      raw[p].push_back({parse_id(e.at("id")), e.at("x").get<double>(), e.at("y").get<double>(),
                        e.at("size").get<double>(), parse_color(e.at("color"))});

  double dx = 0.0, dy = 0.0;
  int shared = 0;
  for (const auto& b : raw[1])
    for (const auto& a : raw[0])
      if (a.id == b.id) {
        dx += a.x - b.x;
        dy += a.y - b.y;
        ++shared;
      }
  if (shared > 0) {
    dx /= shared;
    dy /= shared;
  }

  const double c = options.view_center_px, r = options.view_radius_px;
  Scenario s;
  s.id = scenario.value("uuid", std::string("scenario"));
  s.num_shared = shared;
  s.view_a = View{Player::A, 0.0, 0.0, 1.0, {}};
  s.view_b = View{Player::B, dx / r, -dy / r, 1.0, {}};
  std::set<int> seen;
  for (int p = 0; p < 2; ++p)
    for (const auto& e : raw[p]) {
      if (!seen.insert(e.id).second) continue;
      const double ox = p == 0 ? 0.0 : dx, oy = p == 0 ? 0.0 : dy;
      s.entities.push_back(Entity{e.id, (e.x + ox - c) / r, -(e.y + oy - c) / r, e.size / r, e.color});
    }
  std::sort(s.entities.begin(), s.entities.end(), [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (int p = 0; p < 2; ++p) {
    auto& view = p == 0 ? s.view_a : s.view_b;
    std::vector<Entity> vis;
    for (const auto& e : raw[p]) vis.push_back(s.entity(e.id));
    std::sort(vis.begin(), vis.end(), [](const Entity& a, const Entity& b) {
      if (a.y != b.y) return a.y < b.y;
      return a.x < b.x;
    });
    for (const auto& e : vis) view.visible.push_back(e.id);
  }
  return s;
}

CharTokenMap map_characters(const std::string& text) {
  CharTokenMap map;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    if (end > pos) {
      CharTokenMap::Line line;
      const auto colon = text.find(": ", pos);
      line.begin = colon != std::string::npos && colon < end ? colon + 2 : pos;
      std::size_t i = line.begin;
      while (i < end) {
        while (i < end && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const auto b = i;
        while (i < end && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > b) line.tokens.emplace_back(b, i);
      }
      map.lines.push_back(std::move(line));
    }
    pos = end + 1;
  }
  return map;
}

std::optional<std::array<int, 3>> CharTokenMap::locate(std::size_t begin, std::size_t end) const {
  for (std::size_t u = 0; u < lines.size(); ++u) {
    int first = -1, last = -1;
    for (std::size_t t = 0; t < lines[u].tokens.size(); ++t) {
      const auto [b, e] = lines[u].tokens[t];
      if (b < end && begin < e) {
        if (first < 0) first = static_cast<int>(t);
        last = static_cast<int>(t);
      }
    }
    if (first >= 0) return std::array<int, 3>{static_cast<int>(u), first, last + 1};
  }
  return std::nullopt;
}

ImportResult import_released(const std::filesystem::path& dir, const ImportOptions& options) {
  ImportResult out;
  auto& corpus = out.corpus;
  auto& report = out.report;
  auto skip = [&](const std::string& why) { ++report.skipped[why]; };

  const auto transcripts = read_json(dir / options.transcripts);
  for (const auto& chat : transcripts) {
    const auto did = chat.at("uuid").get<std::string>();
    Scenario sc;
    try {
      sc = import_scenario(chat.at("scenario"), options);
    } catch (const std::exception&) {
      skip("malformed scenario");
      continue;
    }
    if (sc.view_a.visible.size() != kViewSize || sc.view_b.visible.size() != kViewSize) {
      skip("view without 7 entities");
      continue;
    }
    Dialogue d;
    d.id = did;
    d.scenario_id = sc.id;
    bool ok = true;
    for (const auto& ev : chat.at("events")) {
      const auto action = ev.value("action", std::string());
      if (action == "message") {
        auto toks = tokenize(ev.at("data").get<std::string>());
        if (!toks.empty()) d.events.push_back(Message{parse_agent(ev.at("agent")), std::move(toks)});
      } else if (action == "select") {
        const auto who = parse_agent(ev.at("agent"));
        const int id = parse_id(ev.at("data"));
        if (sc.view(who).index_of(id) < 0) ok = false;
        d.events.push_back(Selection{who, id});
      }
    }
    const auto sa = d.selection(Player::A), sb = d.selection(Player::B);
    int selections = 0;
    for (const auto& e : d.events) selections += std::holds_alternative<Selection>(e) ? 1 : 0;
    if (!ok || !sa || !sb || selections != 2) {
      skip("incomplete or invalid selections");
      continue;
    }
    d.outcome = sa->entity_id == sb->entity_id;
    corpus.scenarios.emplace(sc.id, std::move(sc));
    corpus.dialogues.emplace(did, std::move(d));
  }

  if (std::filesystem::exists(dir / options.markables)) {
    const auto annotations = read_json(dir / options.markables);
    for (const auto& [did, ann] : annotations.items()) {
      const auto dit = corpus.dialogues.find(did);
      if (dit == corpus.dialogues.end()) {
        skip("annotation for unknown dialogue");
        continue;
      }
      const auto msgs = dit->second.messages();
      const auto cmap = map_characters(ann.value("text", std::string()));
      if (cmap.lines.size() != msgs.size()) {
        skip("annotation text does not match transcript");
        continue;
      }
      std::vector<Markable> ms;
      for (const auto& m : ann.value("markables", json::array())) {
        const auto loc = cmap.locate(m.at("start").get<std::size_t>(), m.at("end").get<std::size_t>());
        if (!loc) {
          skip("markable outside the text");
          continue;
        }
        const auto& msg = *msgs[static_cast<std::size_t>((*loc)[0])];
        if ((*loc)[2] > static_cast<int>(msg.tokens.size())) {
          skip("markable tokenization mismatch");
          continue;
        }
        Markable mk;
        mk.id = m.at("markable_id").get<std::string>();
        mk.dialogue_id = did;
        mk.utterance_index = (*loc)[0];
        mk.start_token = (*loc)[1];
        mk.end_token = (*loc)[2];
        mk.speaker = msg.speaker;
        mk.flags = {flag(m, "generic"), flag(m, "all-referents"), flag(m, "no-referent")};
        if (int(mk.flags.generic) + int(mk.flags.all_referents) + int(mk.flags.no_referent) > 1) {
          skip("markable with several flags");
          continue;
        }
        mk.anaphora_of = link(m, "anaphora");
        mk.cataphora_of = link(m, "cataphora");
        ms.push_back(std::move(mk));
      }
      std::sort(ms.begin(), ms.end(), [](const Markable& a, const Markable& b) {
        return std::tie(a.utterance_index, a.start_token, a.end_token) <
               std::tie(b.utterance_index, b.start_token, b.end_token);
      });
      std::map<std::string, Markable> kept;
      const Markable* prev = nullptr;
      for (auto& mk : ms) {
        if (prev && prev->utterance_index == mk.utterance_index && mk.start_token < prev->end_token) {
          skip("overlapping markable");
          continue;
        }
        if (corpus.markables.count(mk.id) || kept.count(mk.id)) {
          skip("duplicate markable id");
          continue;
        }
        prev = &kept.emplace(mk.id, mk).first->second;
      }
      for (auto& [id, mk] : kept) {
        for (auto* l : {&mk.anaphora_of, &mk.cataphora_of}) {
          if (!*l) continue;
          const auto lit = kept.find(**l);
          if (lit == kept.end() || lit->second.utterance_index != mk.utterance_index || **l == id) {
            skip("unrepresentable link");
            l->reset();
          }
        }
      }
      for (auto& [id, mk] : kept) corpus.markables.emplace(id, std::move(mk));
    }
  } else {
    skip("missing markable file");
  }

  auto add_judgements = [&](const json& by_dialogue, bool aggregated) {
    for (const auto& [did, by_markable] : by_dialogue.items()) {
      for (const auto& [mid, entry] : by_markable.items()) {
        const auto mit = corpus.markables.find(mid);
        if (mit == corpus.markables.end() || mit->second.dialogue_id != did) {
          skip("judgement for unknown markable");
          continue;
        }
        const auto& view = corpus.scenarios.at(corpus.dialogues.at(did).scenario_id).view(mit->second.speaker);
        const auto items = entry.is_array() ? entry : json::array({entry});
        for (std::size_t k = 0; k < items.size(); ++k) {
          auto j = judgement(mid, aggregated ? "aggregated" : "annotator_" + std::to_string(k), items[k]);
          if (std::any_of(j.referents.begin(), j.referents.end(), [&](int id) { return view.index_of(id) < 0; })) {
            skip("referent outside the speaker's view");
            continue;
          }
          corpus.judgements.push_back(std::move(j));
        }
      }
    }
  };
  if (std::filesystem::exists(dir / options.referents)) {
    add_judgements(read_json(dir / options.referents), false);
  } else if (std::filesystem::exists(dir / options.aggregated_referents)) {
    report.aggregated_only = true;
    add_judgements(read_json(dir / options.aggregated_referents), true);
  } else {
    skip("missing referent file");
  }

  corpus.reindex();
  report.dialogues = static_cast<std::int64_t>(corpus.dialogues.size());
  report.markables = static_cast<std::int64_t>(corpus.markables.size());
  report.judgements = static_cast<std::int64_t>(corpus.judgements.size());
  return out;
}

}  // namespace groundlab
