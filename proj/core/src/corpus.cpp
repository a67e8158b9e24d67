#include "groundlab/corpus.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "groundlab/error.hpp"
#include "groundlab/io.hpp"

namespace groundlab {

using nlohmann::json;

std::vector<const Message*> Dialogue::messages() const {
  std::vector<const Message*> out;
  for (const auto& e : events)
    if (const auto* m = std::get_if<Message>(&e)) out.push_back(m);
  return out;
}

std::optional<Selection> Dialogue::selection(Player p) const {
  for (const auto& e : events)
    if (const auto* s = std::get_if<Selection>(&e); s && s->speaker == p) return *s;
  return std::nullopt;
}

std::optional<Player> Dialogue::first_selector() const {
  for (const auto& e : events)
    if (const auto* s = std::get_if<Selection>(&e)) return s->speaker;
  return std::nullopt;
}

EntityMask mask_from_ids(const View& view, const std::vector<int>& ids) {
  EntityMask m;
  for (int id : ids) {
    const int slot = view.index_of(id);
    if (slot < 0)
      throw IntegrityError("entity " + std::to_string(id) + " is not visible to " + to_string(view.agent));
    m.set(static_cast<std::size_t>(slot));
  }
  return m;
}

std::vector<int> ids_from_mask(const View& view, EntityMask mask) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < view.visible.size(); ++i)
    if (mask.test(i)) ids.push_back(view.visible[i]);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void AnnotatedCorpus::reindex() {
  vocabulary_.clear();
  by_dialogue_.clear();
  by_markable_.clear();
  for (const auto& [id, d] : dialogues)
    for (const auto* m : d.messages())
      for (const auto& t : m->tokens) ++vocabulary_[t];
  for (const auto& [id, m] : markables) by_dialogue_[m.dialogue_id].push_back(id);
  for (auto& [did, ids] : by_dialogue_)
    std::sort(ids.begin(), ids.end(), [this](const std::string& a, const std::string& b) {
      const auto& ma = markables.at(a);
      const auto& mb = markables.at(b);
      return std::tie(ma.utterance_index, ma.start_token, a) < std::tie(mb.utterance_index, mb.start_token, b);
    });
  for (std::size_t i = 0; i < judgements.size(); ++i) by_markable_[judgements[i].markable_id].push_back(i);
}

const std::vector<std::string>& AnnotatedCorpus::markables_of(const std::string& dialogue_id) const {
  static const std::vector<std::string> empty;
  const auto it = by_dialogue_.find(dialogue_id);
  return it == by_dialogue_.end() ? empty : it->second;
}

const std::vector<std::size_t>& AnnotatedCorpus::judgements_of(const std::string& markable_id) const {
  static const std::vector<std::size_t> empty;
  const auto it = by_markable_.find(markable_id);
  return it == by_markable_.end() ? empty : it->second;
}

const Scenario& AnnotatedCorpus::scenario_of(const Dialogue& d) const {
  const auto it = scenarios.find(d.scenario_id);
  if (it == scenarios.end())
    throw IntegrityError("dialogue " + d.id + " references unknown scenario " + d.scenario_id);
  return it->second;
}

const View& AnnotatedCorpus::speaker_view(const Markable& m) const {
  return scenario_of(dialogues.at(m.dialogue_id)).view(m.speaker);
}

std::vector<std::string> AnnotatedCorpus::markable_tokens(const Markable& m) const {
  const auto msgs = dialogues.at(m.dialogue_id).messages();
  const auto& toks = msgs.at(static_cast<std::size_t>(m.utterance_index))->tokens;
  return {toks.begin() + m.start_token, toks.begin() + m.end_token};
}

void AnnotatedCorpus::validate(const ValidationOptions& options) const {
  for (const auto& [id, s] : scenarios) {
    if (id != s.id) throw IntegrityError("scenario key " + id + " does not match its id");
    for (const View* v : {&s.view_a, &s.view_b}) {
      if (v->visible.size() != static_cast<std::size_t>(kViewSize))
        throw IntegrityError("scenario " + id + ": view " + to_string(v->agent) + " does not hold 7 entities");
      for (int e : v->visible) s.entity(e);
    }
  }

  for (const auto& [id, d] : dialogues) {
    if (!scenarios.count(d.scenario_id))
      throw IntegrityError("dialogue " + id + " references unknown scenario " + d.scenario_id);
    const auto& sc = scenarios.at(d.scenario_id);
    int selections[2] = {0, 0};
    for (const auto& e : d.events)
      if (const auto* s = std::get_if<Selection>(&e)) {
        ++selections[static_cast<int>(s->speaker)];
        if (sc.view(s->speaker).index_of(s->entity_id) < 0)
          throw IntegrityError("dialogue " + id + ": " + to_string(s->speaker) + " selected entity " +
                               std::to_string(s->entity_id) + " outside its view");
      }
    if (selections[0] != 1 || selections[1] != 1)
      throw IntegrityError("dialogue " + id + " must have exactly one selection per speaker");
    const bool same = d.selection(Player::A)->entity_id == d.selection(Player::B)->entity_id;
    if (same != d.outcome) throw IntegrityError("dialogue " + id + ": outcome disagrees with selections");
  }

  for (const auto& [id, m] : markables) {
    auto fail = [&](const std::string& what) { throw IntegrityError("markable " + id + ": " + what); };
    if (id != m.id) fail("key does not match id");
    const auto dit = dialogues.find(m.dialogue_id);
    if (dit == dialogues.end()) fail("unknown dialogue " + m.dialogue_id);
    const auto msgs = dit->second.messages();
    if (m.utterance_index < 0 || m.utterance_index >= static_cast<int>(msgs.size()))
      fail("utterance index out of range");
    const auto& msg = *msgs[static_cast<std::size_t>(m.utterance_index)];
    if (!(0 <= m.start_token && m.start_token < m.end_token &&
          m.end_token <= static_cast<int>(msg.tokens.size())))
      fail("invalid token span [" + std::to_string(m.start_token) + ", " + std::to_string(m.end_token) + ")");
    if (m.speaker != msg.speaker) fail("speaker differs from utterance speaker");
    if (int(m.flags.generic) + int(m.flags.all_referents) + int(m.flags.no_referent) > 1)
      fail("more than one flag set");
    for (const auto* link : {&m.anaphora_of, &m.cataphora_of}) {
      if (!*link) continue;
      const auto lit = markables.find(**link);
      if (lit == markables.end()) fail("link to unknown markable " + **link);
      if (lit->second.dialogue_id != m.dialogue_id || lit->second.utterance_index != m.utterance_index)
        fail("link to " + **link + " leaves the utterance");
      if (**link == id) fail("self link");
    }
  }

  for (const auto& [did, ids] : by_dialogue_) {
    for (std::size_t i = 1; i < ids.size(); ++i) {
      const auto& prev = markables.at(ids[i - 1]);
      const auto& cur = markables.at(ids[i]);
      if (prev.utterance_index == cur.utterance_index && cur.start_token < prev.end_token)
        throw IntegrityError("markable " + cur.id + " overlaps markable " + prev.id);
    }
  }

  for (const auto& j : judgements) {
    const auto mit = markables.find(j.markable_id);
    if (mit == markables.end())
      throw IntegrityError("judgement by " + j.annotator_id + " references unknown markable " + j.markable_id);
    const auto& view = speaker_view(mit->second);
    std::set<int> seen;
    for (int e : j.referents) {
      if (view.index_of(e) < 0)
        throw IntegrityError("judgement on markable " + j.markable_id + " by " + j.annotator_id +
                             " names entity " + std::to_string(e) + " outside the speaker's view");
      if (!seen.insert(e).second)
        throw IntegrityError("judgement on markable " + j.markable_id + " repeats entity " + std::to_string(e));
    }
  }
  for (const auto& [mid, idx] : by_markable_)
    if (static_cast<int>(idx.size()) < options.min_judgements)
      throw IntegrityError("markable " + mid + " has " + std::to_string(idx.size()) + " judgements, fewer than " +
                           std::to_string(options.min_judgements));

  for (const auto& sa : span_annotations) {
    const auto dit = dialogues.find(sa.dialogue_id);
    if (dit == dialogues.end())
      throw IntegrityError("span annotation by " + sa.annotator_id + " references unknown dialogue " + sa.dialogue_id);
    const auto msgs = dit->second.messages();
    for (const auto& sp : sa.spans) {
      if (sp.utterance_index < 0 || sp.utterance_index >= static_cast<int>(msgs.size()) || sp.start_token < 0 ||
          sp.start_token >= sp.end_token ||
          sp.end_token > static_cast<int>(msgs[static_cast<std::size_t>(sp.utterance_index)]->tokens.size()))
        throw IntegrityError("span annotation by " + sa.annotator_id + " on " + sa.dialogue_id + " is out of range");
    }
  }
}

json to_json(const Dialogue& d) {
  json events = json::array();
  for (const auto& e : d.events) {
    if (const auto* m = std::get_if<Message>(&e))
      events.push_back({{"type", "message"}, {"speaker", to_string(m->speaker)}, {"tokens", m->tokens}});
    else {
      const auto& s = std::get<Selection>(e);
      events.push_back({{"type", "selection"}, {"speaker", to_string(s.speaker)}, {"entity_id", s.entity_id}});
    }
  }
  return {{"id", d.id}, {"scenario_id", d.scenario_id}, {"events", events}, {"outcome", d.outcome}};
}

json to_json(const Markable& m) {
  json j{{"id", m.id},
         {"dialogue_id", m.dialogue_id},
         {"utterance_index", m.utterance_index},
         {"start_token", m.start_token},
         {"end_token", m.end_token},
         {"speaker", to_string(m.speaker)},
         {"flags",
          {{"generic", m.flags.generic}, {"all_referents", m.flags.all_referents}, {"no_referent", m.flags.no_referent}}},
         {"anaphora_of", nullptr},
         {"cataphora_of", nullptr}};
  if (m.anaphora_of) j["anaphora_of"] = *m.anaphora_of;
  if (m.cataphora_of) j["cataphora_of"] = *m.cataphora_of;
  return j;
}

json to_json(const ReferentJudgement& j) {
  return {{"markable_id", j.markable_id},     {"annotator_id", j.annotator_id},
          {"referents", j.referents},         {"ambiguous", j.ambiguous},
          {"unidentifiable", j.unidentifiable}};
}

namespace {

template <typename F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw SchemaError("malformed " + what + ": " + e.what());
  }
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

Dialogue dialogue_from_json(const json& j) {
  const std::string label = "dialogue " + j.value("id", std::string("?"));
  return guarded(label, [&] {
    Dialogue d;
    d.id = j.at("id").get<std::string>();
    d.scenario_id = j.at("scenario_id").get<std::string>();
    d.outcome = j.at("outcome").get<bool>();
    for (const auto& e : j.at("events")) {
      const auto type = e.at("type").get<std::string>();
      const auto speaker = player_from_string(e.at("speaker").get<std::string>());
      if (type == "message")
        d.events.emplace_back(Message{speaker, e.at("tokens").get<std::vector<std::string>>()});
      else if (type == "selection")
        d.events.emplace_back(Selection{speaker, e.at("entity_id").get<int>()});
      else
        throw SchemaError(label + ": unknown event type '" + type + "'");
    }
    return d;
  });
}

Markable markable_from_json(const json& j) {
  const std::string label = "markable " + j.value("id", std::string("?"));
  return guarded(label, [&] {
    Markable m;
    m.id = j.at("id").get<std::string>();
    m.dialogue_id = j.at("dialogue_id").get<std::string>();
    m.utterance_index = j.at("utterance_index").get<int>();
    m.start_token = j.at("start_token").get<int>();
    m.end_token = j.at("end_token").get<int>();
    m.speaker = player_from_string(j.at("speaker").get<std::string>());
    const auto& f = j.at("flags");
    m.flags = {f.at("generic").get<bool>(), f.at("all_referents").get<bool>(), f.at("no_referent").get<bool>()};
    m.anaphora_of = optional_string(j, "anaphora_of");
    m.cataphora_of = optional_string(j, "cataphora_of");
    return m;
  });
}

ReferentJudgement judgement_from_json(const json& j) {
  return guarded("judgement on " + j.value("markable_id", std::string("?")), [&] {
    ReferentJudgement r;
    r.markable_id = j.at("markable_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.referents = j.at("referents").get<std::vector<int>>();
    std::sort(r.referents.begin(), r.referents.end());
    r.ambiguous = j.at("ambiguous").get<bool>();
    r.unidentifiable = j.at("unidentifiable").get<bool>();
    return r;
  });
}

AnnotatedCorpus load_corpus(const std::filesystem::path& dir, const ValidationOptions& options) {
  AnnotatedCorpus c;
  auto array_file = [&](const char* name) {
    const auto j = read_json(dir / name);
    if (!j.is_array()) throw SchemaError(std::string(name) + " must hold a JSON array");
    return j;
  };
  for (const auto& j : array_file("scenarios.json")) {
    auto s = scenario_from_json(j);
    const auto id = s.id;
    if (!c.scenarios.emplace(id, std::move(s)).second) throw IntegrityError("duplicate scenario id " + id);
  }
  for (const auto& j : array_file("dialogues.json")) {
    auto d = dialogue_from_json(j);
    const auto id = d.id;
    if (!c.dialogues.emplace(id, std::move(d)).second) throw IntegrityError("duplicate dialogue id " + id);
  }
  for (const auto& j : array_file("markables.json")) {
    auto m = markable_from_json(j);
    const auto id = m.id;
    if (!c.markables.emplace(id, std::move(m)).second) throw IntegrityError("duplicate markable id " + id);
  }
  for (const auto& j : array_file("judgements.json")) c.judgements.push_back(judgement_from_json(j));
  if (std::filesystem::exists(dir / "span_annotations.json")) {
    for (const auto& j : array_file("span_annotations.json")) {
      guarded("span annotation", [&] {
        SpanAnnotation sa;
        sa.annotator_id = j.at("annotator_id").get<std::string>();
        sa.dialogue_id = j.at("dialogue_id").get<std::string>();
        for (const auto& sp : j.at("spans"))
          sa.spans.push_back({sp.at("utterance_index").get<int>(), sp.at("start_token").get<int>(),
                              sp.at("end_token").get<int>()});
        c.span_annotations.push_back(std::move(sa));
        return 0;
      });
    }
  }
  c.reindex();
  c.validate(options);
  return c;
}

void save_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json scenarios = json::array(), dialogues = json::array(), markables = json::array(),
       judgements = json::array();
  for (const auto& [id, s] : corpus.scenarios) scenarios.push_back(to_json(s));
  for (const auto& [id, d] : corpus.dialogues) dialogues.push_back(to_json(d));
  for (const auto& [id, m] : corpus.markables) markables.push_back(to_json(m));
  for (const auto& j : corpus.judgements) judgements.push_back(to_json(j));
  write_json(dir / "scenarios.json", scenarios);
  write_json(dir / "dialogues.json", dialogues);
  write_json(dir / "markables.json", markables);
  write_json(dir / "judgements.json", judgements);
  if (!corpus.span_annotations.empty()) {
    json spans = json::array();
    for (const auto& sa : corpus.span_annotations) {
      json js = json::array();
      for (const auto& sp : sa.spans)
        js.push_back({{"utterance_index", sp.utterance_index}, {"start_token", sp.start_token},
                      {"end_token", sp.end_token}});
      spans.push_back({{"annotator_id", sa.annotator_id}, {"dialogue_id", sa.dialogue_id}, {"spans", js}});
    }
    write_json(dir / "span_annotations.json", spans);
  }
}

GoldMap propagate_auto_referents(const AnnotatedCorpus& corpus, const GoldMap& manual) {
  GoldMap out;
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> state;

  std::function<const GoldReferent*(const std::string&)> resolve = [&](const std::string& id) -> const GoldReferent* {
    const auto& m = corpus.markables.at(id);
    if (m.flags.generic) return nullptr;
    auto& st = state[id];
    if (st == Mark::Done) {
      const auto it = out.find(id);
      return it == out.end() ? nullptr : &it->second;
    }
    if (st == Mark::Active) throw IntegrityError("cyclic anaphora/cataphora link through markable " + id);
    st = Mark::Active;

    std::optional<GoldReferent> gold;
    if (m.flags.no_referent) {
      gold = GoldReferent{EntityMask{}, false, GoldSource::NoReferent};
    } else if (m.flags.all_referents) {
      gold = GoldReferent{EntityMask{}.set(), false, GoldSource::AllReferents};
    } else if (m.anaphora_of || m.cataphora_of) {
      const auto& target = m.anaphora_of ? *m.anaphora_of : *m.cataphora_of;
      if (corpus.markables.at(target).flags.generic)
        throw IntegrityError("markable " + id + " links to generic markable " + target);
      const auto* t = resolve(target);
      GoldReferent g = t ? *t : GoldReferent{EntityMask{}, true, GoldSource::Majority};
      g.source = m.anaphora_of ? GoldSource::Anaphora : GoldSource::Cataphora;
      gold = g;
    } else if (const auto it = manual.find(id); it != manual.end()) {
      gold = it->second;
      gold->source = GoldSource::Majority;
    }
    st = Mark::Done;
    if (!gold) return nullptr;
    return &(out[id] = *gold);
  };

  for (const auto& [id, m] : corpus.markables) resolve(id);
  return out;
}

CorpusStats corpus_stats(const AnnotatedCorpus& corpus) {
  CorpusStats s;
  s.dialogues = static_cast<std::int64_t>(corpus.dialogues.size());
  for (const auto& [id, d] : corpus.dialogues)
    for (const auto* m : d.messages()) {
      ++s.utterances;
      s.tokens += static_cast<std::int64_t>(m->tokens.size());
    }
  s.vocabulary_size = static_cast<std::int64_t>(corpus.vocabulary().size());
  s.markables = static_cast<std::int64_t>(corpus.markables.size());
  for (const auto& [id, m] : corpus.markables) {
    s.generic += m.flags.generic;
    s.all_referents += m.flags.all_referents;
    s.no_referent += m.flags.no_referent;
    s.anaphora += m.anaphora_of.has_value();
    s.cataphora += m.cataphora_of.has_value();
    s.judged_markables += !corpus.judgements_of(id).empty();
  }
  s.manual_markables = s.markables - s.all_referents - s.no_referent - s.anaphora - s.cataphora;
  s.judgements = static_cast<std::int64_t>(corpus.judgements.size());
  std::int64_t amb = 0, unid = 0;
  for (const auto& j : corpus.judgements) {
    amb += j.ambiguous;
    unid += j.unidentifiable;
  }
  if (s.judgements > 0) {
    s.ambiguous_pct = 100.0 * static_cast<double>(amb) / static_cast<double>(s.judgements);
    s.unidentifiable_pct = 100.0 * static_cast<double>(unid) / static_cast<double>(s.judgements);
  }
  return s;
}

json to_json(const CorpusStats& s) {
  return {{"dialogues", s.dialogues},
          {"utterances", s.utterances},
          {"tokens", s.tokens},
          {"vocabulary_size", s.vocabulary_size},
          {"markables", s.markables},
          {"generic", s.generic},
          {"all_referents", s.all_referents},
          {"no_referent", s.no_referent},
          {"anaphora", s.anaphora},
          {"cataphora", s.cataphora},
          {"manual_markables", s.manual_markables},
          {"judged_markables", s.judged_markables},
          {"judgements", s.judgements},
          {"ambiguous_pct", s.ambiguous_pct},
          {"unidentifiable_pct", s.unidentifiable_pct}};
}

DatasetSplit split_dataset(const AnnotatedCorpus& corpus, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& [id, d] : corpus.dialogues) ids.push_back(id);
  if (ids.size() < 10) throw InvalidArgument("cannot split fewer than 10 dialogues");
  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());
  const std::size_t tenth = ids.size() / 10;
  DatasetSplit split;
  split.valid.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(tenth));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(tenth), ids.begin() + static_cast<std::ptrdiff_t>(2 * tenth));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(2 * tenth), ids.end());
  return split;
}

}  // namespace groundlab
