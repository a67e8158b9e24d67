#include "groundlab/selfplay.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "groundlab/agreement.hpp"
#include "groundlab/error.hpp"
#include "groundlab/io.hpp"
#include "groundlab/tagger.hpp"

namespace groundlab {

using nlohmann::json;

void ProtocolConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
  if (max_utterances < 1 || max_tokens < 1) throw InvalidArgument("utterance and token limits must be positive");
}

std::vector<double> temper(std::span<const double> p, double temperature) {
  if (p.empty()) throw InvalidArgument("empty distribution");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw NumericError("distribution has a negative or non-finite entry");
    if (x > 0.0) mx = std::max(mx, std::log(x));
  }
  if (!std::isfinite(mx)) throw NumericError("distribution has no mass");
  std::vector<double> q(p.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q[i] = p[i] > 0.0 ? std::exp((std::log(p[i]) - mx) / temperature) : 0.0;
    z += q[i];
  }
  if (!std::isfinite(z) || z <= 0.0) throw NumericError("tempered distribution is not finite");
  for (auto& x : q) x /= z;
  return q;
}

int sample_token(std::span<const double> p, double temperature, Rng& rng) {
  const auto q = temper(p, temperature);
  const double u = rng.uniform();
  double c = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    c += q[i];
    last = static_cast<int>(i);
    if (u < c) return last;
  }
  return last;
}

ModelAgent::ModelAgent(const GroundingModel& model, const ProtocolConfig& protocol)
    : model_(model), protocol_(protocol) {
  protocol_.validate();
}

void ModelAgent::reset(const Scenario& scenario, Player self) {
  scenario_ = &scenario;
  self_ = self;
  state_ = model_.start(view_features(scenario, self, model_.config().ranges));
}

Turn ModelAgent::speak(Rng& rng) {
  const auto& v = model_.vocabulary();
  auto& s = state_.value();
  model_.feed(s, v.you());
  Turn turn;
  for (int n = 0; n < protocol_.max_tokens; ++n) {
    auto p = model_.next_token_distribution(s);
    for (int banned : {v.unk(), v.you(), v.them()}) p[static_cast<std::size_t>(banned)] = 0.0;
    const int tok = sample_token(p, protocol_.temperature, rng);
    if (tok == v.eos()) break;
    if (tok == v.selection()) {
      turn.selection = true;
      break;
    }
    turn.tokens.push_back(v.token(tok));
    model_.feed(s, tok);
  }
  if (turn.selection && !turn.tokens.empty()) {
    model_.feed(s, v.eos());
    model_.feed(s, v.you());
  }
  model_.feed(s, turn.selection ? v.selection() : v.eos());
  return turn;
}

void ModelAgent::hear(const Turn& turn) {
  const auto& v = model_.vocabulary();
  auto& s = state_.value();
  if (!turn.tokens.empty() || !turn.selection) {
    model_.feed(s, v.them());
    for (const auto& t : turn.tokens) model_.feed(s, v.id(t));
    model_.feed(s, v.eos());
  }
  if (turn.selection) {
    model_.feed(s, v.them());
    model_.feed(s, v.selection());
  }
}

void ModelAgent::force_end(bool self_next) {
  const auto& v = model_.vocabulary();
  model_.feed(state_.value(), self_next ? v.you() : v.them());
  model_.feed(state_.value(), v.selection());
}

int ModelAgent::select(Rng&) {
  const auto p = model_.selection_distribution(state_.value());
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  return scenario_->view(self_).visible.at(best);
}

void ScriptedAgent::reset(const Scenario& scenario, Player self) {
  scenario_ = &scenario;
  self_ = self;
}

Turn ScriptedAgent::speak(Rng&) { return Turn{{}, true}; }

int ScriptedAgent::select(Rng&) {
  const auto shared = scenario_->shared_ids();
  if (pick_shared_) return *std::min_element(shared.begin(), shared.end());
  const auto& mine = scenario_->view(self_).visible;
  int pick = -1;
  for (int id : mine)
    if (std::find(shared.begin(), shared.end(), id) == shared.end()) pick = std::max(pick, id);
  return pick >= 0 ? pick : *std::max_element(mine.begin(), mine.end());
}

void RandomAgent::reset(const Scenario& scenario, Player self) {
  scenario_ = &scenario;
  self_ = self;
}

Turn RandomAgent::speak(Rng&) { return Turn{{}, true}; }

int RandomAgent::select(Rng& rng) {
  const auto& mine = scenario_->view(self_).visible;
  return mine.at(rng.below(mine.size()));
}

GameTranscript run_game(Agent& a, Agent& b, const Scenario& scenario, const ProtocolConfig& protocol, Rng& rng) {
  protocol.validate();
  GameTranscript t;
  t.scenario_id = scenario.id;
  t.num_shared = scenario.num_shared;
  t.seed = protocol.seed;
  try {
    a.reset(scenario, Player::A);
    b.reset(scenario, Player::B);
    Agent* agents[2] = {&a, &b};
    int u = 0;
    for (; u < protocol.max_utterances; ++u) {
      const Player speaker = u % 2 == 0 ? Player::A : Player::B;
      const auto turn = agents[u % 2]->speak(rng);
      if (!turn.tokens.empty() || !turn.selection) t.messages.push_back({speaker, turn.tokens});
      agents[1 - u % 2]->hear(turn);
      if (turn.selection) {
        t.first_selector = speaker;
        break;
      }
    }
    if (!t.first_selector) {
      t.forced = true;
      const int next = u % 2;
      agents[next]->force_end(true);
      agents[1 - next]->force_end(false);
      t.first_selector = next == 0 ? Player::A : Player::B;
    }
    t.selection_a = a.select(rng);
    t.selection_b = b.select(rng);
    t.success = t.selection_a == t.selection_b;
  } catch (const std::exception& e) {
    t.aborted = e.what();
    t.success = false;
  }
  return t;
}

Dialogue transcript_dialogue(const GameTranscript& t) {
  Dialogue d;
  d.id = t.scenario_id + "_selfplay";
  d.scenario_id = t.scenario_id;
  for (const auto& m : t.messages) d.events.emplace_back(m);
  const Player first = t.first_selector.value_or(Player::A);
  const int ids[2] = {t.selection_a, t.selection_b};
  for (Player p : {first, other(first)}) {
    const int id = ids[p == Player::A ? 0 : 1];
    if (id >= 0) d.events.emplace_back(Selection{p, id});
  }
  d.outcome = t.success;
  return d;
}

void annotate_transcript(GameTranscript& t, const Scenario& scenario, const GroundingModel& model,
                         const MarkableTagger& tagger) {
  AnnotatedCorpus c;
  c.scenarios.emplace(scenario.id, scenario);
  const auto d = transcript_dialogue(t);
  c.dialogues.emplace(d.id, d);
  GoldMap placeholder;
  for (auto& m : tag_dialogue(tagger, d)) {
    placeholder[m.id] = GoldReferent{};
    c.markables.emplace(m.id, std::move(m));
  }
  c.reindex();
  t.markables.clear();
  std::map<std::string, PredictedMarkable> resolved;
  for (Player p : {Player::A, Player::B}) {
    const auto ex = make_example(c, placeholder, d.id, p, model.vocabulary(), model.config().ranges);
    const auto pred = model.predict(ex);
    const auto& view = scenario.view(p);
    for (std::size_t r = 0; r < ex.refs.size(); ++r) {
      const auto& m = c.markables.at(ex.refs[r].markable_id);
      resolved[m.id] = {m.utterance_index, m.start_token, m.end_token, ids_from_mask(view, pred.ref_mask[r])};
    }
  }
  for (const auto& mid : c.markables_of(d.id)) t.markables.push_back(resolved.at(mid));
}

json to_json(const GameTranscript& t) {
  json messages = json::array();
  for (const auto& m : t.messages) messages.push_back({{"speaker", to_string(m.speaker)}, {"tokens", m.tokens}});
  json markables = json::array();
  for (const auto& m : t.markables)
    markables.push_back({{"utterance_index", m.utterance_index},
                         {"start_token", m.start_token},
                         {"end_token", m.end_token},
                         {"referents", m.referents}});
  return {{"scenario_id", t.scenario_id},
          {"num_shared", t.num_shared},
          {"seed", t.seed},
          {"messages", messages},
          {"first_selector", t.first_selector ? json(to_string(*t.first_selector)) : json(nullptr)},
          {"selections", {{"A", t.selection_a}, {"B", t.selection_b}}},
          {"success", t.success},
          {"forced", t.forced},
          {"aborted", t.aborted ? json(*t.aborted) : json(nullptr)},
          {"markables", markables}};
}

GameTranscript transcript_from_json(const json& j) {
  try {
    GameTranscript t;
    t.scenario_id = j.at("scenario_id").get<std::string>();
    t.num_shared = j.at("num_shared").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("messages"))
      t.messages.push_back({player_from_string(m.at("speaker").get<std::string>()),
                            m.at("tokens").get<std::vector<std::string>>()});
    if (!j.at("first_selector").is_null()) t.first_selector = player_from_string(j.at("first_selector").get<std::string>());
    t.selection_a = j.at("selections").at("A").get<int>();
    t.selection_b = j.at("selections").at("B").get<int>();
    t.success = j.at("success").get<bool>();
    t.forced = j.at("forced").get<bool>();
    if (!j.at("aborted").is_null()) t.aborted = j.at("aborted").get<std::string>();
    for (const auto& m : j.at("markables"))
      t.markables.push_back({m.at("utterance_index").get<int>(), m.at("start_token").get<int>(),
                             m.at("end_token").get<int>(), m.at("referents").get<std::vector<int>>()});
    return t;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("transcript: ") + e.what());
  }
}

BatchResult run_batch(const AgentFactory& make_agent, const ProtocolConfig& protocol, const BatchOptions& options) {
  protocol.validate();
  options.scenario.validate();
  if (options.games < 0) throw InvalidArgument("games must be non-negative");
  struct Task {
    int k;
    int index;
  };
  std::vector<Task> tasks;
  for (int k : options.shared)
    for (int i = 0; i < options.games; ++i) tasks.push_back({k, i});

  BatchResult result;
  result.transcripts.resize(tasks.size());
  result.scenarios.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    try {
      auto a = make_agent();
      auto b = make_agent();
      for (std::size_t n; (n = next++) < tasks.size();) {
        const auto [k, i] = tasks[n];
        const auto base = Rng::derive_seed(protocol.seed, static_cast<std::uint64_t>(k));
        Rng scenario_rng(Rng::derive_seed(base, 2 * static_cast<std::uint64_t>(i)));
        Rng game_rng(Rng::derive_seed(base, 2 * static_cast<std::uint64_t>(i) + 1));
        char id[32];
        std::snprintf(id, sizeof id, "sp%d_%05d", k, i);
        result.scenarios[n] = generate_scenario(options.scenario, k, scenario_rng, id);
        result.transcripts[n] = run_game(*a, *b, result.scenarios[n], protocol, game_rng);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = tasks.size();
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  for (int k : options.shared) {
    BatchRow row;
    row.num_shared = k;
    for (std::size_t n = 0; n < tasks.size(); ++n) {
      if (tasks[n].k != k) continue;
      const auto& t = result.transcripts[n];
      ++row.games;
      row.successes += t.success;
      row.forced += t.forced;
      row.aborted += t.aborted.has_value();
    }
    result.rows.push_back(row);
  }
  return result;
}

void write_transcripts(const std::filesystem::path& path, const std::vector<GameTranscript>& transcripts) {
  std::string out;
  for (const auto& t : transcripts) out += to_json(t).dump() + "\n";
  write_file_atomic(path, out);
}

std::vector<GameTranscript> read_transcripts(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<GameTranscript> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(transcript_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw SchemaError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string summary_csv(const std::vector<BatchRow>& rows) {
  std::string out = "k,games,successes,rate\n";
  for (const auto& r : rows) {
    char line[96];
    std::snprintf(line, sizeof line, "%d,%d,%d,%.4f\n", r.num_shared, r.games, r.successes, r.rate());
    out += line;
  }
  return out;
}

}  // namespace groundlab
