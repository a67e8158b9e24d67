#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/corpus.hpp"
#include "groundlab/model.hpp"
#include "groundlab/random.hpp"
#include "groundlab/scenario.hpp"

namespace groundlab {

class MarkableTagger;

struct ProtocolConfig {
  double temperature = 0.25;
  int max_utterances = 20;
  int max_tokens = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// p_i^(1/t) renormalized.
std::vector<double> temper(std::span<const double> p, double temperature);
/// Draws from temper(p, temperature). Throws NumericError when the tempered
/// distribution is not finite.
int sample_token(std::span<const double> p, double temperature, Rng& rng);

struct Turn {
  std::vector<std::string> tokens;
  bool selection = false;  ///< the speaker ended the dialogue
};

/// One player of the game. Agents keep their own dialogue state.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset(const Scenario& scenario, Player self) = 0;
  virtual Turn speak(Rng& rng) = 0;
  virtual void hear(const Turn& turn) = 0;
  /// Called instead of a selection turn when the utterance cap is reached.
  virtual void force_end(bool self_next) = 0;
  /// Selected entity id.
  virtual int select(Rng& rng) = 0;
};

/// Generates with the DIAL head and selects with the TSEL head (argmax).
class ModelAgent : public Agent {
 public:
  ModelAgent(const GroundingModel& model, const ProtocolConfig& protocol);
  void reset(const Scenario& scenario, Player self) override;
  Turn speak(Rng& rng) override;
  void hear(const Turn& turn) override;
  void force_end(bool self_next) override;
  int select(Rng& rng) override;

 private:
  const GroundingModel& model_;
  ProtocolConfig protocol_;
  const Scenario* scenario_ = nullptr;
  Player self_ = Player::A;
  std::optional<DialogueState> state_;
};

/// Emits the selection token at once and picks the lowest-id shared entity
/// (or, with `pick_shared` false, the highest-id private one when available).
class ScriptedAgent : public Agent {
 public:
  explicit ScriptedAgent(bool pick_shared = true) : pick_shared_(pick_shared) {}
  void reset(const Scenario& scenario, Player self) override;
  Turn speak(Rng& rng) override;
  void hear(const Turn&) override {}
  void force_end(bool) override {}
  int select(Rng& rng) override;

 private:
  bool pick_shared_;
  const Scenario* scenario_ = nullptr;
  Player self_ = Player::A;
};

/// Emits the selection token at once and picks uniformly from its view.
class RandomAgent : public Agent {
 public:
  void reset(const Scenario& scenario, Player self) override;
  Turn speak(Rng& rng) override;
  void hear(const Turn&) override {}
  void force_end(bool) override {}
  int select(Rng& rng) override;

 private:
  const Scenario* scenario_ = nullptr;
  Player self_ = Player::A;
};

struct PredictedMarkable {
  int utterance_index = 0;
  int start_token = 0;
  int end_token = 0;
  std::vector<int> referents;  ///< entity ids in the speaker's view
  bool operator==(const PredictedMarkable&) const = default;
};

struct GameTranscript {
  std::string scenario_id;
  int num_shared = 0;
  std::uint64_t seed = 0;
  std::vector<Message> messages;
  std::optional<Player> first_selector;
  int selection_a = -1;
  int selection_b = -1;
  bool success = false;
  bool forced = false;
  std::optional<std::string> aborted;
  std::vector<PredictedMarkable> markables;

  bool operator==(const GameTranscript&) const = default;
};

nlohmann::json to_json(const GameTranscript& t);
GameTranscript transcript_from_json(const nlohmann::json& j);

/// A speaks first; agents alternate until one emits the selection token or
/// the utterance cap forces the end, then both select.
GameTranscript run_game(Agent& a, Agent& b, const Scenario& scenario, const ProtocolConfig& protocol, Rng& rng);

/// Dialogue and transcript view usable by the renderer and the evaluators.
Dialogue transcript_dialogue(const GameTranscript& t);

/// Tags every message and resolves the markables from the speaker's
/// perspective.
void annotate_transcript(GameTranscript& t, const Scenario& scenario, const GroundingModel& model,
                         const MarkableTagger& tagger);

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

struct BatchOptions {
  std::vector<int> shared{4, 5, 6};
  int games = 1000;
  ScenarioConfig scenario;
  int jobs = 1;
};

struct BatchRow {
  int num_shared = 0;
  int games = 0;
  int successes = 0;
  int forced = 0;
  int aborted = 0;
  double rate() const { return games ? static_cast<double>(successes) / games : 0.0; }
};

struct BatchResult {
  std::vector<BatchRow> rows;
  std::vector<GameTranscript> transcripts;
  std::vector<Scenario> scenarios;
};

/// Scenario i for shared count k and its game stream are both derived from
/// (protocol.seed, k, i), so results do not depend on the number of jobs.
BatchResult run_batch(const AgentFactory& make_agent, const ProtocolConfig& protocol, const BatchOptions& options);

void write_transcripts(const std::filesystem::path& path, const std::vector<GameTranscript>& transcripts);
std::vector<GameTranscript> read_transcripts(const std::filesystem::path& path);
std::string summary_csv(const std::vector<BatchRow>& rows);

}  // namespace groundlab
