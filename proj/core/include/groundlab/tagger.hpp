#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "groundlab/corpus.hpp"
#include "groundlab/model.hpp"
#include "groundlab/neural/layers.hpp"
#include "groundlab/neural/optimizer.hpp"
#include "groundlab/neural/param_store.hpp"
#include "groundlab/neural/tape.hpp"

namespace groundlab {

enum Tag : int { kTagB = 0, kTagI = 1, kTagO = 2 };
inline constexpr std::size_t kTagCount = 3;

/// Half-open token range [start, end).
using Span = std::pair<int, int>;

/// Throws InvalidArgument on overlapping or out-of-range spans.
std::vector<int> spans_to_bio(int length, const std::vector<Span>& spans);
/// An I that follows O or starts the sequence opens a new span.
std::vector<Span> bio_to_spans(const std::vector<int>& tags);

struct TaggerConfig {
  std::size_t token_dim = 64;
  std::size_t hidden_dim = 128;
  double dropout = 0.3;
  nn::AdamConfig adam;
  double clip = 5.0;
  int epochs = 20;
  int batch_size = 16;
  int patience = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TaggerConfig& c);
TaggerConfig tagger_config_from_json(const nlohmann::json& j);

struct TaggerExample {
  std::string dialogue_id;
  int utterance_index = 0;
  std::vector<int> tokens;
  std::vector<int> tags;
};

/// One example per message; every markable (generic or not) is a gold span.
std::vector<TaggerExample> tagger_examples(const AnnotatedCorpus& corpus, const std::vector<std::string>& dialogue_ids,
                                           const Vocabulary& vocab);

/// Bidirectional GRU encoder with per-token CRF emissions.
class MarkableTagger {
 public:
  MarkableTagger(TaggerConfig config, Vocabulary vocab);

  const TaggerConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  std::vector<nn::Var> emissions(nn::Tape& tape, const std::vector<int>& tokens, Rng* dropout = nullptr) const;
  nn::Var nll(nn::Tape& tape, const TaggerExample& ex, Rng* dropout = nullptr) const;

  /// Viterbi decode with I forbidden after O and at the start.
  std::vector<int> decode(const std::vector<int>& tokens) const;
  std::vector<Span> tag_utterance(const std::vector<std::string>& tokens) const;

  void save(const std::filesystem::path& stem, const nlohmann::json& history = nlohmann::json::array()) const;
  static MarkableTagger load(const std::filesystem::path& stem);

 private:
  TaggerConfig config_;
  Vocabulary vocab_;
  nn::ParamStore store_;
  nn::Param* embed_;
  nn::GruParams forward_;
  nn::GruParams backward_;
  nn::LinearParams out_;
  nn::Param* transitions_;
};

struct TaggerMetrics {
  double token_accuracy = 0.0;
  double span_precision = 0.0;
  double span_recall = 0.0;
  double span_f1 = 0.0;
  std::size_t tokens = 0;
  std::size_t gold_spans = 0;
  std::size_t predicted_spans = 0;
};

nlohmann::json to_json(const TaggerMetrics& m);

TaggerMetrics evaluate_tagger(const MarkableTagger& tagger, const std::vector<TaggerExample>& examples);

struct TaggerEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  TaggerMetrics valid;
};

struct TaggerTrainResult {
  std::vector<TaggerEpoch> history;
  int best_epoch = 0;
  double best_accuracy = 0.0;
};

/// Maximizes the CRF log-likelihood; early stopping on validation token
/// accuracy. The tagger is left holding the best parameters.
TaggerTrainResult train_tagger(MarkableTagger& tagger, const std::vector<TaggerExample>& train_set,
                               const std::vector<TaggerExample>& valid_set,
                               const std::function<void(const TaggerEpoch&)>& on_epoch = {});

/// Markables predicted for every message of a dialogue (ids "<dialogue>_auto_<n>").
std::vector<Markable> tag_dialogue(const MarkableTagger& tagger, const Dialogue& dialogue);

}  // namespace groundlab
