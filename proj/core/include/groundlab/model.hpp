#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/corpus.hpp"
#include "groundlab/neural/layers.hpp"
#include "groundlab/neural/optimizer.hpp"
#include "groundlab/neural/param_store.hpp"
#include "groundlab/neural/tape.hpp"
#include "groundlab/random.hpp"
#include "groundlab/scenario.hpp"

namespace groundlab {

enum class Variant { Tsel, Ref, TselRef, TselDial, TselRefDial };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
bool uses_tsel(Variant v);
bool uses_ref(Variant v);
bool uses_dial(Variant v);

struct ModelConfig {
  Variant variant = Variant::TselRefDial;
  std::size_t token_dim = 256;
  std::size_t hidden_dim = 256;
  std::size_t attribute_dim = 128;
  std::size_t relational_dim = 128;
  std::size_t attention_dim = 256;
  double dropout = 0.5;
  double tsel_weight = 1.0;
  double ref_weight = 1.0;
  double dial_weight = 1.0;
  nn::AdamConfig adam;
  double clip = 0.5;
  int epochs = 30;
  int batch_size = 16;
  int patience = 4;
  std::uint64_t seed = 0;
  AttributeRanges ranges;

  void validate() const;
  std::size_t entity_dim() const { return attribute_dim + relational_dim; }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

namespace tokens {
inline const std::string kUnk = "<unk>";
inline const std::string kYou = "YOU:";
inline const std::string kThem = "THEM:";
inline const std::string kEos = "<eos>";
inline const std::string kSelection = "<selection>";
}  // namespace tokens

/// Token ids. The special tokens always occupy ids 0..4.
class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary build(const AnnotatedCorpus& corpus, const std::vector<std::string>& dialogue_ids);

  int id(const std::string& token) const;
  const std::string& token(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int add(const std::string& token);

  int unk() const { return 0; }
  int you() const { return 1; }
  int them() const { return 2; }
  int eos() const { return 3; }
  int selection() const { return 4; }
  bool is_speaker(int id) const { return id == 1 || id == 2; }

  const std::vector<std::string>& words() const { return words_; }
  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

nlohmann::json to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

/// Normalized attributes and pairwise features of one player's 7 entities.
struct ViewFeatures {
  std::array<std::array<double, kAttributeDim>, kViewSize> attributes{};
  std::array<std::array<std::array<double, kPairFeatureDim>, kViewSize>, kViewSize> pairs{};
};

ViewFeatures view_features(const Scenario& s, Player p, const AttributeRanges& ranges = {});

struct RefItem {
  std::string markable_id;
  int start = 0;    ///< stream position of the first markable token
  int end = 0;      ///< stream position of the last markable token
  int utt_end = 0;  ///< stream position of the utterance's end token
  EntityMask gold;
};

/// One dialogue serialized from one player's perspective.
struct GroundingExample {
  std::string dialogue_id;
  Player perspective = Player::A;
  ViewFeatures features;
  std::vector<int> stream;
  /// Positions whose token is a next-token prediction target.
  std::vector<int> dial_targets;
  int selection = -1;  ///< slot of the perspective's selected entity
  std::vector<RefItem> refs;
};

/// Stream layout: per message [YOU:|THEM:] tokens... <eos>, then the first
/// selector's speaker token and <selection>. REF items cover the perspective
/// player's own non-generic, non-dropped markables with gold referents.
GroundingExample make_example(const AnnotatedCorpus& corpus, const GoldMap& gold, const std::string& dialogue_id,
                              Player perspective, const Vocabulary& vocab, const AttributeRanges& ranges = {});
std::vector<GroundingExample> make_examples(const AnnotatedCorpus& corpus, const GoldMap& gold,
                                            const std::vector<std::string>& dialogue_ids, const Vocabulary& vocab,
                                            const AttributeRanges& ranges = {});

enum class Head { Tsel, Ref, Dial };

struct LossParts {
  nn::Var total;
  std::optional<nn::Var> tsel;
  std::optional<nn::Var> ref;
  std::optional<nn::Var> dial;
};

struct ExamplePrediction {
  std::array<double, kViewSize> tsel{};
  int tsel_argmax = 0;
  std::vector<std::array<double, kViewSize>> ref;  ///< per RefItem, inclusion probabilities
  std::vector<EntityMask> ref_mask;                ///< thresholded at 0.5
  double dial_nll = 0.0;                           ///< summed over targets
  std::size_t dial_tokens = 0;
};

/// Incremental state used to play the game token by token.
struct DialogueState {
  nn::Tensor entities;   ///< [7, entity_dim]
  nn::Tensor projected;  ///< [7, attention_dim], W_entity e_i
  std::vector<double> h;
  std::size_t steps = 0;
};

class GroundingModel {
 public:
  GroundingModel(ModelConfig config, Vocabulary vocab);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// 7 entity embeddings, each tanh(W_a a_i + b_a) ++ sum_j tanh(W_r r_ij + b_r).
  std::vector<nn::Var> encode_entities(nn::Tape& tape, const ViewFeatures& f, Rng* dropout = nullptr) const;
  /// v_head . tanh(W_entity e_i + W_query q + b) for each entity, as a [7] vector.
  nn::Var attention_scores(nn::Tape& tape, std::span<const nn::Var> entities, nn::Var query, Head head) const;
  /// Hidden state after each stream position.
  std::vector<nn::Var> encode_dialogue(nn::Tape& tape, const std::vector<int>& stream, Rng* dropout = nullptr) const;
  /// Vocabulary logits for the token following hidden state `h`.
  nn::Var dial_logits(nn::Tape& tape, std::span<const nn::Var> entities, nn::Var h) const;

  /// Weighted sum of the variant's active losses. Passing an rng enables dropout.
  LossParts loss(nn::Tape& tape, const GroundingExample& ex, Rng* dropout = nullptr) const;
  ExamplePrediction predict(const GroundingExample& ex) const;

  DialogueState start(const ViewFeatures& f) const;
  void feed(DialogueState& state, int token) const;
  std::vector<double> next_token_distribution(const DialogueState& state) const;
  std::array<double, kViewSize> selection_distribution(const DialogueState& state) const;
  /// Inclusion probabilities for a span given the stream hidden states.
  std::array<double, kViewSize> resolve(const DialogueState& state, const std::vector<double>& h_start,
                                        const std::vector<double>& h_end, const std::vector<double>& h_utt_end) const;

  /// Writes `<stem>.params` and `<stem>.json` (config, vocabulary, history).
  void save(const std::filesystem::path& stem, const nlohmann::json& history = nlohmann::json::array()) const;
  static GroundingModel load(const std::filesystem::path& stem);

 private:
  nn::Var entity_query_scores(nn::Tape& tape, std::span<const nn::Var> projected, nn::Var query, Head head) const;
  std::vector<nn::Var> project_entities(nn::Tape& tape, std::span<const nn::Var> entities) const;

  ModelConfig config_;
  Vocabulary vocab_;
  nn::ParamStore store_;
  nn::Param* embed_;
  nn::LinearParams attr_;
  nn::LinearParams rel_;
  nn::GruParams gru_;
  nn::Param* att_entity_;
  nn::Param* att_query_;
  nn::Param* att_bias_;
  nn::Param* v_tsel_;
  nn::Param* v_ref_;
  nn::Param* v_dial_;
  nn::LinearParams mlp_hidden_;
  nn::LinearParams mlp_out_;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_tsel_accuracy = 0.0;
  double valid_ref_accuracy = 0.0;
  double valid_ref_exact = 0.0;
  double seconds = 0.0;
};

nlohmann::json to_json(const EpochMetrics& m);

struct TrainResult {
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_valid_loss = 0.0;
};

struct TrainOptions {
  /// JSON-lines metrics destination (skipped when empty).
  std::filesystem::path metrics_path;
  /// Checkpoint stem for the best validation model (skipped when empty).
  std::filesystem::path checkpoint_stem;
  std::function<void(const EpochMetrics&)> on_epoch;
};

/// Joint training with Adam, global-norm clipping and early stopping on
/// validation loss. The model is left holding the best validation parameters.
/// Throws NumericError when a loss becomes non-finite.
TrainResult train(GroundingModel& model, const std::vector<GroundingExample>& train_set,
                  const std::vector<GroundingExample>& valid_set, const TrainOptions& options = {});

/// Mean joint loss with dropout disabled.
double mean_loss(const GroundingModel& model, const std::vector<GroundingExample>& examples);

}  // namespace groundlab
