#pragma once

#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "groundlab/scenario.hpp"

namespace groundlab {

struct Message {
  Player speaker = Player::A;
  std::vector<std::string> tokens;
  bool operator==(const Message&) const = default;
};

struct Selection {
  Player speaker = Player::A;
  int entity_id = 0;
  bool operator==(const Selection&) const = default;
};

using Event = std::variant<Message, Selection>;

struct Dialogue {
  std::string id;
  std::string scenario_id;
  std::vector<Event> events;
  bool outcome = false;

  /// Messages in order; `utterance_index` of a markable indexes this list.
  std::vector<const Message*> messages() const;
  std::optional<Selection> selection(Player p) const;
  /// Speaker of the first selection event, if any.
  std::optional<Player> first_selector() const;

  bool operator==(const Dialogue&) const = default;
};

struct MarkableFlags {
  bool generic = false;
  bool all_referents = false;
  bool no_referent = false;
  bool operator==(const MarkableFlags&) const = default;
};

struct Markable {
  std::string id;
  std::string dialogue_id;
  int utterance_index = 0;
  int start_token = 0;  ///< inclusive
  int end_token = 0;    ///< exclusive
  Player speaker = Player::A;
  MarkableFlags flags;
  std::optional<std::string> anaphora_of;
  std::optional<std::string> cataphora_of;

  bool is_auto() const {
    return flags.all_referents || flags.no_referent || anaphora_of || cataphora_of;
  }
  bool operator==(const Markable&) const = default;
};

struct ReferentJudgement {
  std::string markable_id;
  std::string annotator_id;
  std::vector<int> referents;  ///< entity ids, ascending
  bool ambiguous = false;
  bool unidentifiable = false;
  bool operator==(const ReferentJudgement&) const = default;
};

struct TokenSpan {
  int utterance_index = 0;
  int start_token = 0;
  int end_token = 0;
  bool operator==(const TokenSpan&) const = default;
};

/// One annotator's independent markable detection over one dialogue.
struct SpanAnnotation {
  std::string annotator_id;
  std::string dialogue_id;
  std::vector<TokenSpan> spans;
  bool operator==(const SpanAnnotation&) const = default;
};

/// Referents expressed over a speaker's 7 visible entities (bit i = view slot i).
using EntityMask = std::bitset<kViewSize>;

EntityMask mask_from_ids(const View& view, const std::vector<int>& ids);
std::vector<int> ids_from_mask(const View& view, EntityMask mask);

enum class GoldSource { Majority, NoReferent, AllReferents, Anaphora, Cataphora };

struct GoldReferent {
  EntityMask referents;
  bool dropped = false;
  GoldSource source = GoldSource::Majority;
  bool operator==(const GoldReferent&) const = default;
};

using GoldMap = std::map<std::string, GoldReferent>;

struct ValidationOptions {
  /// Minimum judgements for any markable that has at least one.
  int min_judgements = 3;
};

class AnnotatedCorpus {
 public:
  std::map<std::string, Scenario> scenarios;
  std::map<std::string, Dialogue> dialogues;
  std::map<std::string, Markable> markables;
  std::vector<ReferentJudgement> judgements;
  std::vector<SpanAnnotation> span_annotations;

  /// Recomputes vocabulary and lookup indexes; call after mutating the tables.
  void reindex();
  void validate(const ValidationOptions& options = {}) const;

  const std::map<std::string, std::int64_t>& vocabulary() const { return vocabulary_; }
  /// Markable ids of a dialogue ordered by (utterance, start token).
  const std::vector<std::string>& markables_of(const std::string& dialogue_id) const;
  /// Indexes into `judgements` for a markable.
  const std::vector<std::size_t>& judgements_of(const std::string& markable_id) const;

  const Scenario& scenario_of(const Dialogue& d) const;
  const View& speaker_view(const Markable& m) const;
  std::vector<std::string> markable_tokens(const Markable& m) const;

  bool operator==(const AnnotatedCorpus& o) const {
    return scenarios == o.scenarios && dialogues == o.dialogues && markables == o.markables &&
           judgements == o.judgements && span_annotations == o.span_annotations;
  }

 private:
  std::map<std::string, std::int64_t> vocabulary_;
  std::map<std::string, std::vector<std::string>> by_dialogue_;
  std::map<std::string, std::vector<std::size_t>> by_markable_;
};

/// Reads scenarios.json, dialogues.json, markables.json, judgements.json (and
/// span_annotations.json when present) from `dir`, then validates.
AnnotatedCorpus load_corpus(const std::filesystem::path& dir, const ValidationOptions& options = {});
void save_corpus(const AnnotatedCorpus& corpus, const std::filesystem::path& dir);

nlohmann::json to_json(const Dialogue& d);
nlohmann::json to_json(const Markable& m);
nlohmann::json to_json(const ReferentJudgement& j);
Dialogue dialogue_from_json(const nlohmann::json& j);
Markable markable_from_json(const nlohmann::json& j);
ReferentJudgement judgement_from_json(const nlohmann::json& j);

/// Gold for every non-generic markable: flagged and linked markables get
/// automatic referents, the rest come from `manual`. Throws IntegrityError on
/// cyclic links or links to generic markables.
GoldMap propagate_auto_referents(const AnnotatedCorpus& corpus, const GoldMap& manual);

struct CorpusStats {
  std::int64_t dialogues = 0;
  std::int64_t utterances = 0;
  std::int64_t tokens = 0;
  std::int64_t vocabulary_size = 0;
  std::int64_t markables = 0;
  std::int64_t generic = 0;
  std::int64_t all_referents = 0;
  std::int64_t no_referent = 0;
  std::int64_t anaphora = 0;
  std::int64_t cataphora = 0;
  std::int64_t manual_markables = 0;  ///< markables - all_referents - no_referent - anaphora - cataphora
  std::int64_t judged_markables = 0;
  std::int64_t judgements = 0;
  double ambiguous_pct = 0.0;
  double unidentifiable_pct = 0.0;
};

CorpusStats corpus_stats(const AnnotatedCorpus& corpus);
nlohmann::json to_json(const CorpusStats& s);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

/// Dialogue-level 8:1:1 partition: floor(N/10) each for valid and test.
DatasetSplit split_dataset(const AnnotatedCorpus& corpus, std::uint64_t seed);

}  // namespace groundlab
