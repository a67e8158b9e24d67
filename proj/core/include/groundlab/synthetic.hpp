#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groundlab/corpus.hpp"
#include "groundlab/scenario.hpp"

namespace groundlab {

/// Scripted corpus generator. Two players alternately describe one of their
/// entities with a size and a color word; the listener either confirms a
/// matching entity or rejects and proposes its own. Only dialogues where both
/// players end on the same entity are kept, mirroring the successful-dialogue
/// corpus. Judgements are gold plus annotator noise.
struct SyntheticConfig {
  int dialogues = 100;
  std::uint64_t seed = 0;
  ScenarioConfig scenario;
  int judgements_per_markable = 3;
  int max_proposals = 6;
  double extra_referent_rate = 0.06;
  double missing_referent_rate = 0.04;
  double ambiguous_rate = 0.05;
  double unidentifiable_rate = 0.01;
  double anaphora_rate = 0.3;
  double opener_rate = 0.15;
  /// Fraction of dialogues that also get independent span annotations.
  double span_annotated_fraction = 0.1;
  int span_annotators = 3;
  /// Descriptions end with a vertical location phrase ("on the top").
  bool spatial_words = true;
};

AnnotatedCorpus synthesize_corpus(const SyntheticConfig& config);

/// Color and size words used by the scripted players.
std::string color_word(double color);
std::string size_word(double size, const ScenarioConfig& config);

/// "top", "middle" or "bottom" by the entity's height in the view.
std::string location_word(const Entity& e, const View& view);

/// Slot in `p`'s view of an entity whose color and size words (and, when
/// `location` is given, location word) match `e`, preferring the nearest
/// color; -1 when none match.
int matching_slot(const Scenario& s, Player p, const Entity& e, const ScenarioConfig& config,
                  const std::string& location = {});

}  // namespace groundlab
