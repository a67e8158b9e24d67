#pragma once

#include <string>
#include <vector>

#include "groundlab/corpus.hpp"
#include "groundlab/scenario.hpp"

namespace groundlab {

/// Fixed ring palette, cycled by markable order.
const std::vector<std::string>& highlight_palette();

/// "#rrggbb" gray for a color value, rounded and clamped to [0, 255].
std::string gray_hex(double color);

struct Highlight {
  std::vector<int> entity_ids;
  std::string color;
};

struct Panel {
  std::string title;
  Player player = Player::A;
  std::vector<Highlight> highlights;
};

/// One view: its circle outline, one dot per visible entity (radius from size,
/// gray fill from color) and a ring per highlight. Throws InvalidArgument for
/// highlighted entities outside the view.
std::string render_view(const Scenario& scenario, Player player, const std::vector<Highlight>& highlights = {});

/// Panels side by side in one document.
std::string render_panels(const Scenario& scenario, const std::vector<Panel>& panels);

struct RenderedMarkable {
  int utterance_index = 0;
  int start_token = 0;
  int end_token = 0;
  Player speaker = Player::A;
  std::vector<int> referents;
};

/// Both views above the transcript; markable spans are underlined in the color
/// of the rings they produce in the speaker's view. A markable with no
/// referents is underlined without a ring.
std::string render_dialogue(const Scenario& scenario, const std::vector<Message>& messages,
                            const std::vector<RenderedMarkable>& markables);

/// Markables of a corpus dialogue paired with gold referents (markables with
/// no gold entry are underlined only).
std::vector<RenderedMarkable> gold_markables(const AnnotatedCorpus& corpus, const std::string& dialogue_id,
                                             const GoldMap& gold);

/// One panel per judgement of a markable, in the speaker's view.
std::string render_judgements(const AnnotatedCorpus& corpus, const std::string& markable_id);

}  // namespace groundlab
