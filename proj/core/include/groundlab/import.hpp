#pragma once

#include <filesystem>
#include <array>
#include <map>
#include <optional>
#include <vector>
#include <string>

#include <json.hpp>

#include "groundlab/corpus.hpp"

namespace groundlab {

struct ImportOptions {
  /// View geometry of the released interface, in pixels.
  double view_center_px = 215.0;
  double view_radius_px = 200.0;
  std::filesystem::path transcripts = "final_transcripts.json";
  std::filesystem::path markables = "markable_annotation.json";
  /// Per-annotator judgements; the aggregated file is used when this is absent.
  std::filesystem::path referents = "referent_annotation.json";
  std::filesystem::path aggregated_referents = "aggregated_referent_annotation.json";
};

struct ImportReport {
  std::int64_t dialogues = 0;
  std::int64_t markables = 0;
  std::int64_t judgements = 0;
  bool aggregated_only = false;
  /// Reason -> count for every record left out.
  std::map<std::string, std::int64_t> skipped;
};

nlohmann::json to_json(const ImportReport& r);

struct ImportResult {
  AnnotatedCorpus corpus;
  ImportReport report;
};

/// Scenario from the released per-player entity lists (`kbs`). Pixel
/// coordinates map to world units by the view radius; B's frame offset is the
/// mean displacement of the shared entities; y grows upward.
Scenario import_scenario(const nlohmann::json& scenario, const ImportOptions& options = {});

/// Converts the released transcript and annotation files under `dir` into the
/// canonical corpus. Records that cannot be represented are skipped and
/// counted in the report.
ImportResult import_released(const std::filesystem::path& dir, const ImportOptions& options = {});

/// Token index covering each character of a "<agent>: <utterance>" line set.
struct CharTokenMap {
  struct Line {
    std::size_t begin = 0;  ///< offset of the first utterance character
    std::vector<std::pair<std::size_t, std::size_t>> tokens;  ///< [begin, end) per token
  };
  std::vector<Line> lines;

  /// (utterance, start token, end token) overlapping [begin, end), or nullopt.
  std::optional<std::array<int, 3>> locate(std::size_t begin, std::size_t end) const;
};

CharTokenMap map_characters(const std::string& text);

}  // namespace groundlab
