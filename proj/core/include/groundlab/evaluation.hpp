#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/corpus.hpp"
#include "groundlab/model.hpp"

namespace groundlab {

struct RefGroup {
  int referents = 0;
  std::size_t markables = 0;
  double accuracy = 0.0;
  double exact = 0.0;
};

struct RefScores {
  double entity_accuracy = 0.0;  ///< over markable x 7 decisions
  double exact_match = 0.0;      ///< over markables
  std::size_t markables = 0;
  std::vector<RefGroup> groups;  ///< by gold referent count, non-empty groups only
};

/// Throws InvalidArgument when the sequences differ in length or are empty.
RefScores score_references(std::span<const EntityMask> predicted, std::span<const EntityMask> gold);

struct DialogueScore {
  std::string dialogue_id;
  Player perspective = Player::A;
  std::optional<double> ref_accuracy;  ///< mean per-markable entity accuracy
  std::optional<bool> tsel_correct;
};

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<double> tsel_accuracy;
  std::size_t tsel_examples = 0;
  std::optional<RefScores> ref;
  std::optional<double> ref_tsel_correlation;
  std::optional<double> dial_perplexity;
  std::map<int, double> selfplay;  ///< success rate per shared count
  std::vector<DialogueScore> dialogues;
};

/// Metrics of a frozen model over perspective examples whose REF items carry
/// the aggregated gold (dropped and generic markables are already excluded).
EvalReport evaluate_model(const GroundingModel& model, const std::vector<GroundingExample>& test_set);

/// Pearson correlation; empty when either series has zero variance.
std::optional<double> ref_tsel_correlation(std::span<const double> ref_accuracy, std::span<const double> tsel_success);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

/// Sample standard deviation (0 for a single value).
MeanSd mean_sd(std::span<const double> values);

struct VariantSummary {
  std::string variant;
  std::size_t seeds = 0;
  std::optional<MeanSd> tsel;
  std::optional<MeanSd> ref_accuracy;
  std::optional<MeanSd> ref_exact;
  std::optional<MeanSd> ref_tsel_correlation;
  std::map<int, MeanSd> selfplay;
};

/// Groups reports by variant, in the fixed TSEL .. TSEL-REF-DIAL order.
std::vector<VariantSummary> summarize(const std::vector<EvalReport>& reports);

struct GroupSummary {
  int referents = 0;
  MeanSd accuracy;
  MeanSd exact;
  double mean_count = 0.0;
};

/// Per-referent-count rows over seeds for one variant.
std::vector<GroupSummary> summarize_groups(const std::vector<EvalReport>& reports, const std::string& variant);

nlohmann::json to_json(const RefScores& s);
nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<VariantSummary>& s);
nlohmann::json to_json(const std::vector<GroupSummary>& g);

/// Percentages as "mean±sd"; missing cells are "-".
std::string variant_table_csv(const std::vector<VariantSummary>& rows);
std::string referent_count_table_csv(const std::vector<GroupSummary>& rows);

}  // namespace groundlab
