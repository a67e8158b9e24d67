#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/agreement.hpp"
#include "groundlab/config.hpp"
#include "groundlab/corpus.hpp"
#include "groundlab/model.hpp"
#include "groundlab/selfplay.hpp"
#include "groundlab/synthetic.hpp"
#include "groundlab/tagger.hpp"

namespace groundlab {

/// Typed views of a Config. Missing keys keep the values of `base`.
ModelConfig model_config(const Config& c, ModelConfig base = {});
TaggerConfig tagger_config(const Config& c, TaggerConfig base = {});
ProtocolConfig protocol_config(const Config& c, ProtocolConfig base = {});
ScenarioConfig scenario_config(const Config& c, ScenarioConfig base = {});
SyntheticConfig synthetic_config(const Config& c, SyntheticConfig base = {});

/// Data root from GROUNDLAB_DATA, if set.
std::optional<std::filesystem::path> data_root();
/// `path` as given when it exists or is absolute, otherwise under the data root.
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

nlohmann::json to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const nlohmann::json& j);

/// Gold referents as entity ids of the speaker's view.
nlohmann::json gold_to_json(const AnnotatedCorpus& corpus, const GoldMap& gold);

struct AgreementOptions {
  std::size_t min_token_count = 20;
  CorrelationUnit unit = CorrelationUnit::Markable;
  std::vector<std::string> adjectives{"black", "dark", "gray", "grey", "light", "white"};
  Bandwidth bandwidth;
  int kde_points = 256;
};

/// Referent agreement, span agreement, per-referent-count rows, token
/// correlations and color densities in one document.
nlohmann::json agreement_report(const AnnotatedCorpus& corpus, const AgreementOptions& options = {});

std::string referent_count_csv(const std::vector<ReferentCountRow>& rows);
std::string token_correlation_csv(const TokenCorrelationResult& r);

struct TrainedModel {
  GroundingModel model;
  TrainResult result;
};

/// Vocabulary from the training split, majority gold, both perspectives per
/// dialogue, then joint training.
TrainedModel train_on_split(const AnnotatedCorpus& corpus, const DatasetSplit& split, const ModelConfig& config,
                            const TrainOptions& options = {});

/// Examples of `ids` in the model's vocabulary.
std::vector<GroundingExample> model_examples(const GroundingModel& model, const AnnotatedCorpus& corpus,
                                             const std::vector<std::string>& ids);

struct TrainedTagger {
  MarkableTagger tagger;
  TaggerTrainResult result;
};

TrainedTagger train_tagger_on_split(const AnnotatedCorpus& corpus, const DatasetSplit& split,
                                    const TaggerConfig& config);

}  // namespace groundlab
