#include "groundlab/workbench.hpp"

#include <cstdio>
#include <cstdlib>

#include "groundlab/error.hpp"

namespace groundlab {

using nlohmann::json;

namespace {

std::size_t get_size(const Config& c, const std::string& key, std::size_t fallback) {
  const auto v = c.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw InvalidArgument("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

int get_i(const Config& c, const std::string& key, int fallback) {
  return static_cast<int>(c.get_int(key, fallback));
}

std::uint64_t get_seed(const Config& c, const std::string& key, std::uint64_t fallback) {
  const auto v = c.get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(*v, &used);
    if (used == v->size()) return s;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("config key '" + key + "' is not a seed: " + *v);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

ModelConfig model_config(const Config& c, ModelConfig b) {
  if (const auto v = c.get("model.variant")) b.variant = variant_from_string(*v);
  b.token_dim = get_size(c, "model.token_dim", b.token_dim);
  b.hidden_dim = get_size(c, "model.hidden_dim", b.hidden_dim);
  b.attribute_dim = get_size(c, "model.attribute_dim", b.attribute_dim);
  b.relational_dim = get_size(c, "model.relational_dim", b.relational_dim);
  b.attention_dim = get_size(c, "model.attention_dim", b.attention_dim);
  b.dropout = c.get_double("model.dropout", b.dropout);
  b.tsel_weight = c.get_double("model.tsel_weight", b.tsel_weight);
  b.ref_weight = c.get_double("model.ref_weight", b.ref_weight);
  b.dial_weight = c.get_double("model.dial_weight", b.dial_weight);
  b.adam.lr = c.get_double("model.lr", b.adam.lr);
  b.clip = c.get_double("model.clip", b.clip);
  b.epochs = get_i(c, "model.epochs", b.epochs);
  b.batch_size = get_i(c, "model.batch_size", b.batch_size);
  b.patience = get_i(c, "model.patience", b.patience);
  b.seed = get_seed(c, "seed", b.seed);
  b.ranges.size_min = c.get_double("scenario.size_min", b.ranges.size_min);
  b.ranges.size_max = c.get_double("scenario.size_max", b.ranges.size_max);
  b.validate();
  return b;
}

TaggerConfig tagger_config(const Config& c, TaggerConfig b) {
  b.token_dim = get_size(c, "tagger.token_dim", b.token_dim);
  b.hidden_dim = get_size(c, "tagger.hidden_dim", b.hidden_dim);
  b.dropout = c.get_double("tagger.dropout", b.dropout);
  b.adam.lr = c.get_double("tagger.lr", b.adam.lr);
  b.clip = c.get_double("tagger.clip", b.clip);
  b.epochs = get_i(c, "tagger.epochs", b.epochs);
  b.batch_size = get_i(c, "tagger.batch_size", b.batch_size);
  b.patience = get_i(c, "tagger.patience", b.patience);
  b.seed = get_seed(c, "seed", b.seed);
  b.validate();
  return b;
}

ProtocolConfig protocol_config(const Config& c, ProtocolConfig b) {
  b.temperature = c.get_double("selfplay.temperature", b.temperature);
  b.max_utterances = get_i(c, "selfplay.max_utterances", b.max_utterances);
  b.max_tokens = get_i(c, "selfplay.max_tokens", b.max_tokens);
  b.seed = get_seed(c, "seed", b.seed);
  b.validate();
  return b;
}

ScenarioConfig scenario_config(const Config& c, ScenarioConfig b) {
  b.world_min = c.get_double("scenario.world_min", b.world_min);
  b.world_max = c.get_double("scenario.world_max", b.world_max);
  b.view_radius = c.get_double("scenario.view_radius", b.view_radius);
  b.center_distance[0] = c.get_double("scenario.center_distance_4", b.center_distance[0]);
  b.center_distance[1] = c.get_double("scenario.center_distance_5", b.center_distance[1]);
  b.center_distance[2] = c.get_double("scenario.center_distance_6", b.center_distance[2]);
  b.size_min = c.get_double("scenario.size_min", b.size_min);
  b.size_max = c.get_double("scenario.size_max", b.size_max);
  b.min_separation = c.get_double("scenario.min_separation", b.min_separation);
  b.max_attempts = get_i(c, "scenario.max_attempts", b.max_attempts);
  b.validate();
  return b;
}

SyntheticConfig synthetic_config(const Config& c, SyntheticConfig b) {
  b.dialogues = get_i(c, "synthetic.dialogues", b.dialogues);
  b.seed = get_seed(c, "seed", b.seed);
  b.scenario = scenario_config(c, b.scenario);
  b.judgements_per_markable = get_i(c, "synthetic.judgements_per_markable", b.judgements_per_markable);
  b.max_proposals = get_i(c, "synthetic.max_proposals", b.max_proposals);
  b.extra_referent_rate = c.get_double("synthetic.extra_referent_rate", b.extra_referent_rate);
  b.missing_referent_rate = c.get_double("synthetic.missing_referent_rate", b.missing_referent_rate);
  b.ambiguous_rate = c.get_double("synthetic.ambiguous_rate", b.ambiguous_rate);
  b.unidentifiable_rate = c.get_double("synthetic.unidentifiable_rate", b.unidentifiable_rate);
  b.anaphora_rate = c.get_double("synthetic.anaphora_rate", b.anaphora_rate);
  b.opener_rate = c.get_double("synthetic.opener_rate", b.opener_rate);
  b.span_annotated_fraction = c.get_double("synthetic.span_annotated_fraction", b.span_annotated_fraction);
  b.span_annotators = get_i(c, "synthetic.span_annotators", b.span_annotators);
  b.spatial_words = c.get_bool("synthetic.spatial_words", b.spatial_words);
  return b;
}

std::optional<std::filesystem::path> data_root() {
  const char* v = std::getenv("GROUNDLAB_DATA");
  if (!v || !*v) return std::nullopt;
  return std::filesystem::path(v);
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (path.is_absolute() || std::filesystem::exists(path)) return path;
  if (const auto root = data_root()) return *root / path;
  return path;
}

json to_json(const DatasetSplit& s) { return {{"train", s.train}, {"valid", s.valid}, {"test", s.test}}; }

DatasetSplit split_from_json(const json& j) {
  try {
    return {j.at("train").get<std::vector<std::string>>(), j.at("valid").get<std::vector<std::string>>(),
            j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("split: ") + e.what());
  }
}

json gold_to_json(const AnnotatedCorpus& corpus, const GoldMap& gold) {
  static const char* sources[] = {"majority", "no_referent", "all_referents", "anaphora", "cataphora"};
  json out = json::object();
  for (const auto& [mid, g] : gold) {
    const auto& m = corpus.markables.at(mid);
    out[mid] = {{"referents", ids_from_mask(corpus.speaker_view(m), g.referents)},
                {"dropped", g.dropped},
                {"source", sources[static_cast<int>(g.source)]}};
  }
  return out;
}

json agreement_report(const AnnotatedCorpus& corpus, const AgreementOptions& options) {
  json out;
  out["referent"] = to_json(referent_agreement(corpus));
  const auto spans = span_agreement(corpus);
  out["span"] = {{"start", to_json(spans.start)}, {"end", to_json(spans.end)}, {"dialogues", spans.dialogues}};
  json rows = json::array();
  for (const auto& r : agreement_by_referent_count(corpus))
    rows.push_back({{"referents", r.referents},
                    {"agreement", r.agreement},
                    {"exact", r.exact},
                    {"judgement_pct", r.judgement_pct},
                    {"judgements", r.judgements},
                    {"pairs", r.pairs}});
  out["by_referent_count"] = rows;
  const auto corr = token_exact_match_correlation(corpus, options.min_token_count, options.unit);
  json toks = json::array();
  for (const auto& t : corr.tokens)
    toks.push_back({{"token", t.token}, {"rho", t.rho}, {"markables", t.markables}, {"pairs", t.pairs}});
  out["token_correlation"] = {{"unit", options.unit == CorrelationUnit::Markable ? "markable" : "judgement_pair"},
                              {"min_count", options.min_token_count},
                              {"tokens", toks},
                              {"zero_variance", corr.zero_variance}};
  const auto gold = build_gold(corpus);
  std::vector<std::string> present;
  json empty = json::array();
  for (const auto& [adj, samples] : referent_colors_by_adjective(corpus, gold, options.adjectives))
    (samples.empty() ? empty.push_back(adj) : present.push_back(adj));
  json kde = json::object();
  for (const auto& [adj, density] : color_kde(corpus, gold, present, options.bandwidth)) {
    json curve = json::array();
    for (const auto& [x, y] : density.curve(0.0, 256.0, options.kde_points)) curve.push_back({x, y});
    kde[adj] = {{"samples", density.samples().size()}, {"bandwidth", density.bandwidth()}, {"curve", curve}};
  }
  out["color_kde"] = kde;
  out["color_kde_without_samples"] = empty;
  return out;
}

std::string referent_count_csv(const std::vector<ReferentCountRow>& rows) {
  std::string out = "# Referents,Agreement,Exact Match,% Judgements,Judgements,Pairs\n";
  for (const auto& r : rows)
    out += std::to_string(r.referents) + "," + fmt(100.0 * r.agreement, 2) + "," + fmt(100.0 * r.exact, 2) + "," +
           fmt(r.judgement_pct, 2) + "," + std::to_string(r.judgements) + "," + std::to_string(r.pairs) + "\n";
  return out;
}

std::string token_correlation_csv(const TokenCorrelationResult& r) {
  std::string out = "token,rho,markables,pairs\n";
  for (const auto& t : r.tokens)
    out += t.token + "," + fmt(t.rho) + "," + std::to_string(t.markables) + "," + std::to_string(t.pairs) + "\n";
  return out;
}

TrainedModel train_on_split(const AnnotatedCorpus& corpus, const DatasetSplit& split, const ModelConfig& config,
                            const TrainOptions& options) {
  GroundingModel model(config, Vocabulary::build(corpus, split.train));
  const auto train_set = model_examples(model, corpus, split.train);
  const auto valid_set = model_examples(model, corpus, split.valid);
  auto result = train(model, train_set, valid_set, options);
  return {std::move(model), std::move(result)};
}

std::vector<GroundingExample> model_examples(const GroundingModel& model, const AnnotatedCorpus& corpus,
                                             const std::vector<std::string>& ids) {
  return make_examples(corpus, build_gold(corpus), ids, model.vocabulary(), model.config().ranges);
}

TrainedTagger train_tagger_on_split(const AnnotatedCorpus& corpus, const DatasetSplit& split,
                                    const TaggerConfig& config) {
  MarkableTagger tagger(config, Vocabulary::build(corpus, split.train));
  const auto train_set = tagger_examples(corpus, split.train, tagger.vocabulary());
  const auto valid_set = tagger_examples(corpus, split.valid, tagger.vocabulary());
  auto result = train_tagger(tagger, train_set, valid_set);
  return {std::move(tagger), std::move(result)};
}

}  // namespace groundlab
