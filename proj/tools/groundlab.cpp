#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "groundlab/agreement.hpp"
#include "groundlab/config.hpp"
#include "groundlab/corpus.hpp"
#include "groundlab/error.hpp"
#include "groundlab/evaluation.hpp"
#include "groundlab/import.hpp"
#include "groundlab/io.hpp"
#include "groundlab/model.hpp"
#include "groundlab/render.hpp"
#include "groundlab/scenario.hpp"
#include "groundlab/selfplay.hpp"
#include "groundlab/synthetic.hpp"
#include "groundlab/tagger.hpp"
#include "groundlab/workbench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace groundlab;

namespace {

struct Binding {
  CLI::Option* option;
  std::string key;
  std::shared_ptr<std::string> value;
};

class Settings {
 public:
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<std::string>();
    bindings_.push_back({app->add_option(flag, *value, help + " (" + key + ")"), key, value});
  }

  Config resolve(const std::string& config_path, const std::vector<std::string>& sets) const {
    Config c = config_path.empty() ? Config::parse("version = 1") : Config::load(config_path);
    for (const auto& b : bindings_)
      if (b.option->count() > 0) c.set(b.key, *b.value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects key=value, got " + s);
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return c;
  }

 private:
  std::vector<Binding> bindings_;
};

void emit(const json& j, const std::string& out) {
  if (out.empty())
    std::cout << j.dump(1) << "\n";
  else
    write_json(out, j);
}

void emit_text(const std::string& text, const std::string& out) {
  if (out.empty())
    std::cout << text;
  else
    write_file_atomic(out, text);
}

std::uint64_t seed_of(const Config& c) { return static_cast<std::uint64_t>(c.get_int("seed", 0)); }

AnnotatedCorpus open_corpus(const std::string& dir, int min_judgements) {
  if (dir.empty()) {
    if (const auto root = data_root()) return load_corpus(*root, {min_judgements});
    throw InvalidArgument("--corpus is required when GROUNDLAB_DATA is unset");
  }
  return load_corpus(resolve_data_path(dir), {min_judgements});
}

DatasetSplit open_split(const AnnotatedCorpus& corpus, const std::string& path, const Config& c) {
  if (!path.empty()) return split_from_json(read_json(path));
  return split_dataset(corpus, seed_of(c));
}

std::vector<Message> messages_of(const Dialogue& d) {
  std::vector<Message> out;
  for (const auto* m : d.messages()) out.push_back(*m);
  return out;
}

std::vector<RenderedMarkable> predicted_markables(const GameTranscript& t) {
  std::vector<RenderedMarkable> out;
  for (const auto& m : t.markables)
    out.push_back({m.utterance_index, m.start_token, m.end_token,
                   t.messages.at(static_cast<std::size_t>(m.utterance_index)).speaker, m.referents});
  return out;
}

std::map<std::string, Scenario> read_scenarios(const std::string& path) {
  std::map<std::string, Scenario> out;
  for (const auto& j : read_json(path)) {
    auto s = scenario_from_json(j);
    out.emplace(s.id, std::move(s));
  }
  return out;
}

json scenarios_json(const std::vector<Scenario>& scenarios) {
  json out = json::array();
  for (const auto& s : scenarios) out.push_back(to_json(s));
  return out;
}

std::string stats_csv(const CorpusStats& s, const AgreementReport& r) {
  std::ostringstream out;
  out << "statistic,value\n";
  const auto fields = to_json(s);
  for (const auto& [k, v] : fields.items()) out << k << "," << v.dump() << "\n";
  out << "referent_agreement," << 100.0 * r.observed << "\n";
  out << "referent_multi_pi," << (r.multi_pi ? std::to_string(100.0 * *r.multi_pi) : "") << "\n";
  out << "referent_exact_match," << 100.0 * r.exact_match << "\n";
  return out.str();
}

json stats_json(const AnnotatedCorpus& corpus) {
  json out = to_json(corpus_stats(corpus));
  out["referent_agreement"] = to_json(referent_agreement(corpus));
  return out;
}

AgreementOptions agreement_options(const Config& c) {
  AgreementOptions o;
  o.min_token_count = static_cast<std::size_t>(c.get_int("agreement.min_count", 20));
  const auto unit = c.get_string("agreement.unit", "markable");
  if (unit == "pair" || unit == "judgement_pair")
    o.unit = CorrelationUnit::JudgementPair;
  else if (unit != "markable")
    throw InvalidArgument("agreement.unit must be markable or pair");
  if (const auto adj = c.get("agreement.adjectives")) {
    o.adjectives.clear();
    std::stringstream ss(*adj);
    for (std::string a; std::getline(ss, a, ',');)
      if (!a.empty()) o.adjectives.push_back(a);
  }
  if (const auto bw = c.get("agreement.bandwidth"); bw && *bw != "silverman")
    o.bandwidth = {Bandwidth::Rule::Fixed, c.get_double("agreement.bandwidth", 0.0)};
  return o;
}

AgentFactory agent_factory(const std::string& agent, const GroundingModel* model, const ProtocolConfig& protocol) {
  if (agent == "model") {
    if (!model) throw InvalidArgument("--model is required for model agents");
    return [model, protocol] { return std::make_unique<ModelAgent>(*model, protocol); };
  }
  if (agent == "random") return [] { return std::make_unique<RandomAgent>(); };
  if (agent == "scripted") return [] { return std::make_unique<ScriptedAgent>(true); };
  throw InvalidArgument("unknown agent " + agent);
}

void write_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groundlab: common grounding lab"};
  app.require_subcommand(1);
  app.fallthrough();

  Settings settings;
  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 1;
  app.add_option("--config", config_path, "Key-value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override a configuration key (key=value)");
  settings.bind(&app, "--seed", "seed", "Random seed");
  app.add_option("--jobs", jobs, "Worker threads for batch work")->check(CLI::PositiveNumber);

  std::string corpus_dir, out, split_path, model_stem, tagger_stem, dialogue_id, markable_id;
  int min_judgements = 3;

  auto* generate = app.add_subcommand("generate", "Generate scenarios or a synthetic annotated corpus");
  std::string kind = "scenarios";
  std::vector<int> shared{4, 5, 6};
  int count = 10;
  generate->add_option("--kind", kind, "scenarios or corpus")->check(CLI::IsMember({"scenarios", "corpus"}));
  generate->add_option("--shared", shared, "Shared entity counts")->delimiter(',');
  generate->add_option("--count", count, "Scenarios per shared count")->check(CLI::PositiveNumber);
  settings.bind(generate, "--dialogues", "synthetic.dialogues", "Synthetic dialogues");
  generate->add_option("--out", out, "Output file (scenarios) or directory (corpus)")->required();

  auto* import = app.add_subcommand("import", "Convert released dataset files to the canonical corpus");
  std::string from;
  import->add_option("--from", from, "Directory holding the released files")->required();
  import->add_option("--out", out, "Canonical corpus directory")->required();
  import->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");

  auto* validate = app.add_subcommand("validate", "Validate a canonical corpus");
  validate->add_option("--corpus", corpus_dir, "Corpus directory");
  validate->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");

  auto* stats = app.add_subcommand("stats", "Markable and referent statistics");
  std::string format = "json";
  stats->add_option("--corpus", corpus_dir, "Corpus directory");
  stats->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  stats->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  stats->add_option("--out", out, "Output file");

  auto* agreement = app.add_subcommand("agreement", "Agreement, correlation and color-density analytics");
  agreement->add_option("--corpus", corpus_dir, "Corpus directory");
  agreement->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  settings.bind(agreement, "--min-count", "agreement.min_count", "Minimum token frequency for correlations");
  settings.bind(agreement, "--unit", "agreement.unit", "Correlation unit: markable or pair");
  settings.bind(agreement, "--adjectives", "agreement.adjectives", "Comma separated color adjectives");
  settings.bind(agreement, "--bandwidth", "agreement.bandwidth", "KDE bandwidth or silverman");
  agreement->add_option("--out", out, "Output directory");

  auto* aggregate = app.add_subcommand("aggregate", "Majority-vote gold referents");
  aggregate->add_option("--corpus", corpus_dir, "Corpus directory");
  aggregate->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  aggregate->add_option("--out", out, "Output file");

  auto* split = app.add_subcommand("split", "Dialogue-level train/valid/test partition");
  split->add_option("--corpus", corpus_dir, "Corpus directory");
  split->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  split->add_option("--out", out, "Output file");

  auto* train_cmd = app.add_subcommand("train", "Train a grounding model");
  train_cmd->add_option("--corpus", corpus_dir, "Corpus directory");
  train_cmd->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  train_cmd->add_option("--split", split_path, "Split file (computed from the seed when absent)");
  train_cmd->add_option("--out", out, "Checkpoint stem")->required();
  settings.bind(train_cmd, "--variant", "model.variant", "TSEL, REF, TSEL-REF, TSEL-DIAL or TSEL-REF-DIAL");
  settings.bind(train_cmd, "--epochs", "model.epochs", "Maximum epochs");
  settings.bind(train_cmd, "--hidden", "model.hidden_dim", "Recurrent hidden size");
  settings.bind(train_cmd, "--lr", "model.lr", "Adam learning rate");
  settings.bind(train_cmd, "--dropout", "model.dropout", "Dropout rate");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate models and build result tables");
  std::vector<std::string> model_stems, report_files;
  int selfplay_games = 0;
  evaluate->add_option("--corpus", corpus_dir, "Corpus directory");
  evaluate->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  evaluate->add_option("--split", split_path, "Split file (computed from the seed when absent)");
  evaluate->add_option("--model", model_stems, "Checkpoint stems to evaluate");
  evaluate->add_option("--reports", report_files, "Existing evaluation reports to include");
  evaluate->add_option("--selfplay-games", selfplay_games, "Selfplay games per shared count for each model");
  evaluate->add_option("--out", out, "Output directory")->required();

  auto* tag = app.add_subcommand("tag", "Train or apply the markable tagger");
  tag->add_option("--corpus", corpus_dir, "Corpus directory");
  tag->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  tag->add_option("--split", split_path, "Split file (computed from the seed when absent)");
  tag->add_option("--model", tagger_stem, "Existing tagger stem; tags the test split instead of training");
  tag->add_option("--out", out, "Tagger stem when training, predictions file when tagging")->required();
  settings.bind(tag, "--epochs", "tagger.epochs", "Maximum epochs");

  auto* selfplay = app.add_subcommand("selfplay", "Play reference games between agents");
  std::string agent = "model";
  selfplay->add_option("--agent", agent, "model, random or scripted")->check(CLI::IsMember({"model", "random", "scripted"}));
  selfplay->add_option("--model", model_stem, "Grounding model stem for model agents");
  selfplay->add_option("--tagger", tagger_stem, "Tagger stem used to annotate transcripts");
  selfplay->add_option("--shared", shared, "Shared entity counts")->delimiter(',');
  selfplay->add_option("--games", count, "Games per shared count")->check(CLI::PositiveNumber);
  settings.bind(selfplay, "--temperature", "selfplay.temperature", "Sampling temperature");
  selfplay->add_option("--out", out, "Output directory (summary.csv, transcripts.jsonl, scenarios.json)");

  auto* render = app.add_subcommand("render", "Render a scenario, dialogue, judgements or selfplay game as SVG");
  std::string scenarios_file, transcripts_file, scenario_id, view = "both";
  int index = -1;
  render->add_option("--corpus", corpus_dir, "Corpus directory");
  render->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  render->add_option("--dialogue", dialogue_id, "Corpus dialogue with gold referents");
  render->add_option("--markable", markable_id, "Corpus markable whose judgements are shown side by side");
  render->add_option("--scenarios", scenarios_file, "Scenario file");
  render->add_option("--scenario", scenario_id, "Scenario id within the scenario file");
  render->add_option("--transcripts", transcripts_file, "Selfplay transcripts (needs --scenarios)");
  render->add_option("--index", index, "Transcript index");
  render->add_option("--view", view, "A, B or both")->check(CLI::IsMember({"A", "B", "both"}));
  render->add_option("--out", out, "SVG file")->required();

  auto* report = app.add_subcommand("report", "Bundle corpus analytics and result tables");
  report->add_option("--corpus", corpus_dir, "Corpus directory");
  report->add_option("--min-judgements", min_judgements, "Minimum judgements per judged markable");
  report->add_option("--reports", report_files, "Evaluation reports");
  report->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    write_error("usage", e.what());
    return 2;
  }

  try {
    const Config config = settings.resolve(config_path, sets);
    const auto seed = seed_of(config);

    if (generate->parsed()) {
      const auto sc = scenario_config(config);
      if (kind == "corpus") {
        auto syn = synthetic_config(config);
        syn.scenario = sc;
        const auto corpus = synthesize_corpus(syn);
        save_corpus(corpus, out);
        emit(to_json(corpus_stats(corpus)), "");
      } else {
        std::vector<Scenario> scenarios;
        std::uint64_t k = 0;
        for (int num_shared : shared)
          for (int i = 0; i < count; ++i, ++k) {
            Rng rng(Rng::derive_seed(seed, k));
            char id[48];
            std::snprintf(id, sizeof id, "gen%d_%05d", num_shared, i);
            scenarios.push_back(generate_scenario(sc, num_shared, rng, id));
          }
        write_json(out, scenarios_json(scenarios));
        emit({{"scenarios", scenarios.size()}, {"out", out}}, "");
      }
    } else if (import->parsed()) {
      auto result = import_released(resolve_data_path(from));
      const int need = result.report.aggregated_only ? 1 : min_judgements;
      result.corpus.validate({need});
      save_corpus(result.corpus, out);
      write_json(fs::path(out) / "import_report.json", to_json(result.report));
      emit(to_json(result.report), "");
    } else if (validate->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      emit({{"status", "ok"},
            {"scenarios", corpus.scenarios.size()},
            {"dialogues", corpus.dialogues.size()},
            {"markables", corpus.markables.size()},
            {"judgements", corpus.judgements.size()}},
           "");
    } else if (stats->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      if (format == "csv")
        emit_text(stats_csv(corpus_stats(corpus), referent_agreement(corpus)), out);
      else
        emit(stats_json(corpus), out);
    } else if (agreement->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      const auto options = agreement_options(config);
      const auto doc = agreement_report(corpus, options);
      if (out.empty()) {
        emit(doc, "");
      } else {
        fs::create_directories(out);
        write_json(fs::path(out) / "agreement.json", doc);
        write_file_atomic(fs::path(out) / "referent_counts.csv",
                          referent_count_csv(agreement_by_referent_count(corpus)));
        write_file_atomic(fs::path(out) / "token_correlation.csv",
                          token_correlation_csv(token_exact_match_correlation(corpus, options.min_token_count,
                                                                              options.unit)));
      }
    } else if (aggregate->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      emit(gold_to_json(corpus, build_gold(corpus)), out);
    } else if (split->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      emit(to_json(split_dataset(corpus, seed)), out);
    } else if (train_cmd->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      const auto sp = open_split(corpus, split_path, config);
      const auto mc = model_config(config);
      TrainOptions options;
      options.metrics_path = out + ".metrics.jsonl";
      options.on_epoch = [](const EpochMetrics& m) { std::cerr << to_json(m).dump() << "\n"; };
      auto trained = train_on_split(corpus, sp, mc, options);
      json history = json::array();
      for (const auto& m : trained.result.history) history.push_back(to_json(m));
      trained.model.save(out, history);
      write_file_atomic(out + ".config", config.dump());
      emit({{"variant", to_string(mc.variant)},
            {"best_epoch", trained.result.best_epoch},
            {"best_valid_loss", trained.result.best_valid_loss},
            {"epochs", trained.result.history.size()},
            {"out", out}},
           "");
    } else if (evaluate->parsed()) {
      std::vector<EvalReport> reports;
      for (const auto& f : report_files) reports.push_back(eval_report_from_json(read_json(f)));
      fs::create_directories(out);
      if (!model_stems.empty()) {
        const auto corpus = open_corpus(corpus_dir, min_judgements);
        const auto sp = open_split(corpus, split_path, config);
        for (std::size_t i = 0; i < model_stems.size(); ++i) {
          const auto model = GroundingModel::load(model_stems[i]);
          auto r = evaluate_model(model, model_examples(model, corpus, sp.test));
          if (selfplay_games > 0) {
            auto protocol = protocol_config(config);
            BatchOptions bo;
            bo.games = selfplay_games;
            bo.jobs = jobs;
            bo.scenario = scenario_config(config);
            for (const auto& row : run_batch(agent_factory("model", &model, protocol), protocol, bo).rows)
              r.selfplay[row.num_shared] = row.rate();
          }
          write_json(fs::path(out) / ("report_" + std::to_string(i) + ".json"), to_json(r));
          reports.push_back(std::move(r));
        }
      }
      if (reports.empty()) throw InvalidArgument("nothing to evaluate: pass --model or --reports");
      const auto summary = summarize(reports);
      write_file_atomic(fs::path(out) / "variants.csv", variant_table_csv(summary));
      const auto groups = summarize_groups(reports, to_string(Variant::TselRefDial));
      write_file_atomic(fs::path(out) / "referent_counts.csv", referent_count_table_csv(groups));
      write_json(fs::path(out) / "summary.json", {{"variants", to_json(summary)}, {"groups", to_json(groups)}});
      std::cout << variant_table_csv(summary);
    } else if (tag->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      const auto sp = open_split(corpus, split_path, config);
      if (tagger_stem.empty()) {
        auto trained = train_tagger_on_split(corpus, sp, tagger_config(config));
        json history = json::array();
        for (const auto& e : trained.result.history)
          history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid", to_json(e.valid)}});
        trained.tagger.save(out, history);
        write_file_atomic(out + ".config", config.dump());
        const auto test = tagger_examples(corpus, sp.test, trained.tagger.vocabulary());
        emit({{"best_epoch", trained.result.best_epoch},
              {"valid_token_accuracy", trained.result.best_accuracy},
              {"test", to_json(evaluate_tagger(trained.tagger, test))}},
             "");
      } else {
        const auto tagger = MarkableTagger::load(tagger_stem);
        json predicted = json::object();
        for (const auto& id : sp.test) {
          json ms = json::array();
          for (const auto& m : tag_dialogue(tagger, corpus.dialogues.at(id))) ms.push_back(to_json(m));
          predicted[id] = ms;
        }
        write_json(out, predicted);
        emit(to_json(evaluate_tagger(tagger, tagger_examples(corpus, sp.test, tagger.vocabulary()))), "");
      }
    } else if (selfplay->parsed()) {
      std::optional<GroundingModel> model;
      if (!model_stem.empty()) model = GroundingModel::load(model_stem);
      const auto protocol = protocol_config(config);
      BatchOptions bo;
      bo.shared = shared;
      bo.games = selfplay->get_option("--games")->count() ? count : 1000;
      bo.jobs = jobs;
      bo.scenario = scenario_config(config);
      auto result = run_batch(agent_factory(agent, model ? &*model : nullptr, protocol), protocol, bo);
      if (!tagger_stem.empty()) {
        if (!model) throw InvalidArgument("--tagger needs --model to resolve predicted markables");
        const auto tagger = MarkableTagger::load(tagger_stem);
        for (std::size_t i = 0; i < result.transcripts.size(); ++i)
          annotate_transcript(result.transcripts[i], result.scenarios[i], *model, tagger);
      }
      const auto csv = summary_csv(result.rows);
      if (!out.empty()) {
        fs::create_directories(out);
        write_file_atomic(fs::path(out) / "summary.csv", csv);
        write_transcripts(fs::path(out) / "transcripts.jsonl", result.transcripts);
        write_json(fs::path(out) / "scenarios.json", scenarios_json(result.scenarios));
      }
      std::cout << csv;
    } else if (render->parsed()) {
      std::string svg;
      if (!markable_id.empty()) {
        svg = render_judgements(open_corpus(corpus_dir, min_judgements), markable_id);
      } else if (!dialogue_id.empty()) {
        const auto corpus = open_corpus(corpus_dir, min_judgements);
        const auto it = corpus.dialogues.find(dialogue_id);
        if (it == corpus.dialogues.end()) throw InvalidArgument("unknown dialogue " + dialogue_id);
        svg = render_dialogue(corpus.scenario_of(it->second), messages_of(it->second),
                              gold_markables(corpus, dialogue_id, build_gold(corpus)));
      } else if (!transcripts_file.empty()) {
        if (scenarios_file.empty()) throw InvalidArgument("--transcripts needs --scenarios");
        const auto games = read_transcripts(transcripts_file);
        if (index < 0 || index >= static_cast<int>(games.size()))
          throw InvalidArgument("--index out of range (0.." + std::to_string(games.size()) + ")");
        const auto& t = games[static_cast<std::size_t>(index)];
        const auto scenarios = read_scenarios(scenarios_file);
        const auto it = scenarios.find(t.scenario_id);
        if (it == scenarios.end()) throw InvalidArgument("scenario " + t.scenario_id + " not in " + scenarios_file);
        svg = render_dialogue(it->second, t.messages, predicted_markables(t));
      } else if (!scenarios_file.empty()) {
        const auto scenarios = read_scenarios(scenarios_file);
        if (scenarios.empty()) throw InvalidArgument("no scenarios in " + scenarios_file);
        const auto it = scenario_id.empty() ? scenarios.begin() : scenarios.find(scenario_id);
        if (it == scenarios.end()) throw InvalidArgument("unknown scenario " + scenario_id);
        if (view == "both")
          svg = render_panels(it->second, {{"A", Player::A, {}}, {"B", Player::B, {}}});
        else
          svg = render_view(it->second, player_from_string(view));
      } else {
        throw InvalidArgument("render needs --markable, --dialogue, --transcripts or --scenarios");
      }
      write_file_atomic(out, svg);
    } else if (report->parsed()) {
      const auto corpus = open_corpus(corpus_dir, min_judgements);
      const auto options = agreement_options(config);
      fs::create_directories(out);
      const fs::path dir = out;
      std::vector<std::string> files{"config.txt", "stats.json", "agreement.json", "referent_counts.csv",
                                     "token_correlation.csv"};
      write_file_atomic(dir / "config.txt", config.dump());
      write_json(dir / "stats.json", stats_json(corpus));
      write_json(dir / "agreement.json", agreement_report(corpus, options));
      write_file_atomic(dir / "referent_counts.csv", referent_count_csv(agreement_by_referent_count(corpus)));
      write_file_atomic(dir / "token_correlation.csv",
                        token_correlation_csv(token_exact_match_correlation(corpus, options.min_token_count,
                                                                            options.unit)));
      if (!report_files.empty()) {
        std::vector<EvalReport> reports;
        for (const auto& f : report_files) reports.push_back(eval_report_from_json(read_json(f)));
        const auto summary = summarize(reports);
        write_file_atomic(dir / "variants.csv", variant_table_csv(summary));
        write_file_atomic(dir / "referent_counts.csv", referent_count_table_csv(summarize_groups(reports, to_string(Variant::TselRefDial))));
        files.push_back("variants.csv");
        files.push_back("referent_counts.csv");
      }
      write_json(dir / "manifest.json", {{"files", files}});
      emit({{"out", out}, {"files", files}}, "");
    }
  } catch (const Error& e) {
    write_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error("internal", e.what());
    return 1;
  }
  return 0;
}
