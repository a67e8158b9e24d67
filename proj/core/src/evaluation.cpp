#include "groundlab/evaluation.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "groundlab/error.hpp"
#include "groundlab/stats.hpp"

namespace groundlab {

using nlohmann::json;

RefScores score_references(std::span<const EntityMask> predicted, std::span<const EntityMask> gold) {
  if (predicted.size() != gold.size()) throw InvalidArgument("prediction and gold counts differ");
  if (gold.empty()) throw InvalidArgument("no markables to evaluate");
  struct Acc {
    std::size_t n = 0, correct = 0, exact = 0;
  };
  std::array<Acc, kViewSize + 1> groups{};
  Acc all;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto diff = predicted[i] ^ gold[i];
    const std::size_t correct = kViewSize - diff.count();
    for (auto* a : {&all, &groups[gold[i].count()]}) {
      ++a->n;
      a->correct += correct;
      a->exact += diff.none();
    }
  }
  const auto acc = [](const Acc& a) { return static_cast<double>(a.correct) / (kViewSize * static_cast<double>(a.n)); };
  const auto ex = [](const Acc& a) { return static_cast<double>(a.exact) / static_cast<double>(a.n); };
  RefScores s;
  s.markables = all.n;
  s.entity_accuracy = acc(all);
  s.exact_match = ex(all);
  for (int k = 0; k <= kViewSize; ++k) {
    const auto& g = groups[static_cast<std::size_t>(k)];
    if (g.n) s.groups.push_back({k, g.n, acc(g), ex(g)});
  }
  return s;
}

std::optional<double> ref_tsel_correlation(std::span<const double> ref_accuracy, std::span<const double> tsel_success) {
  if (ref_accuracy.size() != tsel_success.size()) throw InvalidArgument("correlation series differ in length");
  if (ref_accuracy.size() < 2) return std::nullopt;
  return pearson(ref_accuracy, tsel_success);
}

EvalReport evaluate_model(const GroundingModel& model, const std::vector<GroundingExample>& test_set) {
  if (test_set.empty()) throw InvalidArgument("test split is empty");
  const auto v = model.config().variant;
  EvalReport r;
  r.variant = to_string(v);
  r.seed = model.config().seed;
  std::vector<EntityMask> pred, gold;
  std::size_t tsel_correct = 0;
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : test_set) {
    const auto p = model.predict(ex);
    DialogueScore d;
    d.dialogue_id = ex.dialogue_id;
    d.perspective = ex.perspective;
    if (uses_tsel(v) && ex.selection >= 0) {
      d.tsel_correct = p.tsel_argmax == ex.selection;
      tsel_correct += *d.tsel_correct;
      ++r.tsel_examples;
    }
    if (uses_ref(v) && !ex.refs.empty()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ex.refs.size(); ++i) {
        pred.push_back(p.ref_mask[i]);
        gold.push_back(ex.refs[i].gold);
        acc += static_cast<double>(kViewSize - (p.ref_mask[i] ^ ex.refs[i].gold).count()) / kViewSize;
      }
      d.ref_accuracy = acc / static_cast<double>(ex.refs.size());
    }
    nll += p.dial_nll;
    tokens += p.dial_tokens;
    r.dialogues.push_back(d);
  }
  if (r.tsel_examples) r.tsel_accuracy = static_cast<double>(tsel_correct) / static_cast<double>(r.tsel_examples);
  if (!gold.empty()) r.ref = score_references(pred, gold);
  if (tokens) r.dial_perplexity = std::exp(nll / static_cast<double>(tokens));
  std::vector<double> xs, ys;
  for (const auto& d : r.dialogues)
    if (d.ref_accuracy && d.tsel_correct) {
      xs.push_back(*d.ref_accuracy);
      ys.push_back(*d.tsel_correct ? 1.0 : 0.0);
    }
  if (!xs.empty()) r.ref_tsel_correlation = ref_tsel_correlation(xs, ys);
  return r;
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd m;
  m.n = values.size();
  if (values.empty()) return m;
  m.mean = mean(values);
  m.sd = values.size() > 1 ? stddev(values) : 0.0;
  return m;
}

namespace {

const Variant kOrder[] = {Variant::Tsel, Variant::Ref, Variant::TselRef, Variant::TselDial, Variant::TselRefDial};

std::optional<MeanSd> maybe(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return mean_sd(v);
}

}  // namespace

std::vector<VariantSummary> summarize(const std::vector<EvalReport>& reports) {
  std::vector<VariantSummary> out;
  for (auto v : kOrder) {
    const auto name = to_string(v);
    std::vector<double> tsel, acc, exact, corr;
    std::map<int, std::vector<double>> sp;
    std::size_t seeds = 0;
    for (const auto& r : reports) {
      if (r.variant != name) continue;
      ++seeds;
      if (r.tsel_accuracy) tsel.push_back(*r.tsel_accuracy);
      if (r.ref) {
        acc.push_back(r.ref->entity_accuracy);
        exact.push_back(r.ref->exact_match);
      }
      if (r.ref_tsel_correlation) corr.push_back(*r.ref_tsel_correlation);
      for (const auto& [k, rate] : r.selfplay) sp[k].push_back(rate);
    }
    if (!seeds) continue;
    VariantSummary s{name, seeds, maybe(tsel), maybe(acc), maybe(exact), maybe(corr), {}};
    for (const auto& [k, rates] : sp) s.selfplay[k] = mean_sd(rates);
    out.push_back(s);
  }
  return out;
}

std::vector<GroupSummary> summarize_groups(const std::vector<EvalReport>& reports, const std::string& variant) {
  std::map<int, std::vector<double>> acc, exact, count;
  std::size_t runs = 0;
  for (const auto& r : reports) {
    if (r.variant != variant || !r.ref) continue;
    ++runs;
    for (const auto& g : r.ref->groups) {
      acc[g.referents].push_back(g.accuracy);
      exact[g.referents].push_back(g.exact);
      count[g.referents].push_back(static_cast<double>(g.markables));
    }
  }
  std::vector<GroupSummary> out;
  for (const auto& [k, a] : acc) {
    double total = 0.0;
    for (double c : count[k]) total += c;
    out.push_back({k, mean_sd(a), mean_sd(exact[k]), total / static_cast<double>(runs)});
  }
  return out;
}

namespace {

json mean_sd_json(const std::optional<MeanSd>& m) {
  if (!m) return nullptr;
  return {{"mean", m->mean}, {"sd", m->sd}, {"n", m->n}};
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const RefScores& s) {
  json groups = json::array();
  for (const auto& g : s.groups)
    groups.push_back({{"referents", g.referents}, {"markables", g.markables}, {"accuracy", g.accuracy}, {"exact", g.exact}});
  return {{"entity_accuracy", s.entity_accuracy}, {"exact_match", s.exact_match}, {"markables", s.markables}, {"groups", groups}};
}

json to_json(const EvalReport& r) {
  json dialogues = json::array();
  for (const auto& d : r.dialogues)
    dialogues.push_back({{"dialogue_id", d.dialogue_id},
                         {"perspective", to_string(d.perspective)},
                         {"ref_accuracy", opt(d.ref_accuracy)},
                         {"tsel_correct", opt(d.tsel_correct)}});
  json selfplay = json::object();
  for (const auto& [k, v] : r.selfplay) selfplay[std::to_string(k)] = v;
  return {{"variant", r.variant},
          {"seed", r.seed},
          {"tsel_accuracy", opt(r.tsel_accuracy)},
          {"tsel_examples", r.tsel_examples},
          {"ref", r.ref ? to_json(*r.ref) : json(nullptr)},
          {"ref_tsel_correlation", opt(r.ref_tsel_correlation)},
          {"dial_perplexity", opt(r.dial_perplexity)},
          {"selfplay", selfplay},
          {"dialogues", dialogues}};
}

EvalReport eval_report_from_json(const json& j) {
  try {
    EvalReport r;
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("tsel_accuracy").is_null()) r.tsel_accuracy = j.at("tsel_accuracy").get<double>();
    r.tsel_examples = j.at("tsel_examples").get<std::size_t>();
    if (!j.at("ref").is_null()) {
      const auto& f = j.at("ref");
      RefScores s;
      s.entity_accuracy = f.at("entity_accuracy").get<double>();
      s.exact_match = f.at("exact_match").get<double>();
      s.markables = f.at("markables").get<std::size_t>();
      for (const auto& g : f.at("groups"))
        s.groups.push_back({g.at("referents").get<int>(), g.at("markables").get<std::size_t>(),
                            g.at("accuracy").get<double>(), g.at("exact").get<double>()});
      r.ref = s;
    }
    if (!j.at("ref_tsel_correlation").is_null()) r.ref_tsel_correlation = j.at("ref_tsel_correlation").get<double>();
    if (!j.at("dial_perplexity").is_null()) r.dial_perplexity = j.at("dial_perplexity").get<double>();
    for (const auto& [k, v] : j.at("selfplay").items()) r.selfplay[std::stoi(k)] = v.get<double>();
    for (const auto& d : j.at("dialogues")) {
      DialogueScore s;
      s.dialogue_id = d.at("dialogue_id").get<std::string>();
      s.perspective = player_from_string(d.at("perspective").get<std::string>());
      if (!d.at("ref_accuracy").is_null()) s.ref_accuracy = d.at("ref_accuracy").get<double>();
      if (!d.at("tsel_correct").is_null()) s.tsel_correct = d.at("tsel_correct").get<bool>();
      r.dialogues.push_back(s);
    }
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("evaluation report: ") + e.what());
  }
}

json to_json(const std::vector<VariantSummary>& rows) {
  json out = json::array();
  for (const auto& s : rows) {
    json sp = json::object();
    for (const auto& [k, m] : s.selfplay) sp[std::to_string(k)] = mean_sd_json(m);
    out.push_back({{"Model", s.variant},
                   {"seeds", s.seeds},
                   {"Target Selection", mean_sd_json(s.tsel)},
                   {"Reference Resolution", mean_sd_json(s.ref_accuracy)},
                   {"Exact Match", mean_sd_json(s.ref_exact)},
                   {"ref/TSEL correlation", mean_sd_json(s.ref_tsel_correlation)},
                   {"Selfplay Dialogue", sp}});
  }
  return out;
}

json to_json(const std::vector<GroupSummary>& rows) {
  json out = json::array();
  for (const auto& g : rows)
    out.push_back({{"# Referents", g.referents},
                   {"% Accuracy", mean_sd_json(g.accuracy)},
                   {"% Exact Match", mean_sd_json(g.exact)},
                   {"Count", g.mean_count}});
  return out;
}

namespace {

std::string pct(const std::optional<MeanSd>& m) {
  if (!m) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f\xC2\xB1%.2f", 100.0 * m->mean, 100.0 * m->sd);
  return buf;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

std::string variant_table_csv(const std::vector<VariantSummary>& rows) {
  std::string out =
      "Model,Target Selection,Reference Resolution,Exact Match,#Shared=4,#Shared=5,#Shared=6\n";
  for (const auto& s : rows) {
    out += quoted(s.variant) + "," + pct(s.tsel) + "," + pct(s.ref_accuracy) + "," + pct(s.ref_exact);
    for (int k : {4, 5, 6}) {
      const auto it = s.selfplay.find(k);
      out += "," + pct(it == s.selfplay.end() ? std::nullopt : std::optional<MeanSd>(it->second));
    }
    out += "\n";
  }
  return out;
}

std::string referent_count_table_csv(const std::vector<GroupSummary>& rows) {
  std::string out = "# Referents,% Accuracy,% Exact Match,Count\n";
  for (const auto& g : rows) {
    char count[32];
    std::snprintf(count, sizeof count, "%.1f", g.mean_count);
    out += std::to_string(g.referents) + "," + pct(g.accuracy) + "," + pct(g.exact) + "," + count + "\n";
  }
  return out;
}

}  // namespace groundlab
