#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "golden.hpp"
#include "groundlab/agreement.hpp"
#include "groundlab/corpus.hpp"
#include "groundlab/error.hpp"
#include "groundlab/evaluation.hpp"
#include "groundlab/import.hpp"
#include "groundlab/io.hpp"
#include "groundlab/model.hpp"
#include "groundlab/neural/crf.hpp"
#include "groundlab/neural/gradient_check.hpp"
#include "groundlab/neural/layers.hpp"
#include "groundlab/render.hpp"
#include "groundlab/selfplay.hpp"
#include "groundlab/synthetic.hpp"
#include "groundlab/tagger.hpp"
#include "groundlab/workbench.hpp"

namespace fs = std::filesystem;
using namespace groundlab;

namespace {

constexpr int kSkip = 77;

class Report {
 public:
  explicit Report(std::string criterion) : criterion_(std::move(criterion)) {}

  void check(const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s (%s)\n", criterion_.c_str(), name.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failed_ = failed_ || !ok;
  }

  int finish() const {
    std::printf("criterion %s: %s\n", criterion_.c_str(), failed_ ? "FAIL" : "PASS");
    return failed_ ? 1 : 0;
  }

  int skip(const std::string& why) const {
    std::printf("criterion %s: SKIP (%s)\n", criterion_.c_str(), why.c_str());
    return kSkip;
  }

 private:
  std::string criterion_;
  bool failed_ = false;
};

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Canonical corpus directory or released files under the data root.
std::optional<fs::path> dataset_dir(const std::string& flag) {
  fs::path dir;
  if (!flag.empty())
    dir = flag;
  else if (const auto root = data_root())
    dir = *root;
  else
    return std::nullopt;
  if (fs::exists(dir / "scenarios.json") || fs::exists(dir / "final_transcripts.json")) return dir;
  return std::nullopt;
}

AnnotatedCorpus open_dataset(const fs::path& dir) {
  if (fs::exists(dir / "scenarios.json")) return load_corpus(dir);
  auto imported = import_released(dir);
  imported.corpus.validate({imported.report.aggregated_only ? 1 : 3});
  return std::move(imported.corpus);
}

// Criterion 1: released corpus statistics and agreement.
int corpus_regression(const std::optional<fs::path>& data) {
  Report r("1");
  if (!data) return r.skip("released dataset not found; set GROUNDLAB_DATA or pass --data");
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = open_dataset(*data);
  const auto s = corpus_stats(corpus);
  const auto agr = referent_agreement(corpus);
  const double elapsed = seconds_since(t0);
  auto exact = [&](const std::string& name, std::int64_t got, std::int64_t want) {
    r.check(name, got == want, std::to_string(got) + " vs " + std::to_string(want));
  };
  exact("markables", s.markables, 40172);
  exact("all-referents", s.all_referents, 128);
  exact("no-referent", s.no_referent, 1149);
  exact("anaphora", s.anaphora, 4548);
  exact("cataphora", s.cataphora, 6);
  exact("manual markables", s.manual_markables, 34341);
  exact("judgements", s.judgements, 103894);
  r.check("ambiguous %", std::abs(s.ambiguous_pct - 4.65) < 0.005, fmt("%.4f vs 4.65", s.ambiguous_pct));
  r.check("unidentifiable %", std::abs(s.unidentifiable_pct - 0.77) < 0.005,
          fmt("%.4f vs 0.77", s.unidentifiable_pct));
  auto near = [&](const std::string& name, double got, double want) {
    r.check(name, std::abs(got - want) <= 0.3, fmt("%.2f", got) + fmt(" vs %.2f +-0.3", want));
  };
  near("entity agreement", 100.0 * agr.observed, 96.26);
  near("multi-pi", 100.0 * agr.multi_pi.value_or(std::numeric_limits<double>::quiet_NaN()), 88.66);
  near("exact match", 100.0 * agr.exact_match, 86.90);
  r.check("runtime", elapsed < 120.0, fmt("%.1f s < 120 s", elapsed));
  return r.finish();
}

// Criterion 2: agreement by referent count and token correlations.
int referent_breakdown(const std::optional<fs::path>& data) {
  Report r("2");
  if (!data) return r.skip("released dataset not found; set GROUNDLAB_DATA or pass --data");
  const auto corpus = open_dataset(*data);
  const std::map<int, std::array<double, 3>> published{{0, {78.04, 17.78, 1.31}}, {1, {97.45, 90.28, 71.81}},
                                                   {2, {94.87, 82.17, 14.85}}, {3, {93.93, 83.03, 7.51}},
                                                   {4, {92.18, 76.66, 2.20}},  {5, {90.31, 71.03, 0.88}},
                                                   {6, {90.75, 78.14, 1.22}},  {7, {81.47, 62.50, 0.21}}};
  std::map<int, ReferentCountRow> rows;
  for (const auto& row : agreement_by_referent_count(corpus)) rows[row.referents] = row;
  for (const auto& [n, want] : published) {
    const auto it = rows.find(n);
    if (it == rows.end()) {
      r.check("n=" + std::to_string(n), false, "row missing");
      continue;
    }
    const double got[3] = {100.0 * it->second.agreement, 100.0 * it->second.exact, it->second.judgement_pct};
    bool ok = true;
    std::string detail;
    for (int k = 0; k < 3; ++k) {
      ok = ok && std::abs(got[k] - want[static_cast<std::size_t>(k)]) <= 0.5;
      detail += fmt("%.2f", got[k]) + fmt("/%.2f ", want[static_cast<std::size_t>(k)]);
    }
    r.check("n=" + std::to_string(n), ok, detail + "+-0.5");
  }
  const auto corr = token_exact_match_correlation(corpus, 1);
  for (const auto& [token, rho] : std::map<std::string, double>{{"it", -0.149}, {"black", 0.145}}) {
    std::optional<double> got;
    for (const auto& t : corr.tokens)
      if (t.token == token) got = t.rho;
    r.check("rho(" + token + ")", got && std::abs(*got - rho) <= 0.02,
            (got ? fmt("%.3f", *got) : std::string("absent")) + fmt(" vs %.3f +-0.02", rho));
  }
  return r.finish();
}

nn::Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  nn::Tensor t({rows, cols});
  for (auto& x : t.values()) x = rng.uniform(-2.0, 2.0);
  return t;
}

double enumerate_log_z(const nn::Tensor& em, const nn::Tensor& tr) {
  const std::size_t T = em.rows(), K = em.cols();
  std::size_t paths = 1;
  for (std::size_t t = 0; t < T; ++t) paths *= K;
  std::vector<double> scores;
  for (std::size_t code = 0; code < paths; ++code) {
    std::size_t c = code, prev = 0;
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t k = c % K;
      c /= K;
      s += em.at(t, k);
      if (t > 0) s += tr.at(prev, k);
      prev = k;
    }
    scores.push_back(s);
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return m + std::log(z);
}

ModelConfig tiny_model(Variant v, std::uint64_t seed) {
  ModelConfig c;
  c.variant = v;
  c.token_dim = 4;
  c.hidden_dim = 5;
  c.attribute_dim = 3;
  c.relational_dim = 3;
  c.attention_dim = 4;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

// Criterion 3: standalone property suite.
int property_suite() {
  Report r("3");
  {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed + 500);
      nn::ParamStore store(seed);
      auto lin = nn::LinearParams::create(store, "lin", 4, 4);
      auto gru = nn::GruParams::create(store, "gru", 4, 4);
      auto& a = store.add("a", {4});
      auto& b = store.add("b", {4});
      auto& w = store.add("w", {3});
      auto& trans = store.add("trans", {3, 3});
      for (auto& p : store.params())
        for (auto& x : p->value.values()) x = rng.uniform(-0.8, 0.8);
      const double targets[] = {1.0, 0.0, 1.0};
      const std::vector<int> gold{0, 1, 2, 1};
      const auto rep = nn::gradient_check(store, [&](nn::Tape& t) {
        const auto va = t.param(a), vb = t.param(b), vw = t.param(w);
        auto h = t.tanh(nn::linear(t, lin, va));
        h = nn::gru_cell(t, gru, vb, h);
        h = nn::gru_cell(t, gru, t.sigmoid(va), h);
        const auto prod = t.mul(h, t.sigmoid(vb));
        const auto diff = t.sub(t.scale(va, 0.3), t.one_minus(vb));
        const nn::Var parts[] = {t.slice(prod, 0, 2), t.slice(diff, 1, 2)};
        const auto cat = t.concat(parts);
        const nn::Var vs[] = {va, h, cat};
        const auto ws = t.weighted_sum(t.softmax(vw), vs);
        const nn::Var scalars[] = {t.pick(ws, 0), t.pick(ws, 3), t.dot(va, vb)};
        const auto st = t.stack(scalars);
        std::vector<nn::Var> rows;
        for (std::size_t i = 0; i < 4; ++i) rows.push_back(t.slice(t.add(prod, t.scale(diff, double(i))), 0, 3));
        const nn::Var terms[] = {t.logsumexp(st),
                                 t.cross_entropy(ws, 2),
                                 t.bce_with_logits(st, targets),
                                 t.sum(t.log_softmax(cat)),
                                 t.crf_nll(rows, t.param(trans), gold),
                                 t.mean(std::span<const nn::Var>(scalars, 2)),
                                 t.sum(t.affine(t.constant(nn::Tensor({2, 4}, 0.5)), va, t.slice(vb, 0, 2)))};
        return t.add(terms);
      });
      worst = std::max(worst, rep.max_relative_error);
    }
    r.check("gradient check, every primitive", worst < 1e-4, fmt("max relative error %.2e < 1e-4", worst));
  }
  {
    SyntheticConfig sc;
    sc.dialogues = 2;
    sc.seed = 5;
    const auto corpus = synthesize_corpus(sc);
    std::vector<std::string> ids;
    for (const auto& [id, d] : corpus.dialogues) ids.push_back(id);
    const auto vocab = Vocabulary::build(corpus, ids);
    const auto examples = make_examples(corpus, build_gold(corpus), ids, vocab);
    double worst = 0.0;
    for (auto v : {Variant::Tsel, Variant::Ref, Variant::TselRef, Variant::TselDial, Variant::TselRefDial}) {
      GroundingModel m(tiny_model(v, 3), vocab);
      Rng rng(9);
      for (auto& p : m.params().params())
        if (p->value.rank() == 1)
          for (auto& x : p->value.values()) x = rng.uniform(-0.3, 0.3);
      nn::GradientCheckOptions opts;
      opts.max_per_param = 12;
      for (const auto& ex : examples)
        worst = std::max(worst, nn::gradient_check(m.params(), [&](nn::Tape& t) { return m.loss(t, ex).total; }, opts)
                                    .max_relative_error);
    }
    r.check("gradient check, every model variant", worst < 1e-4, fmt("max relative error %.2e < 1e-4", worst));
  }
  {
    Rng rng(101);
    double worst = 0.0;
    for (std::size_t T = 1; T <= 5; ++T)
      for (std::size_t K = 2; K <= 4; ++K)
        for (int trial = 0; trial < 5; ++trial) {
          const auto em = random_matrix(rng, T, K);
          const auto tr = random_matrix(rng, K, K);
          worst = std::max(worst, std::abs(nn::crf_log_partition(em, tr) - enumerate_log_z(em, tr)));
        }
    r.check("CRF log-partition vs enumeration (T<=5, K<=4)", worst < 1e-9, fmt("max |d| %.2e < 1e-9", worst));
  }
  {
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::vector<int>> table(1 + rng.below(20));
      const auto k = 2 + rng.below(4);
      for (auto& item : table) {
        item.resize(2 + rng.below(4));
        for (auto& l : item) l = static_cast<int>(rng.below(k));
      }
      double ao = 0.0, labels = 0.0;
      std::map<int, double> counts;
      for (const auto& item : table) {
        double agree = 0.0, pairs = 0.0;
        for (std::size_t x = 0; x < item.size(); ++x)
          for (std::size_t y = 0; y < item.size(); ++y)
            if (x != y) pairs += 1.0, agree += item[x] == item[y];
        ao += agree / pairs;
        for (int l : item) counts[l] += 1.0, labels += 1.0;
      }
      ao /= static_cast<double>(table.size());
      double ae = 0.0;
      for (const auto& [l, c] : counts) ae += (c / labels) * (c / labels);
      const auto rep = fleiss_multi_pi(table);
      worst = std::max({worst, std::abs(rep.observed - ao), std::abs(rep.expected - ae)});
      if (ae < 1.0) worst = std::max(worst, std::abs(rep.multi_pi.value_or(1e9) - (ao - ae) / (1.0 - ae)));
    }
    r.check("Fleiss multi-pi vs all-pairs brute force", worst < 1e-12, fmt("max |d| %.2e < 1e-12", worst));
  }
  {
    Rng rng(3);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<JudgedMask> j(1 + rng.below(6));
      for (auto& x : j) {
        x.referents = EntityMask(rng.below(128));
        x.unidentifiable = rng.uniform() < 0.2;
      }
      const auto g = aggregate_gold(j);
      std::size_t u = 0;
      for (const auto& x : j) u += x.unidentifiable;
      mismatches += g.dropped != (2 * u > j.size());
      for (std::size_t e = 0; e < kViewSize; ++e) {
        std::size_t c = 0;
        for (const auto& x : j) c += x.referents[e];
        mismatches += g.referents[e] != (!g.dropped && 2 * c > j.size());
      }
    }
    r.check("majority vote vs counting oracle", mismatches == 0, std::to_string(mismatches) + " mismatches");
  }
  {
    Rng rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> xs(5 + rng.below(60));
      for (auto& x : xs) x = rng.uniform(0.0, 256.0);
      const KernelDensity kde(xs);
      const auto [lo, hi] = kde.extended_support();
      worst = std::max(worst, std::abs(kde.integrate(lo, hi) - 1.0));
    }
    r.check("KDE normalization", worst < 1e-3, fmt("max |integral - 1| %.2e < 1e-3", worst));
  }
  {
    const ScenarioConfig cfg;
    std::size_t wrong = 0;
    for (int k = 4; k <= 6; ++k) {
      Rng rng(static_cast<std::uint64_t>(7000 + k));
      for (int i = 0; i < 1000; ++i) {
        const auto s = generate_scenario(cfg, k, rng);
        std::set<int> a(s.view_a.visible.begin(), s.view_a.visible.end());
        int n = 0;
        for (int id : s.view_b.visible) n += static_cast<int>(a.count(id));
        wrong += n != k || s.view_a.visible.size() != kViewSize || s.view_b.visible.size() != kViewSize;
      }
    }
    r.check("scenario intersection size over 3000 samples", wrong == 0, std::to_string(wrong) + " wrong");
  }
  {
    fixtures::TempDir dir;
    SyntheticConfig sc;
    sc.dialogues = 12;
    sc.seed = 17;
    const auto corpus = synthesize_corpus(sc);
    save_corpus(corpus, dir.path() / "corpus");
    const bool corpus_ok = load_corpus(dir.path() / "corpus") == corpus;
    const auto& scen = corpus.scenarios.begin()->second;
    const bool scenario_ok = scenario_from_json(nlohmann::json::parse(to_json(scen).dump())) == scen;
    std::vector<std::string> ids;
    for (const auto& [id, d] : corpus.dialogues) ids.push_back(id);
    const auto vocab = Vocabulary::build(corpus, ids);
    GroundingModel m(tiny_model(Variant::TselRefDial, 4), vocab);
    m.save(dir.path() / "model");
    const bool model_ok = GroundingModel::load(dir.path() / "model").params().same_values(m.params());
    TaggerConfig tc;
    tc.token_dim = 4;
    tc.hidden_dim = 5;
    MarkableTagger tagger(tc, vocab);
    tagger.save(dir.path() / "tagger");
    const bool tagger_ok = MarkableTagger::load(dir.path() / "tagger").params().same_values(tagger.params());
    const auto games = run_batch([] { return std::make_unique<ScriptedAgent>(); }, ProtocolConfig{}, {{4}, 5, {}, 1});
    write_transcripts(dir.path() / "t.jsonl", games.transcripts);
    const bool transcripts_ok = read_transcripts(dir.path() / "t.jsonl") == games.transcripts;
    r.check("serialization round trips", corpus_ok && scenario_ok && model_ok && tagger_ok && transcripts_ok,
            std::string("corpus ") + (corpus_ok ? "ok" : "differs") + ", scenario " + (scenario_ok ? "ok" : "differs") +
                ", model " + (model_ok ? "ok" : "differs") + ", tagger " + (tagger_ok ? "ok" : "differs") +
                ", transcripts " + (transcripts_ok ? "ok" : "differs"));
  }
  {
    const ScenarioConfig cfg;
    Rng r1(99), r2(99);
    const bool gen = to_json(generate_scenario(cfg, 5, r1)).dump() == to_json(generate_scenario(cfg, 5, r2)).dump();
    SyntheticConfig sc;
    sc.dialogues = 6;
    sc.seed = 8;
    const auto corpus = synthesize_corpus(sc);
    const bool syn = synthesize_corpus(sc) == corpus;
    std::vector<std::string> ids;
    for (const auto& [id, d] : corpus.dialogues) ids.push_back(id);
    const auto vocab = Vocabulary::build(corpus, ids);
    const auto examples = make_examples(corpus, build_gold(corpus), ids, vocab);
    auto mc = tiny_model(Variant::TselRefDial, 8);
    mc.dropout = 0.2;
    mc.epochs = 2;
    auto train_once = [&] {
      GroundingModel m(mc, vocab);
      train(m, examples, examples);
      return m.params().serialize();
    };
    const bool trained = train_once() == train_once();
    GroundingModel m(mc, vocab);
    ProtocolConfig proto;
    proto.seed = 5;
    proto.max_utterances = 4;
    proto.max_tokens = 6;
    BatchOptions bo{{4, 6}, 3, {}, 1};
    auto play = [&](int jobs) {
      bo.jobs = jobs;
      return run_batch([&] { return std::make_unique<ModelAgent>(m, proto); }, proto, bo).transcripts;
    };
    const bool played = play(1) == play(2);
    r.check("seeded determinism", gen && syn && trained && played,
            std::string("generation ") + (gen && syn ? "ok" : "differs") + ", training " + (trained ? "ok" : "differs") +
                ", selfplay " + (played ? "ok" : "differs"));
  }
  return r.finish();
}

// Criterion 4: model variants at desk scale on the released corpus.
int model_reproduction(const std::optional<fs::path>& data, int seeds) {
  Report r("4");
  if (!data) return r.skip("released dataset not found; set GROUNDLAB_DATA or pass --data");
  const auto corpus = open_dataset(*data);
  std::vector<EvalReport> reports;
  for (auto v : {Variant::Tsel, Variant::TselRef, Variant::TselDial, Variant::TselRefDial})
    for (int s = 0; s < seeds; ++s) {
      const auto split = split_dataset(corpus, static_cast<std::uint64_t>(s));
      ModelConfig mc;
      mc.variant = v;
      mc.seed = static_cast<std::uint64_t>(s);
      auto trained = train_on_split(corpus, split, mc);
      auto rep = evaluate_model(trained.model, model_examples(trained.model, corpus, split.test));
      rep.seed = mc.seed;
      std::printf("[4] %s seed %d: tsel %.4f\n", to_string(v).c_str(), s, rep.tsel_accuracy.value_or(0.0));
      reports.push_back(std::move(rep));
    }
  std::map<std::string, VariantSummary> by;
  for (const auto& s : summarize(reports)) by[s.variant] = s;
  const auto& full = by.at(to_string(Variant::TselRefDial));
  auto mean = [](const std::optional<MeanSd>& m) { return m ? 100.0 * m->mean : 0.0; };
  r.check("seeds", full.seeds >= 3, std::to_string(full.seeds) + " >= 3");
  r.check("TSEL-REF-DIAL target selection", mean(full.tsel) >= 64.0, fmt("%.2f >= 64", mean(full.tsel)));
  r.check("TSEL-REF-DIAL reference accuracy", mean(full.ref_accuracy) >= 82.0,
          fmt("%.2f >= 82", mean(full.ref_accuracy)));
  r.check("TSEL-REF-DIAL exact match", mean(full.ref_exact) >= 28.0, fmt("%.2f >= 28", mean(full.ref_exact)));
  const double tsel = mean(by.at(to_string(Variant::Tsel)).tsel);
  const double tsel_ref = mean(by.at(to_string(Variant::TselRef)).tsel);
  const double tsel_dial = mean(by.at(to_string(Variant::TselDial)).tsel);
  r.check("TSEL-REF >= TSEL", tsel_ref >= tsel, fmt("%.2f", tsel_ref) + fmt(" >= %.2f", tsel));
  r.check("TSEL-REF-DIAL >= TSEL-DIAL", mean(full.tsel) >= tsel_dial,
          fmt("%.2f", mean(full.tsel)) + fmt(" >= %.2f", tsel_dial));
  return r.finish();
}

// Criterion 5: selfplay success ordering, random baseline and runtime.
int selfplay_criterion(int jobs) {
  Report r("5");
  SyntheticConfig sc;
  sc.dialogues = 1000;
  sc.seed = 21;
  const auto corpus = synthesize_corpus(sc);
  const auto split = split_dataset(corpus, 0);
  ModelConfig mc;
  mc.token_dim = 32;
  mc.hidden_dim = 64;
  mc.attribute_dim = 32;
  mc.relational_dim = 32;
  mc.attention_dim = 64;
  mc.dropout = 0.1;
  mc.adam.lr = 0.004;
  mc.epochs = 60;
  mc.patience = 60;
  mc.seed = 1;
  const auto t_train = std::chrono::steady_clock::now();
  const auto trained = train_on_split(corpus, split, mc);
  const auto ex = model_examples(trained.model, corpus, split.test);
  const auto ev = evaluate_model(trained.model, ex);
  std::printf("[5] model trained on %zu synthetic dialogues in %.0f s (test tsel %.3f)\n", split.train.size(),
              seconds_since(t_train), ev.tsel_accuracy.value_or(0.0));

  ProtocolConfig proto;
  proto.seed = 2024;
  BatchOptions bo;
  bo.games = 1000;
  bo.jobs = jobs;
  const auto t0 = std::chrono::steady_clock::now();
  const auto games = run_batch([&] { return std::make_unique<ModelAgent>(trained.model, proto); }, proto, bo);
  const double elapsed = seconds_since(t0);
  std::string rates;
  bool increasing = true;
  for (std::size_t i = 0; i < games.rows.size(); ++i) {
    rates += (i ? " < " : "") + fmt("%.2f", 100.0 * games.rows[i].rate());
    if (i > 0) increasing = increasing && games.rows[i].rate() > games.rows[i - 1].rate();
  }
  r.check("success strictly increasing in shared count (k=4,5,6)", games.rows.size() == 3 && increasing, rates);
  r.check("3000 games runtime", elapsed < 900.0, fmt("%.1f s < 900 s", elapsed));

  BatchOptions rb;
  rb.shared = {4};
  rb.games = 1000;
  rb.jobs = jobs;
  const auto random = run_batch([] { return std::make_unique<RandomAgent>(); }, proto, rb);
  const double rate = random.rows.at(0).rate();
  r.check("random agents at k=4 vs 4/49", std::abs(rate - 4.0 / 49.0) <= 0.02,
          fmt("%.2f", 100.0 * rate) + fmt(" vs %.2f +-2", 400.0 / 49.0));
  return r.finish();
}

// Criterion 6: BIO round trip and held-out tagger accuracy.
int bio_roundtrip() {
  Report r("6.roundtrip");
  Rng rng(77);
  std::size_t bad = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const int len = static_cast<int>(rng.below(25));
    std::vector<Span> spans;
    int t = 0;
    while (t < len) {
      t += static_cast<int>(rng.below(3));
      if (t >= len) break;
      const int e = t + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(5, len - t))));
      spans.emplace_back(t, e);
      t = e;
    }
    bad += bio_to_spans(spans_to_bio(len, spans)) != spans;
  }
  r.check("spans -> BIO -> spans identity", bad == 0, std::to_string(bad) + " of 20000 differ");
  return r.finish();
}

int tagger_heldout(const std::optional<fs::path>& data) {
  Report r("6.heldout");
  if (!data) return r.skip("released dataset not found; set GROUNDLAB_DATA or pass --data");
  const auto corpus = open_dataset(*data);
  const auto split = split_dataset(corpus, 0);
  const auto trained = train_tagger_on_split(corpus, split, TaggerConfig{});
  const auto m = evaluate_tagger(trained.tagger, tagger_examples(corpus, split.test, trained.tagger.vocabulary()));
  r.check("held-out token accuracy", m.token_accuracy >= 0.97, fmt("%.4f >= 0.97", m.token_accuracy));
  return r.finish();
}

// Criterion 7: deterministic SVG and golden files.
int rendering(const fs::path& golden) {
  Report r("7");
  const auto a = fixtures::golden_scenario_svg(), b = fixtures::golden_scenario_svg();
  const auto c = fixtures::golden_dialogue_svg(), d = fixtures::golden_dialogue_svg();
  r.check("byte-deterministic output", a == b && c == d, "two renders compared byte for byte");
  for (const auto& [name, svg] : std::map<std::string, std::string>{{"scenario.svg", a}, {"dialogue.svg", c}}) {
    const auto path = golden / name;
    const bool ok = fs::exists(path) && read_file(path) == svg;
    r.check("golden " + name, ok, path.string());
  }
  return r.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string criterion, data;
  int jobs = 1, seeds = 3;
  app.add_option("--criterion", criterion, "1, 2, 3, 4, 5, 6.roundtrip, 6.heldout or 7")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "4", "5", "6.roundtrip", "6.heldout", "7"}));
  app.add_option("--data", data, "Canonical corpus or released dataset directory (default GROUNDLAB_DATA)");
  app.add_option("--jobs", jobs, "Selfplay workers")->check(CLI::PositiveNumber);
  app.add_option("--seeds", seeds, "Training seeds for criterion 4")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto dataset = dataset_dir(data);
    if (criterion == "1") return corpus_regression(dataset);
    if (criterion == "2") return referent_breakdown(dataset);
    if (criterion == "3") return property_suite();
    if (criterion == "4") return model_reproduction(dataset, seeds);
    if (criterion == "5") return selfplay_criterion(jobs);
    if (criterion == "6.roundtrip") return bio_roundtrip();
    if (criterion == "6.heldout") return tagger_heldout(dataset);
    return rendering(GROUNDLAB_GOLDEN_DIR);
  } catch (const std::exception& e) {
    std::printf("criterion %s: FAIL (error: %s)\n", criterion.c_str(), e.what());
    return 1;
  }
}
