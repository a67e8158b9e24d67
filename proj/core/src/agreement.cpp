#include "groundlab/agreement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "groundlab/error.hpp"
#include "groundlab/stats.hpp"

namespace groundlab {

GoldReferent aggregate_gold(std::span<const JudgedMask> judgements) {
  const std::size_t n = judgements.size();
  GoldReferent g;
  std::size_t unid = 0;
  for (const auto& j : judgements) unid += j.unidentifiable;
  if (2 * unid > n) {
    g.dropped = true;
    return g;
  }
  for (std::size_t e = 0; e < static_cast<std::size_t>(kViewSize); ++e) {
    std::size_t votes = 0;
    for (const auto& j : judgements) votes += j.referents.test(e);
    if (2 * votes > n) g.referents.set(e);
  }
  return g;
}

GoldReferent aggregate_gold(const AnnotatedCorpus& corpus, const std::string& markable_id) {
  const auto& m = corpus.markables.at(markable_id);
  const auto& view = corpus.speaker_view(m);
  std::vector<JudgedMask> judged;
  for (auto idx : corpus.judgements_of(markable_id)) {
    const auto& j = corpus.judgements[idx];
    judged.push_back({mask_from_ids(view, j.referents), j.unidentifiable});
  }
  if (judged.empty()) throw InvalidArgument("markable " + markable_id + " has no judgements");
  return aggregate_gold(judged);
}

GoldMap build_gold(const AnnotatedCorpus& corpus) {
  GoldMap manual;
  for (const auto& [id, m] : corpus.markables) {
    if (m.flags.generic || m.is_auto() || corpus.judgements_of(id).empty()) continue;
    manual[id] = aggregate_gold(corpus, id);
  }
  return propagate_auto_referents(corpus, manual);
}

PairAgreement pairwise_entity_agreement(EntityMask a, EntityMask b) {
  const auto diff = (a ^ b).count();
  return {static_cast<double>(kViewSize - static_cast<int>(diff)) / kViewSize, diff == 0};
}

PairAgreement pairwise_entity_agreement(const AnnotatedCorpus& corpus, const ReferentJudgement& a,
                                        const ReferentJudgement& b) {
  if (a.markable_id != b.markable_id)
    throw InvalidArgument("judgements on " + a.markable_id + " and " + b.markable_id + " use different views");
  const auto& view = corpus.speaker_view(corpus.markables.at(a.markable_id));
  return pairwise_entity_agreement(mask_from_ids(view, a.referents), mask_from_ids(view, b.referents));
}

AgreementReport fleiss_multi_pi(const std::vector<std::vector<int>>& table) {
  if (table.empty()) throw InvalidArgument("fleiss_multi_pi: empty table");
  AgreementReport r;
  std::map<int, std::size_t> counts;
  std::size_t labels = 0;
  double observed_sum = 0.0;
  for (const auto& item : table) {
    const std::size_t c = item.size();
    if (c < 2) throw InvalidArgument("fleiss_multi_pi: every item needs at least two coders");
    std::map<int, std::size_t> local;
    for (int label : item) ++local[label];
    // agreeing unordered pairs over all unordered pairs
    double agree = 0.0;
    for (const auto& [k, n] : local) agree += static_cast<double>(n * (n - 1));
    observed_sum += agree / static_cast<double>(c * (c - 1));
    for (const auto& [k, n] : local) counts[k] += n;
    labels += c;
  }
  r.items = table.size();
  r.observed = observed_sum / static_cast<double>(table.size());
  for (const auto& [k, n] : counts) {
    const double p = static_cast<double>(n) / static_cast<double>(labels);
    r.category_proportions[k] = p;
    r.expected += p * p;
  }
  if (r.expected < 1.0) r.multi_pi = (r.observed - r.expected) / (1.0 - r.expected);
  return r;
}

namespace {

std::vector<EntityMask> judgement_masks(const AnnotatedCorpus& corpus, const std::string& markable_id) {
  const auto& view = corpus.speaker_view(corpus.markables.at(markable_id));
  std::vector<EntityMask> out;
  for (auto idx : corpus.judgements_of(markable_id))
    out.push_back(mask_from_ids(view, corpus.judgements[idx].referents));
  return out;
}

/// Manually judged markables with at least two judgements, in id order.
std::vector<std::string> multiply_judged(const AnnotatedCorpus& corpus) {
  std::vector<std::string> out;
  for (const auto& [id, m] : corpus.markables)
    if (!m.flags.generic && !m.is_auto() && corpus.judgements_of(id).size() >= 2) out.push_back(id);
  return out;
}

double exact_pair_rate(const std::vector<EntityMask>& masks) {
  std::size_t pairs = 0, exact = 0;
  for (std::size_t a = 0; a < masks.size(); ++a)
    for (std::size_t b = a + 1; b < masks.size(); ++b) {
      ++pairs;
      exact += masks[a] == masks[b];
    }
  return pairs ? static_cast<double>(exact) / static_cast<double>(pairs) : 0.0;
}

}  // namespace

AgreementReport referent_agreement(const AnnotatedCorpus& corpus) {
  std::vector<std::vector<int>> table;
  double exact_sum = 0.0;
  const auto ids = multiply_judged(corpus);
  if (ids.empty()) throw InvalidArgument("no markable has two or more judgements");
  for (const auto& id : ids) {
    const auto masks = judgement_masks(corpus, id);
    for (std::size_t e = 0; e < static_cast<std::size_t>(kViewSize); ++e) {
      std::vector<int> item;
      for (const auto& m : masks) item.push_back(m.test(e) ? 1 : 0);
      table.push_back(std::move(item));
    }
    exact_sum += exact_pair_rate(masks);
  }
  auto r = fleiss_multi_pi(table);
  r.exact_match = exact_sum / static_cast<double>(ids.size());
  return r;
}

namespace {

void span_items(const std::vector<std::vector<TokenSpan>>& annotators, const std::vector<int>& lengths,
                std::vector<std::vector<int>>& start, std::vector<std::vector<int>>& end) {
  std::vector<std::vector<std::vector<int>>> s(annotators.size()), e(annotators.size());
  for (std::size_t a = 0; a < annotators.size(); ++a) {
    s[a].resize(lengths.size());
    e[a].resize(lengths.size());
    for (std::size_t u = 0; u < lengths.size(); ++u) {
      s[a][u].assign(static_cast<std::size_t>(lengths[u]), 0);
      e[a][u].assign(static_cast<std::size_t>(lengths[u]), 0);
    }
    for (const auto& sp : annotators[a]) {
      if (sp.utterance_index < 0 || sp.utterance_index >= static_cast<int>(lengths.size()) || sp.start_token < 0 ||
          sp.end_token <= sp.start_token || sp.end_token > lengths[static_cast<std::size_t>(sp.utterance_index)])
        throw InvalidArgument("span out of range");
      const auto u = static_cast<std::size_t>(sp.utterance_index);
      s[a][u][static_cast<std::size_t>(sp.start_token)] = 1;
      e[a][u][static_cast<std::size_t>(sp.end_token - 1)] = 1;
    }
  }
  for (std::size_t u = 0; u < lengths.size(); ++u)
    for (std::size_t t = 0; t < static_cast<std::size_t>(lengths[u]); ++t) {
      std::vector<int> si, ei;
      for (std::size_t a = 0; a < annotators.size(); ++a) {
        si.push_back(s[a][u][t]);
        ei.push_back(e[a][u][t]);
      }
      start.push_back(std::move(si));
      end.push_back(std::move(ei));
    }
}

}  // namespace

SpanAgreementReport span_agreement(const std::vector<std::vector<TokenSpan>>& annotators,
                                   const std::vector<int>& utterance_lengths) {
  if (annotators.size() < 2) throw InvalidArgument("span agreement needs at least two annotators");
  std::vector<std::vector<int>> start, end;
  span_items(annotators, utterance_lengths, start, end);
  SpanAgreementReport r;
  r.start = fleiss_multi_pi(start);
  r.end = fleiss_multi_pi(end);
  r.dialogues = 1;
  return r;
}

SpanAgreementReport span_agreement(const AnnotatedCorpus& corpus) {
  std::map<std::string, std::vector<const SpanAnnotation*>> by_dialogue;
  for (const auto& sa : corpus.span_annotations) by_dialogue[sa.dialogue_id].push_back(&sa);
  std::vector<std::vector<int>> start, end;
  std::size_t dialogues = 0;
  for (const auto& [did, anns] : by_dialogue) {
    if (anns.size() < 2) continue;
    std::vector<int> lengths;
    for (const auto* m : corpus.dialogues.at(did).messages()) lengths.push_back(static_cast<int>(m->tokens.size()));
    std::vector<std::vector<TokenSpan>> spans;
    for (const auto* a : anns) spans.push_back(a->spans);
    span_items(spans, lengths, start, end);
    ++dialogues;
  }
  if (dialogues == 0) throw InvalidArgument("no dialogue has span annotations from two or more annotators");
  SpanAgreementReport r;
  r.start = fleiss_multi_pi(start);
  r.end = fleiss_multi_pi(end);
  r.dialogues = dialogues;
  return r;
}

std::vector<ReferentCountRow> agreement_by_referent_count(const AnnotatedCorpus& corpus) {
  struct Acc {
    double agreement = 0, exact = 0;
    std::size_t pairs = 0, judgements = 0;
  };
  std::array<Acc, kViewSize + 1> acc{};
  std::size_t total = 0;
  for (const auto& id : multiply_judged(corpus)) {
    const auto masks = judgement_masks(corpus, id);
    for (std::size_t a = 0; a < masks.size(); ++a) {
      auto& row = acc[masks[a].count()];
      ++row.judgements;
      ++total;
      for (std::size_t b = 0; b < masks.size(); ++b) {
        if (a == b) continue;
        const auto p = pairwise_entity_agreement(masks[a], masks[b]);
        row.agreement += p.agreement;
        row.exact += p.exact;
        ++row.pairs;
      }
    }
  }
  std::vector<ReferentCountRow> rows;
  for (int n = 0; n <= kViewSize; ++n) {
    const auto& a = acc[static_cast<std::size_t>(n)];
    if (a.pairs == 0) continue;
    rows.push_back({n, a.agreement / static_cast<double>(a.pairs), a.exact / static_cast<double>(a.pairs),
                    100.0 * static_cast<double>(a.judgements) / static_cast<double>(total), a.judgements, a.pairs});
  }
  return rows;
}

TokenCorrelationResult token_exact_match_correlation(const AnnotatedCorpus& corpus, std::size_t min_count,
                                                     CorrelationUnit unit) {
  struct Unit {
    std::vector<std::string> tokens;
    double y;
    double weight;
  };
  std::vector<Unit> units;
  std::map<std::string, std::pair<std::size_t, std::size_t>> occurrence;  // markables, pairs
  for (const auto& id : multiply_judged(corpus)) {
    const auto masks = judgement_masks(corpus, id);
    auto toks = corpus.markable_tokens(corpus.markables.at(id));
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    const std::size_t pairs = masks.size() * (masks.size() - 1) / 2;
    for (const auto& t : toks) {
      occurrence[t].first += 1;
      occurrence[t].second += pairs;
    }
    if (unit == CorrelationUnit::Markable) {
      units.push_back({toks, exact_pair_rate(masks), 1.0});
    } else {
      for (std::size_t a = 0; a < masks.size(); ++a)
        for (std::size_t b = a + 1; b < masks.size(); ++b)
          units.push_back({toks, masks[a] == masks[b] ? 1.0 : 0.0, 1.0});
    }
  }

  // Pearson with a binary regressor from running sums:
  // sxy = S1 - n1 * ybar, sxx = n1 - n1^2 / n, syy over all units.
  const double n = static_cast<double>(units.size());
  double ysum = 0.0, yy = 0.0;
  for (const auto& u : units) ysum += u.y;
  const double ybar = n > 0 ? ysum / n : 0.0;
  for (const auto& u : units) yy += (u.y - ybar) * (u.y - ybar);

  std::unordered_map<std::string, std::pair<double, double>> sums;  // n1, sum of y where present
  for (const auto& u : units)
    for (const auto& t : u.tokens) {
      auto& s = sums[t];
      s.first += 1.0;
      s.second += u.y;
    }

  TokenCorrelationResult result;
  for (const auto& [token, occ] : occurrence) {
    if (occ.first < min_count) continue;
    const auto& s = sums.at(token);
    const double n1 = s.first;
    const double sxx = n1 - n1 * n1 / n;
    if (sxx <= 0.0 || yy <= 0.0) {
      result.zero_variance.push_back(token);
      continue;
    }
    const double sxy = s.second - n1 * ybar;
    result.tokens.push_back({token, sxy / std::sqrt(sxx * yy), occ.first, occ.second});
  }
  std::sort(result.tokens.begin(), result.tokens.end(), [](const auto& a, const auto& b) {
    return a.rho != b.rho ? a.rho < b.rho : a.token < b.token;
  });
  return result;
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("Silverman bandwidth needs at least two samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double sd = stddev(samples);
  const double iqr = (quantile(0.75) - quantile(0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (spread <= 0.0) spread = std::max(sd, iqr);
  if (spread <= 0.0) throw InvalidArgument("Silverman bandwidth undefined for identical samples");
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

KernelDensity::KernelDensity(std::vector<double> samples, Bandwidth bandwidth) : samples_(std::move(samples)) {
  if (samples_.empty()) throw InvalidArgument("kernel density needs at least one sample");
  if (bandwidth.rule == Bandwidth::Rule::Fixed) {
    if (!(bandwidth.value > 0.0)) throw InvalidArgument("fixed bandwidth must be positive");
    h_ = bandwidth.value;
  } else {
    h_ = silverman_bandwidth(samples_);
  }
}

double KernelDensity::operator()(double x) const {
  const double norm = 1.0 / (static_cast<double>(samples_.size()) * h_ * std::sqrt(2.0 * std::numbers::pi));
  double s = 0.0;
  for (double xi : samples_) {
    const double z = (x - xi) / h_;
    s += std::exp(-0.5 * z * z);
  }
  return s * norm;
}

std::vector<std::pair<double, double>> KernelDensity::curve(double lo, double hi, int points) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(points));
  const double step = (hi - lo) / points;
  for (int i = 0; i < points; ++i) {
    const double x = lo + step * i;
    out.emplace_back(x, (*this)(x));
  }
  return out;
}

double KernelDensity::integrate(double lo, double hi, int intervals) const {
  if (intervals % 2) ++intervals;
  const double step = (hi - lo) / intervals;
  double s = (*this)(lo) + (*this)(hi);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * (*this)(lo + step * i);
  return s * step / 3.0;
}

std::pair<double, double> KernelDensity::extended_support() const {
  const auto [mn, mx] = std::minmax_element(samples_.begin(), samples_.end());
  return {*mn - 10.0 * h_, *mx + 10.0 * h_};
}

double overlap_integral(const KernelDensity& f, const KernelDensity& g) {
  const auto [f0, f1] = f.extended_support();
  const auto [g0, g1] = g.extended_support();
  const double lo = std::min(f0, g0), hi = std::max(f1, g1);
  const int n = 4096;
  const double step = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + step * i;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * std::min(f(x), g(x));
  }
  return s * step;
}

std::map<std::string, std::vector<double>> referent_colors_by_adjective(const AnnotatedCorpus& corpus,
                                                                       const GoldMap& gold,
                                                                       const std::vector<std::string>& adjectives) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& a : adjectives) out[a];
  for (const auto& [id, g] : gold) {
    if (g.dropped) continue;
    const auto& m = corpus.markables.at(id);
    const auto toks = corpus.markable_tokens(m);
    const std::set<std::string> present(toks.begin(), toks.end());
    const auto& scenario = corpus.scenario_of(corpus.dialogues.at(m.dialogue_id));
    const auto& view = scenario.view(m.speaker);
    for (const auto& a : adjectives) {
      if (!present.count(a)) continue;
      for (int e : ids_from_mask(view, g.referents)) out[a].push_back(scenario.entity(e).color);
    }
  }
  return out;
}

std::map<std::string, KernelDensity> color_kde(const AnnotatedCorpus& corpus, const GoldMap& gold,
                                               const std::vector<std::string>& adjectives, Bandwidth bandwidth) {
  std::map<std::string, KernelDensity> out;
  for (auto& [adj, colors] : referent_colors_by_adjective(corpus, gold, adjectives)) {
    if (colors.empty()) throw InvalidArgument("adjective '" + adj + "' has no referent samples");
    out.emplace(adj, KernelDensity(std::move(colors), bandwidth));
  }
  return out;
}

nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json j{{"observed", r.observed},
                   {"expected", r.expected},
                   {"multi_pi", r.multi_pi ? nlohmann::json(*r.multi_pi) : nlohmann::json(nullptr)},
                   {"exact_match", r.exact_match},
                   {"items", r.items}};
  for (const auto& [k, p] : r.category_proportions) j["category_proportions"][std::to_string(k)] = p;
  return j;
}

}  // namespace groundlab
