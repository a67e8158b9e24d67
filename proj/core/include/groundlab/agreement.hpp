#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "groundlab/corpus.hpp"

namespace groundlab {

/// Entity-level strict majority: an entity is kept when more than half of
/// the judgements include it; the markable is dropped when more than half
/// flag it unidentifiable.
struct JudgedMask {
  EntityMask referents;
  bool unidentifiable = false;
};

GoldReferent aggregate_gold(std::span<const JudgedMask> judgements);
GoldReferent aggregate_gold(const AnnotatedCorpus& corpus, const std::string& markable_id);

/// Majority gold for judged markables, then automatic propagation. Generic
/// markables never appear in the result.
GoldMap build_gold(const AnnotatedCorpus& corpus);

struct PairAgreement {
  double agreement = 0.0;  ///< fraction of the 7 entity decisions that match
  bool exact = false;
};

PairAgreement pairwise_entity_agreement(EntityMask a, EntityMask b);
/// Throws InvalidArgument when the judgements belong to different markables.
PairAgreement pairwise_entity_agreement(const AnnotatedCorpus& corpus, const ReferentJudgement& a,
                                        const ReferentJudgement& b);

struct AgreementReport {
  double observed = 0.0;
  double expected = 0.0;
  std::optional<double> multi_pi;  ///< empty when expected agreement is 1
  double exact_match = 0.0;        ///< only filled by referent-level reports
  std::map<int, double> category_proportions;
  std::size_t items = 0;
};

/// Fleiss's multi-pi over `table[item][coder]` category labels. Items may have
/// different numbers of coders (at least two each).
AgreementReport fleiss_multi_pi(const std::vector<std::vector<int>>& table);

/// Entity-level agreement over manually judged markables (items are
/// markable x entity pairs), plus the markable-level exact-match rate.
AgreementReport referent_agreement(const AnnotatedCorpus& corpus);

struct SpanAgreementReport {
  AgreementReport start;
  AgreementReport end;
  std::size_t dialogues = 0;
};

/// Token-level is-start / is-end agreement across annotators of one
/// utterance set. `annotators[a]` holds annotator a's spans.
SpanAgreementReport span_agreement(const std::vector<std::vector<TokenSpan>>& annotators,
                                   const std::vector<int>& utterance_lengths);
/// Over every dialogue with at least two span annotations.
SpanAgreementReport span_agreement(const AnnotatedCorpus& corpus);

struct ReferentCountRow {
  int referents = 0;
  double agreement = 0.0;
  double exact = 0.0;
  double judgement_pct = 0.0;
  std::size_t judgements = 0;
  std::size_t pairs = 0;
};

/// Rows for counts 0..7 that have at least one pair.
std::vector<ReferentCountRow> agreement_by_referent_count(const AnnotatedCorpus& corpus);

enum class CorrelationUnit { Markable, JudgementPair };

struct TokenCorrelation {
  std::string token;
  double rho = 0.0;
  std::size_t markables = 0;  ///< markables containing the token
  std::size_t pairs = 0;      ///< judgement pairs on those markables
};

struct TokenCorrelationResult {
  std::vector<TokenCorrelation> tokens;      ///< ascending rho
  std::vector<std::string> zero_variance;    ///< frequent tokens skipped
};

/// Point-biserial correlation between token presence in the markable span and
/// the pairwise exact-match rate of its judgements. `min_count` filters on
/// the number of markables that contain the token.
TokenCorrelationResult token_exact_match_correlation(const AnnotatedCorpus& corpus, std::size_t min_count,
                                                     CorrelationUnit unit = CorrelationUnit::Markable);

struct Bandwidth {
  enum class Rule { Silverman, Fixed } rule = Rule::Silverman;
  double value = 0.0;
};

class KernelDensity {
 public:
  KernelDensity(std::vector<double> samples, Bandwidth bandwidth = {});

  double operator()(double x) const;
  double bandwidth() const { return h_; }
  const std::vector<double>& samples() const { return samples_; }
  /// `points` evenly spaced evaluations on [lo, hi) as (x, density).
  std::vector<std::pair<double, double>> curve(double lo = 0.0, double hi = 256.0, int points = 512) const;
  /// Composite Simpson integral over [lo, hi].
  double integrate(double lo, double hi, int intervals = 4096) const;
  /// Support wide enough that the tails are negligible.
  std::pair<double, double> extended_support() const;

 private:
  std::vector<double> samples_;
  double h_;
};

/// Silverman's rule: 0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to
/// whichever spread is nonzero.
double silverman_bandwidth(std::span<const double> samples);

/// Integral of min(f, g) over the union of both supports.
double overlap_integral(const KernelDensity& f, const KernelDensity& g);

/// Colors of gold referents for markables whose span contains each adjective.
std::map<std::string, std::vector<double>> referent_colors_by_adjective(
    const AnnotatedCorpus& corpus, const GoldMap& gold, const std::vector<std::string>& adjectives);

std::map<std::string, KernelDensity> color_kde(const AnnotatedCorpus& corpus, const GoldMap& gold,
                                               const std::vector<std::string>& adjectives, Bandwidth bandwidth = {});

nlohmann::json to_json(const AgreementReport& r);

}  // namespace groundlab
