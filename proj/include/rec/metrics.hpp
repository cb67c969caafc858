/// @file metrics.hpp
/// @brief Citation precision/recall/F1, label accuracy, pairwise win rate and order bias.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rec/model.hpp"
#include "rec/verifier.hpp"

namespace rec {

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R). Both sides empty scores
/// 1/1/1; an empty side against a non-empty one scores 0 for its ratio.
PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// Marker annotators use for a statement that has no valid citation.
inline constexpr std::string_view kHaluMarker = "[<halu>]";

struct GoldCitationSet {
    std::vector<std::string> snippets;
    bool halu = false;

    /// A list containing the halu marker becomes a halu set with no snippets.
    static GoldCitationSet from_annotation(const std::vector<std::string>& citations);
};

enum class CitationMatch {
    Exact,     // sentence-snapped, normalized equality
    TokenF1,   // token overlap between the predicted and gold bags (non-default)
};

/// Throws RecError(HaluGold) when `gold` is halu-marked.
PRF citation_prf(const std::vector<std::string>& predicted, const GoldCitationSet& gold,
                 const ContextDocument& context, MatchPolicy policy = {},
                 CitationMatch match = CitationMatch::Exact);

/// Sentence-snapped, normalized-deduplicated form used by citation_prf.
/// Snippets not found in the context are kept as normalized text.
std::vector<std::string> canonical_citation_set(const std::vector<std::string>& snippets,
                                                const ContextDocument& context, MatchPolicy policy = {});

GoldCitationSet gold_intersection(const GoldCitationSet& a, const GoldCitationSet& b,
                                  const ContextDocument& context, MatchPolicy policy = {});

/// Throws RecError(LengthMismatch) or RecError(Empty).
double binary_accuracy(const std::vector<YesNo>& preds, const std::vector<YesNo>& golds);
double inter_rater_agreement(const std::vector<YesNo>& a, const std::vector<YesNo>& b);

/// Never throws. Bracketed `[[A]]`/`[[B]]` verdicts take precedence (last one
/// wins); otherwise exactly one of "Output (a)"/"Output (b)" must be named,
/// unless the final line is a bare cue.
Verdict parse_pairwise_verdict(std::string_view judge_text);

/// Unparseable verdicts count as losses. Throws RecError(Empty/LengthMismatch).
double win_rate(const std::vector<PairwiseJudgment>& judgments, const std::vector<Verdict>& chosen_is);

struct OrderBias {
    double value = 0.0;
    std::size_t pairs_used = 0;
    std::size_t excluded_unparseable = 0;
};

/// Each pair holds the verdicts for the same item presented as (a,b) and as
/// (b,a). A pair is position-consistent (biased) when both verdicts name the
/// same slot. Pairs with an Unparseable verdict are excluded.
/// Throws RecError(Empty) when nothing remains.
OrderBias order_bias(const std::vector<std::pair<Verdict, Verdict>>& paired);

}  // namespace rec
