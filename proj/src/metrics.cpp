/// @file metrics.cpp

#include "rec/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "rec/errors.hpp"
#include "rec/text.hpp"

namespace rec {

namespace {

double ratio(std::size_t num, std::size_t den, bool both_empty) {
    if (den == 0) return both_empty ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::string> tokens_of(const std::vector<std::string>& texts) {
    std::vector<std::string> out;
    for (const auto& t : texts) {
        std::string lower = text::normalize(t);
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        std::size_t i = 0;
        while (i < lower.size()) {
            const std::size_t j = std::min(lower.find(' ', i), lower.size());
            if (j > i) out.push_back(lower.substr(i, j - i));
            i = j + 1;
        }
    }
    return out;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void check_labels(const std::vector<YesNo>& a, const std::vector<YesNo>& b) {
    if (a.size() != b.size())
        throw RecError(ErrorCode::LengthMismatch,
                       "label lists differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.empty()) throw RecError(ErrorCode::Empty, "label lists are empty");
}

}  // namespace

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    PRF r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    const bool both_empty = tp == 0 && fp == 0 && fn == 0;
    r.precision = ratio(tp, tp + fp, both_empty);
    r.recall = ratio(tp, tp + fn, both_empty);
    const double sum = r.precision + r.recall;
    r.f1 = sum == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / sum;
    return r;
}

GoldCitationSet GoldCitationSet::from_annotation(const std::vector<std::string>& citations) {
    GoldCitationSet g;
    for (const auto& c : citations) {
        if (text::normalize(c) == kHaluMarker) {
            g.halu = true;
            g.snippets.clear();
            return g;
        }
        g.snippets.push_back(c);
    }
    return g;
}

std::vector<std::string> canonical_citation_set(const std::vector<std::string>& snippets,
                                                const ContextDocument& context, MatchPolicy policy) {
    std::vector<std::string> out;
    for (const auto& s : snippets) {
        if (text::normalize(s).empty()) continue;
        std::string key;
        try {
            key = text::normalize(snap_to_sentences(s, context.body, policy));
        } catch (const RecError& e) {
            if (e.code() != ErrorCode::NotFound) throw;
            key = text::normalize(s);
        }
        if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(std::move(key));
    }
    return out;
}

PRF citation_prf(const std::vector<std::string>& predicted, const GoldCitationSet& gold,
                 const ContextDocument& context, MatchPolicy policy, CitationMatch match) {
    if (gold.halu) throw RecError(ErrorCode::HaluGold, "gold citation set is halu-marked");
    const auto pred = canonical_citation_set(predicted, context, policy);
    const auto ref = canonical_citation_set(gold.snippets, context, policy);

    if (match == CitationMatch::TokenF1) {
        auto pt = tokens_of(pred);
        auto gt = tokens_of(ref);
        std::map<std::string, long> bag;
        for (const auto& t : gt) ++bag[t];
        std::size_t overlap = 0;
        for (const auto& t : pt) {
            auto it = bag.find(t);
            if (it != bag.end() && it->second > 0) {
                --it->second;
                ++overlap;
            }
        }
        return prf_from_counts(overlap, pt.size() - overlap, gt.size() - overlap);
    }

    std::size_t tp = 0;
    for (const auto& p : pred) {
        if (std::find(ref.begin(), ref.end(), p) != ref.end()) ++tp;
    }
    return prf_from_counts(tp, pred.size() - tp, ref.size() - tp);
}

GoldCitationSet gold_intersection(const GoldCitationSet& a, const GoldCitationSet& b,
                                  const ContextDocument& context, MatchPolicy policy) {
    if (a.halu || b.halu) return GoldCitationSet{{}, true};
    const auto left = canonical_citation_set(a.snippets, context, policy);
    const auto right = canonical_citation_set(b.snippets, context, policy);
    GoldCitationSet out;
    for (const auto& s : left) {
        if (std::find(right.begin(), right.end(), s) != right.end()) out.snippets.push_back(s);
    }
    return out;
}

double binary_accuracy(const std::vector<YesNo>& preds, const std::vector<YesNo>& golds) {
    check_labels(preds, golds);
    std::size_t equal = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) equal += preds[i] == golds[i] ? 1 : 0;
    return static_cast<double>(equal) / static_cast<double>(preds.size());
}

double inter_rater_agreement(const std::vector<YesNo>& a, const std::vector<YesNo>& b) {
    return binary_accuracy(a, b);
}

Verdict parse_pairwise_verdict(std::string_view judge_text) {
    const std::string lower = lowercase(judge_text);

    const std::size_t last_a = lower.rfind("[[a]]");
    const std::size_t last_b = lower.rfind("[[b]]");
    if (last_a != std::string::npos || last_b != std::string::npos) {
        if (last_b == std::string::npos) return Verdict::A;
        if (last_a == std::string::npos) return Verdict::B;
        return last_a > last_b ? Verdict::A : Verdict::B;
    }

    std::string_view rest(lower);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.remove_suffix(1);
    std::string_view last_line = rest.substr(rest.rfind('\n') == std::string_view::npos ? 0 : rest.rfind('\n') + 1);
    const auto trim_chars = std::string_view(" \t\r\"'`*.:!");
    const auto first = last_line.find_first_not_of(trim_chars);
    if (first != std::string_view::npos) {
        last_line = last_line.substr(first, last_line.find_last_not_of(trim_chars) - first + 1);
        if (last_line == "output (a)") return Verdict::A;
        if (last_line == "output (b)") return Verdict::B;
    }

    const std::size_t na = count_of(lower, "output (a)");
    const std::size_t nb = count_of(lower, "output (b)");
    if (na > 0 && nb == 0) return Verdict::A;
    if (nb > 0 && na == 0) return Verdict::B;
    return Verdict::Unparseable;
}

double win_rate(const std::vector<PairwiseJudgment>& judgments, const std::vector<Verdict>& chosen_is) {
    if (judgments.empty()) throw RecError(ErrorCode::Empty, "no judgments");
    if (judgments.size() != chosen_is.size())
        throw RecError(ErrorCode::LengthMismatch, "judgments and ground truth differ in length");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < judgments.size(); ++i) {
        if (judgments[i].verdict != Verdict::Unparseable && judgments[i].verdict == chosen_is[i]) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(judgments.size());
}

OrderBias order_bias(const std::vector<std::pair<Verdict, Verdict>>& paired) {
    OrderBias out;
    std::size_t same_slot = 0;
    for (const auto& [ab, ba] : paired) {
        if (ab == Verdict::Unparseable || ba == Verdict::Unparseable) {
            ++out.excluded_unparseable;
            continue;
        }
        ++out.pairs_used;
        if (ab == ba) ++same_slot;
    }
    if (out.pairs_used == 0) throw RecError(ErrorCode::Empty, "no parseable verdict pairs");
    out.value = static_cast<double>(same_slot) / static_cast<double>(out.pairs_used);
    return out;
}

}  // namespace rec
