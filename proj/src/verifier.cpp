/// @file verifier.cpp

#include "rec/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "rec/errors.hpp"
#include "rec/text.hpp"

namespace rec {

namespace {

MatchResult search(std::u32string_view needle, std::u32string_view haystack) {
    MatchResult r;
    if (needle.empty() || needle.size() > haystack.size()) return r;
    std::size_t pos = haystack.find(needle);
    if (pos == std::u32string_view::npos) return r;
    r.found = true;
    r.char_span = CharSpan{pos, pos + needle.size()};
    while (pos != std::u32string_view::npos) {
        ++r.occurrence_count;
        pos = haystack.find(needle, pos + 1);
    }
    return r;
}

bool is_terminator(char32_t c) { return c == U'.' || c == U'?' || c == U'!'; }
bool is_line_break(char32_t c) { return c == U'\n' || c == U'\r' || c == 0x2028 || c == 0x2029; }

}  // namespace

std::string_view to_string(MatchMode mode) { return mode == MatchMode::Strict ? "strict" : "normalized"; }

std::optional<MatchMode> parse_match_mode(std::string_view text) {
    std::string key(text);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (key == "strict") return MatchMode::Strict;
    if (key == "normalized") return MatchMode::Normalized;
    return std::nullopt;
}

MatchResult find_verbatim(std::string_view needle, std::string_view haystack, MatchPolicy policy) {
    const std::u32string hay = text::decode_utf8(haystack);
    if (policy.mode == MatchMode::Strict) return search(text::decode_utf8(needle), hay);

    const text::NormalizedText norm_hay(hay);
    const std::u32string norm_needle = text::normalize(text::decode_utf8(needle));
    MatchResult r = search(norm_needle, norm_hay.text());
    if (r.found) r.char_span = norm_hay.original_span(r.char_span->start, r.char_span->end);
    return r;
}

MatchResult verify_snippet(std::string_view snippet, const ContextDocument& context, MatchPolicy policy) {
    if (snippet.empty()) throw RecError(ErrorCode::InvalidArgument, "snippet must not be empty");
    return find_verbatim(snippet, context.body, policy);
}

VerificationReport verify_quality_output(const QualityEvalOutput& out, const ContextDocument& context,
                                         MatchPolicy policy) {
    VerificationReport report;
    std::size_t index = 0;
    for (std::size_t s = 0; s < out.statements.size(); ++s) {
        const auto& st = out.statements[s];
        for (const auto& c : st.citations) {
            CitationCheck check;
            check.index = index++;
            check.statement = s;
            check.match = c.snippet.empty() ? MatchResult{} : verify_snippet(c.snippet, context, policy);
            if (!check.match.found) report.all_citations_verbatim = false;
            report.per_citation.push_back(std::move(check));
        }
        const bool extractive = !st.statement_string.empty() &&
                                find_verbatim(st.statement_string, out.feedback, MatchPolicy::normalized()).found;
        report.statements_extractive.emplace_back(s, extractive);
        if (!extractive) report.warnings.push_back("statement " + std::to_string(s) + " is not extracted from feedback");
        if (st.citations.empty()) report.warnings.push_back("statement " + std::to_string(s) + " has no citations");
    }
    return report;
}

VerificationReport verify_rag_output(const RagCitationOutput& out, const std::vector<ContextDocument>& chunks,
                                     std::string_view answer, MatchPolicy policy) {
    std::map<std::string, const ContextDocument*> by_id;
    for (const auto& c : chunks) {
        if (c.context_id) by_id.emplace(*c.context_id, &c);
    }

    VerificationReport report;
    bool any_claim = false;
    bool claims_ok = true;
    std::size_t index = 0;
    for (std::size_t e = 0; e < out.citations.size(); ++e) {
        const auto& entry = out.citations[e];
        if (!entry.unsupported() && !by_id.count(entry.context_id))
            throw RecError(ErrorCode::UnknownContextId, "citation " + std::to_string(e) + " cites unknown id \"" +
                                                            entry.context_id + "\"");
        if (entry.claim) {
            any_claim = true;
            ClaimCheck cc{e, entry.claim->empty() ? MatchResult{} : find_verbatim(*entry.claim, answer, policy)};
            if (!cc.match.found) claims_ok = false;
            report.per_claim.push_back(cc);
        }
        if (entry.unsupported()) {
            report.warnings.push_back("citation " + std::to_string(e) + " has context_id None");
            continue;
        }
        if (entry.snippet) {
            CitationCheck check;
            check.index = index++;
            check.context_id = entry.context_id;
            check.match = entry.snippet->empty() ? MatchResult{}
                                                 : verify_snippet(*entry.snippet, *by_id.at(entry.context_id), policy);
            if (!check.match.found) report.all_citations_verbatim = false;
            report.per_citation.push_back(std::move(check));
        }
    }
    if (any_claim || mode_has_claim(out.mode)) report.claims_verbatim = claims_ok;
    return report;
}

std::vector<Sentence> segment_sentences(std::string_view input) {
    const std::u32string chars = text::decode_utf8(input);
    std::vector<Sentence> out;
    const std::size_t n = chars.size();
    std::size_t i = 0;
    auto emit = [&](std::size_t start, std::size_t end) {
        while (end > start && text::is_space(chars[end - 1])) --end;
        if (end > start) out.push_back({text::encode_utf8(std::u32string_view(chars).substr(start, end - start)), {start, end}});
    };
    while (i < n) {
        while (i < n && text::is_space(chars[i])) ++i;
        if (i == n) break;
        const std::size_t start = i;
        while (i < n) {
            if (is_line_break(chars[i])) break;
            if (is_terminator(chars[i]) && (i + 1 == n || text::is_space(chars[i + 1]))) {
                ++i;
                break;
            }
            ++i;
        }
        emit(start, i);
    }
    return out;
}

CharSpan snap_span(std::string_view snippet, std::string_view context, MatchPolicy policy) {
    if (snippet.empty()) throw RecError(ErrorCode::InvalidArgument, "snippet must not be empty");
    const MatchResult m = find_verbatim(snippet, context, policy);
    if (!m.found) throw RecError(ErrorCode::NotFound, "snippet not found in context");
    const CharSpan hit = *m.char_span;
    std::optional<CharSpan> cover;
    for (const auto& s : segment_sentences(context)) {
        if (s.span.end <= hit.start || s.span.start >= hit.end) continue;
        if (!cover) {
            cover = s.span;
        } else {
            cover->end = s.span.end;
        }
    }
    if (!cover) throw RecError(ErrorCode::NotFound, "snippet covers no sentence");
    return *cover;
}

std::string snap_to_sentences(std::string_view snippet, std::string_view context, MatchPolicy policy) {
    return text::slice(context, snap_span(snippet, context, policy));
}

}  // namespace rec
