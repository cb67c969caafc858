/// @file verifier.hpp
/// @brief Verbatim citation checks, span location and sentence snapping.
///
/// All spans are half-open code-point offsets into the original,
/// un-normalized text, whichever policy produced the match.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rec/model.hpp"

namespace rec {

enum class MatchMode { Strict, Normalized };

std::string_view to_string(MatchMode mode);
std::optional<MatchMode> parse_match_mode(std::string_view text);

/// Strict: exact code-point substring. Normalized: both sides go through
/// NFC, whitespace-run collapsing and trimming before the substring test.
struct MatchPolicy {
    MatchMode mode = MatchMode::Normalized;

    static MatchPolicy strict() { return {MatchMode::Strict}; }
    static MatchPolicy normalized() { return {MatchMode::Normalized}; }
};

struct MatchResult {
    bool found = false;
    std::optional<CharSpan> char_span;  // first occurrence
    std::size_t occurrence_count = 0;

    bool operator==(const MatchResult&) const = default;
};

/// Substring search of `needle` in `haystack` under `policy`. Occurrences may overlap.
MatchResult find_verbatim(std::string_view needle, std::string_view haystack, MatchPolicy policy);

/// Throws RecError(InvalidArgument) for an empty snippet.
MatchResult verify_snippet(std::string_view snippet, const ContextDocument& context, MatchPolicy policy);

struct CitationCheck {
    std::size_t index = 0;                  // flat index over all checked citations
    std::optional<std::size_t> statement;   // quality outputs: owning statement
    std::optional<std::string> context_id;  // RAG outputs: cited chunk
    MatchResult match;
};

struct ClaimCheck {
    std::size_t entry = 0;
    MatchResult match;
};

struct VerificationReport {
    bool all_citations_verbatim = true;
    std::vector<CitationCheck> per_citation;
    std::optional<bool> claims_verbatim;
    std::vector<ClaimCheck> per_claim;
    std::vector<std::pair<std::size_t, bool>> statements_extractive;
    std::vector<std::string> warnings;
};

/// Citations are checked against `context` under `policy`; statements are
/// checked against the feedback with the Normalized policy. Non-extractive
/// statements only produce warnings.
VerificationReport verify_quality_output(const QualityEvalOutput& out, const ContextDocument& context,
                                         MatchPolicy policy = {});

/// Throws RecError(UnknownContextId) when an entry cites an id absent from
/// `chunks`. Entries whose context_id is "None" skip the snippet check.
VerificationReport verify_rag_output(const RagCitationOutput& out, const std::vector<ContextDocument>& chunks,
                                     std::string_view answer, MatchPolicy policy = {});

struct Sentence {
    std::string text;
    CharSpan span;

    bool operator==(const Sentence&) const = default;
};

/// Splits after '.', '?' or '!' when followed by whitespace or end of text,
/// and at line breaks. Sentences exclude surrounding whitespace; the gaps
/// between spans contain only whitespace. Abbreviations are not special-cased.
std::vector<Sentence> segment_sentences(std::string_view text);

/// Span of the minimal run of whole sentences of `context` covering the
/// first occurrence of `snippet`. Throws RecError(NotFound).
CharSpan snap_span(std::string_view snippet, std::string_view context, MatchPolicy policy = {});
std::string snap_to_sentences(std::string_view snippet, std::string_view context, MatchPolicy policy = {});

}  // namespace rec
