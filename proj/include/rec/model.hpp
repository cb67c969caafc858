/// @file model.hpp
/// @brief Domain types for rating/explanation/citation evaluation.
///
/// Everything here is a plain value type. Validation functions never throw;
/// they return the list of violated invariants (empty means valid).

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rec {

using Violations = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

enum class MetricName { Faithfulness, InstructionFollowing, Coherence, Completeness };

struct EvaluationMetric {
    MetricName name;
    std::string scale;
    std::string description;

    bool operator==(const EvaluationMetric&) const = default;
};

/// The four quality metrics in canonical order.
const std::vector<EvaluationMetric>& metric_catalog();
const EvaluationMetric& catalog_metric(MetricName name);

std::string_view to_string(MetricName name);
/// Human-readable form used inside prompts ("Instruction Following").
std::string_view display_name(MetricName name);
/// Accepts identifiers, display names and short aliases (f, if, coh, comp), case-insensitively.
std::optional<MetricName> parse_metric_name(std::string_view text);

Violations validate(const EvaluationMetric& metric);

// ---------------------------------------------------------------------------
// Contexts and citations
// ---------------------------------------------------------------------------

enum class SourceKind { TaskPrompt, Conversation, RetrievedChunk, Document };

std::string_view to_string(SourceKind kind);
std::optional<SourceKind> parse_source_kind(std::string_view text);

struct ContextDocument {
    std::optional<std::string> context_id;
    std::string body;
    SourceKind source_kind = SourceKind::Document;

    bool operator==(const ContextDocument&) const = default;
};

Violations validate(const ContextDocument& doc);
/// Checks each document and that context ids are unique across the request.
Violations validate(const std::vector<ContextDocument>& docs);

enum class CitationMode { PostFix, Inline, PostFixWithSnippet, InlineWithSnippet };

std::string_view to_string(CitationMode mode);
/// Accepts "PostFix", "post-fix", "postfix-snippet", "inline-snippet", ... case-insensitively.
std::optional<CitationMode> parse_citation_mode(std::string_view text);

constexpr bool mode_has_claim(CitationMode m) {
    return m == CitationMode::Inline || m == CitationMode::InlineWithSnippet;
}
constexpr bool mode_has_snippet(CitationMode m) {
    return m == CitationMode::PostFixWithSnippet || m == CitationMode::InlineWithSnippet;
}
/// Content-quality citation only supports the two snippet-carrying modes.
constexpr bool mode_valid_for_quality(CitationMode m) { return mode_has_snippet(m); }

/// Half-open [start, end) offsets counted in Unicode scalar values.
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    bool operator==(const CharSpan&) const = default;
};

struct CitationSnippet {
    std::string snippet;
    std::optional<std::string> context_id;
    std::optional<CharSpan> char_span;

    bool operator==(const CitationSnippet&) const = default;
};

struct Statement {
    std::string statement_string;
    std::vector<CitationSnippet> citations;

    bool operator==(const Statement&) const = default;
};

enum class YesNo { Yes, No };

std::string_view to_string(YesNo value);
/// Case-insensitive, surrounding whitespace ignored; anything but yes/no is rejected.
std::optional<YesNo> parse_yes_no(std::string_view text);

/// Unknown top-level JSON members kept from parsing, as encoded JSON text.
/// They never take part in equality and are not serialized canonically.
using ExtraFields = std::map<std::string, std::string>;

struct QualityEvalOutput {
    YesNo answer = YesNo::Yes;
    std::string feedback;
    std::vector<Statement> statements;
    ExtraFields extra_fields;

    bool operator==(const QualityEvalOutput& o) const {
        return answer == o.answer && feedback == o.feedback && statements == o.statements;
    }
};

Violations validate(const QualityEvalOutput& out);

inline constexpr std::string_view kNoneContextId = "None";

struct RagCitationEntry {
    std::string context_id;
    std::optional<std::string> claim;
    std::optional<std::string> snippet;
    ExtraFields extra_fields;

    bool unsupported() const { return context_id == kNoneContextId; }
    bool operator==(const RagCitationEntry& o) const {
        return context_id == o.context_id && claim == o.claim && snippet == o.snippet;
    }
};

Violations validate(const RagCitationEntry& entry, CitationMode mode);

struct RagCitationOutput {
    std::vector<RagCitationEntry> citations;
    CitationMode mode = CitationMode::InlineWithSnippet;
    ExtraFields extra_fields;

    bool operator==(const RagCitationOutput& o) const {
        return citations == o.citations && mode == o.mode;
    }
};

Violations validate(const RagCitationOutput& out);

struct PointwiseVerdict {
    YesNo metriclabel = YesNo::Yes;
    std::string justification;
    ExtraFields extra_fields;

    bool operator==(const PointwiseVerdict& o) const {
        return metriclabel == o.metriclabel && justification == o.justification;
    }
};

Violations validate(const PointwiseVerdict& verdict);

// ---------------------------------------------------------------------------
// Training records and pairwise judgments
// ---------------------------------------------------------------------------

enum class TaskType { PairwiseEval, PointwiseEval, OpenEndedEval, Citation, GeneralInstruction };
enum class FilterStatus { Kept, RejectedBadJson, RejectedNonVerbatim, RejectedTooLong };

std::string_view to_string(TaskType type);
std::optional<TaskType> parse_task_type(std::string_view text);
std::string_view to_string(FilterStatus status);
std::optional<FilterStatus> parse_filter_status(std::string_view text);

struct UnifiedTaskRecord {
    std::string prompt;
    std::string completion;
    TaskType task_type = TaskType::GeneralInstruction;
    std::string source_dataset;
    FilterStatus filter_status = FilterStatus::Kept;

    bool operator==(const UnifiedTaskRecord&) const = default;
};

Violations validate(const UnifiedTaskRecord& record);

enum class Verdict { A, B, Unparseable };
enum class PresentationOrder { AB, BA };

std::string_view to_string(Verdict v);
std::string_view to_string(PresentationOrder order);

struct PairwiseJudgment {
    std::string instruction;
    std::string response_a;
    std::string response_b;
    Verdict verdict = Verdict::Unparseable;
    PresentationOrder presentation_order = PresentationOrder::AB;

    bool operator==(const PairwiseJudgment&) const = default;
};

}  // namespace rec
