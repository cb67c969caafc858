/// @file model.cpp
/// @brief Domain type helpers: enum names, metric catalog, invariant checks.

#include "rec/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <utility>

#include "rec/errors.hpp"

namespace rec {

namespace {

std::string lower_trimmed(std::string_view text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::pair<Enum, std::string_view>, N>& table,
                           std::string_view text) {
    const std::string key = lower_trimmed(text);
    for (const auto& [e, name] : table) {
        if (lower_trimmed(name) == key) return e;
    }
    return std::nullopt;
}

constexpr std::array<std::pair<MetricName, std::string_view>, 4> kMetricIds{{
    {MetricName::Faithfulness, "Faithfulness"},
    {MetricName::InstructionFollowing, "InstructionFollowing"},
    {MetricName::Coherence, "Coherence"},
    {MetricName::Completeness, "Completeness"},
}};

constexpr std::array<std::pair<MetricName, std::string_view>, 4> kMetricDisplay{{
    {MetricName::Faithfulness, "Faithfulness"},
    {MetricName::InstructionFollowing, "Instruction Following"},
    {MetricName::Coherence, "Coherence"},
    {MetricName::Completeness, "Completeness"},
}};

constexpr std::array<std::pair<MetricName, std::string_view>, 7> kMetricAliases{{
    {MetricName::Faithfulness, "f"},
    {MetricName::InstructionFollowing, "if"},
    {MetricName::Coherence, "coh"},
    {MetricName::Completeness, "comp"},
    {MetricName::InstructionFollowing, "instruction_following"},
    {MetricName::InstructionFollowing, "instruction-following"},
    {MetricName::Faithfulness, "faith"},
}};

constexpr std::array<std::pair<SourceKind, std::string_view>, 4> kSourceKinds{{
    {SourceKind::TaskPrompt, "TaskPrompt"},
    {SourceKind::Conversation, "Conversation"},
    {SourceKind::RetrievedChunk, "RetrievedChunk"},
    {SourceKind::Document, "Document"},
}};

constexpr std::array<std::pair<CitationMode, std::string_view>, 4> kModes{{
    {CitationMode::PostFix, "PostFix"},
    {CitationMode::Inline, "Inline"},
    {CitationMode::PostFixWithSnippet, "PostFixWithSnippet"},
    {CitationMode::InlineWithSnippet, "InlineWithSnippet"},
}};

constexpr std::array<std::pair<CitationMode, std::string_view>, 8> kModeAliases{{
    {CitationMode::PostFix, "post-fix"},
    {CitationMode::PostFix, "postfix"},
    {CitationMode::Inline, "inline"},
    {CitationMode::PostFixWithSnippet, "post-fix-snippet"},
    {CitationMode::PostFixWithSnippet, "postfix-snippet"},
    {CitationMode::InlineWithSnippet, "inline-snippet"},
    {CitationMode::PostFixWithSnippet, "post-fix-with-snippet"},
    {CitationMode::InlineWithSnippet, "inline-with-snippet"},
}};

constexpr std::array<std::pair<YesNo, std::string_view>, 2> kYesNo{{
    {YesNo::Yes, "Yes"},
    {YesNo::No, "No"},
}};

constexpr std::array<std::pair<TaskType, std::string_view>, 5> kTaskTypes{{
    {TaskType::PairwiseEval, "PairwiseEval"},
    {TaskType::PointwiseEval, "PointwiseEval"},
    {TaskType::OpenEndedEval, "OpenEndedEval"},
    {TaskType::Citation, "Citation"},
    {TaskType::GeneralInstruction, "GeneralInstruction"},
}};

constexpr std::array<std::pair<FilterStatus, std::string_view>, 4> kFilterStatuses{{
    {FilterStatus::Kept, "Kept"},
    {FilterStatus::RejectedBadJson, "RejectedBadJson"},
    {FilterStatus::RejectedNonVerbatim, "RejectedNonVerbatim"},
    {FilterStatus::RejectedTooLong, "RejectedTooLong"},
}};

constexpr std::array<std::pair<Verdict, std::string_view>, 3> kVerdicts{{
    {Verdict::A, "A"},
    {Verdict::B, "B"},
    {Verdict::Unparseable, "Unparseable"},
}};

constexpr std::array<std::pair<PresentationOrder, std::string_view>, 2> kOrders{{
    {PresentationOrder::AB, "AB"},
    {PresentationOrder::BA, "BA"},
}};

constexpr std::array<std::pair<ErrorCode, std::string_view>, 20> kErrorCodes{{
    {ErrorCode::BadJson, "BadJson"},
    {ErrorCode::MissingField, "MissingField"},
    {ErrorCode::WrongType, "WrongType"},
    {ErrorCode::ModeMismatch, "ModeMismatch"},
    {ErrorCode::EmptyRequired, "EmptyRequired"},
    {ErrorCode::DuplicateContextId, "DuplicateContextId"},
    {ErrorCode::UnknownContextId, "UnknownContextId"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::ClaimNotFound, "ClaimNotFound"},
    {ErrorCode::HaluGold, "HaluGold"},
    {ErrorCode::LengthMismatch, "LengthMismatch"},
    {ErrorCode::Empty, "Empty"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::MissingSlot, "MissingSlot"},
    {ErrorCode::Io, "Io"},
    {ErrorCode::Transport, "Transport"},
    {ErrorCode::AuthFailure, "AuthFailure"},
    {ErrorCode::BackendRefusal, "BackendRefusal"},
    {ErrorCode::Truncated, "Truncated"},
    {ErrorCode::Cancelled, "Cancelled"},
}};

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string_view to_string(ErrorCode code) { return name_of(kErrorCodes, code); }

const std::vector<EvaluationMetric>& metric_catalog() {
    static const std::vector<EvaluationMetric> catalog{
        {MetricName::Faithfulness, "Yes/No",
         "The generated answer only contains truthful content, and does not contain invented or "
         "misleading facts that are not supported by the context."},
        {MetricName::InstructionFollowing, "Yes/No",
         "The generated answer follows the instructions provided in the prompt."},
        {MetricName::Coherence, "Yes/No",
         "The generated answer is coherent: its sentences are well organized and logically "
         "connected."},
        {MetricName::Completeness, "Yes/No",
         "The generated answer includes all the necessary details requested in the prompt."},
    };
    return catalog;
}

const EvaluationMetric& catalog_metric(MetricName name) {
    for (const auto& m : metric_catalog()) {
        if (m.name == name) return m;
    }
    throw RecError(ErrorCode::InvalidArgument, "metric not in catalog");
}

std::string_view to_string(MetricName name) { return name_of(kMetricIds, name); }
std::string_view display_name(MetricName name) { return name_of(kMetricDisplay, name); }

std::optional<MetricName> parse_metric_name(std::string_view text) {
    if (auto m = lookup(kMetricIds, text)) return m;
    if (auto m = lookup(kMetricDisplay, text)) return m;
    return lookup(kMetricAliases, text);
}

Violations validate(const EvaluationMetric& metric) {
    Violations v;
    if (blank(metric.description)) v.emplace_back("metric description is empty");
    if (blank(metric.scale)) v.emplace_back("metric scale is empty");
    return v;
}

std::string_view to_string(SourceKind kind) { return name_of(kSourceKinds, kind); }
std::optional<SourceKind> parse_source_kind(std::string_view text) { return lookup(kSourceKinds, text); }

Violations validate(const ContextDocument& doc) {
    Violations v;
    if (doc.body.empty()) v.emplace_back("context body is empty");
    if (doc.source_kind == SourceKind::RetrievedChunk && !doc.context_id)
        v.emplace_back("retrieved chunk has no context_id");
    if (doc.context_id && doc.context_id->empty()) v.emplace_back("context_id is empty");
    return v;
}

Violations validate(const std::vector<ContextDocument>& docs) {
    Violations v;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (auto& msg : validate(docs[i])) v.push_back("context[" + std::to_string(i) + "]: " + msg);
        if (docs[i].context_id && !seen.insert(*docs[i].context_id).second)
            v.push_back("duplicate context_id \"" + *docs[i].context_id + "\"");
    }
    return v;
}

std::string_view to_string(CitationMode mode) { return name_of(kModes, mode); }

std::optional<CitationMode> parse_citation_mode(std::string_view text) {
    if (auto m = lookup(kModes, text)) return m;
    return lookup(kModeAliases, text);
}

std::string_view to_string(YesNo value) { return name_of(kYesNo, value); }
std::optional<YesNo> parse_yes_no(std::string_view text) { return lookup(kYesNo, text); }

Violations validate(const QualityEvalOutput& out) {
    Violations v;
    if (blank(out.feedback)) v.emplace_back("feedback is empty");
    if (out.statements.empty() && out.answer == YesNo::No)
        v.emplace_back("statements may only be empty when answer is Yes");
    for (std::size_t i = 0; i < out.statements.size(); ++i) {
        const auto& st = out.statements[i];
        const std::string where = "statements[" + std::to_string(i) + "]";
        if (st.statement_string.empty()) v.push_back(where + ": statement_string is empty");
        for (std::size_t j = 0; j < st.citations.size(); ++j) {
            const auto& c = st.citations[j];
            if (c.snippet.empty())
                v.push_back(where + ".citations[" + std::to_string(j) + "]: snippet is empty");
            if (c.char_span && c.char_span->end < c.char_span->start)
                v.push_back(where + ".citations[" + std::to_string(j) + "]: inverted char_span");
        }
    }
    return v;
}

Violations validate(const RagCitationEntry& entry, CitationMode mode) {
    Violations v;
    if (entry.context_id.empty()) v.emplace_back("context_id is empty");
    if (mode_has_claim(mode) && !entry.claim) v.emplace_back("claim required in mode " + std::string(to_string(mode)));
    if (!mode_has_claim(mode) && entry.claim) v.emplace_back("claim not allowed in mode " + std::string(to_string(mode)));
    if (mode_has_snippet(mode) && !entry.snippet && !entry.unsupported())
        v.emplace_back("snippet required in mode " + std::string(to_string(mode)));
    if (!mode_has_snippet(mode) && entry.snippet)
        v.emplace_back("snippet not allowed in mode " + std::string(to_string(mode)));
    if (entry.claim && entry.claim->empty()) v.emplace_back("claim is empty");
    if (entry.snippet && entry.snippet->empty()) v.emplace_back("snippet is empty");
    return v;
}

Violations validate(const RagCitationOutput& out) {
    Violations v;
    for (std::size_t i = 0; i < out.citations.size(); ++i) {
        for (auto& msg : validate(out.citations[i], out.mode))
            v.push_back("citations[" + std::to_string(i) + "]: " + msg);
    }
    return v;
}

Violations validate(const PointwiseVerdict& verdict) {
    Violations v;
    if (blank(verdict.justification)) v.emplace_back("justification is empty");
    return v;
}

std::string_view to_string(TaskType type) { return name_of(kTaskTypes, type); }
std::optional<TaskType> parse_task_type(std::string_view text) { return lookup(kTaskTypes, text); }
std::string_view to_string(FilterStatus status) { return name_of(kFilterStatuses, status); }
std::optional<FilterStatus> parse_filter_status(std::string_view text) { return lookup(kFilterStatuses, text); }

Violations validate(const UnifiedTaskRecord& record) {
    Violations v;
    if (record.filter_status == FilterStatus::Kept) {
        if (record.prompt.empty()) v.emplace_back("kept record has empty prompt");
        if (record.completion.empty()) v.emplace_back("kept record has empty completion");
    }
    return v;
}

std::string_view to_string(Verdict v) { return name_of(kVerdicts, v); }
std::string_view to_string(PresentationOrder order) { return name_of(kOrders, order); }

}  // namespace rec
