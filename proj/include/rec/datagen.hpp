/// @file datagen.hpp
/// @brief Synthetic training-data curation: generate, filter, emit unified records.

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rec/gateway.hpp"
#include "rec/model.hpp"
#include "rec/prompt_builder.hpp"
#include "rec/schema_io.hpp"
#include "rec/token_estimator.hpp"
#include "rec/verifier.hpp"

namespace rec {

/// Which prompt family a source record is generated with.
enum class GenerationTask { Pointwise, CiteQuality, CiteRag };

std::string_view to_string(GenerationTask task);
/// Accepts "pointwise", "cite-quality", "cite-rag".
std::optional<GenerationTask> parse_generation_task(std::string_view text);

/// Slots by task:
///   Pointwise:   query_with_context, answer
///   CiteQuality: task_prompt, generation, optional conversation, optional metric
///   CiteRag:     answer, chunks (JSON array of {context_id, body}), optional mode
struct SourceRecord {
    std::string source_dataset;
    TaskType task_type = TaskType::PointwiseEval;
    std::map<std::string, std::string> inputs;
};

Violations validate(const SourceRecord& record, GenerationTask task);

/// JSONL layout: {"source_dataset": str, "task_type": str, "inputs": {slot: str | chunk array}}.
ParseResult<SourceRecord> source_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SourceRecord& record);

struct FilterStats {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::size_t rejected_bad_json = 0;
    std::size_t rejected_non_verbatim = 0;
    std::size_t rejected_too_long = 0;
    std::size_t rejected_transport = 0;

    bool balanced() const {
        return total == kept + rejected_bad_json + rejected_non_verbatim + rejected_too_long + rejected_transport;
    }
    void add(FilterStatus status);
};

nlohmann::json to_json(const FilterStats& stats);

inline constexpr std::size_t kDefaultMaxTokens = 6144;

/// True iff estimate(prompt) + estimate(completion) <= max_tokens.
bool length_filter(std::string_view prompt, std::string_view completion, std::size_t max_tokens = kDefaultMaxTokens,
                   const TokenEstimator& estimator = default_token_estimator());

struct FilterPolicy {
    MatchPolicy match = MatchPolicy::normalized();
    std::size_t max_tokens = kDefaultMaxTokens;
    const TokenEstimator* estimator = &default_token_estimator();
    /// RAG entries citing "None" are kept unless this is false.
    bool keep_unsupported_claims = true;
};

/// One generation unit: the instantiated prompt plus what is needed to check its output.
struct GenerationItem {
    SourceRecord source;
    GenerationTask task = GenerationTask::Pointwise;
    PromptText prompt;
    std::optional<ContextDocument> quality_context;  // CiteQuality
    std::vector<ContextDocument> chunks;             // CiteRag
    CitationMode mode = CitationMode::InlineWithSnippet;
};

struct FilterOutcome {
    FilterStatus status = FilterStatus::Kept;
    std::optional<UnifiedTaskRecord> record;  // set when Kept
    std::string reason;
};

/// Expands a source record into generation items (pointwise fans out over `metrics`).
std::vector<GenerationItem> plan_items(const SourceRecord& record, GenerationTask task,
                                       const std::vector<EvaluationMetric>& metrics,
                                       const PromptBuilder& builder = PromptBuilder());

/// JSON parse and schema check, then verbatim check (citation tasks), then length.
FilterOutcome filter_one(std::string_view raw, const GenerationItem& item, const FilterPolicy& policy = {});

/// Result for one generation item: either it was filtered, or the gateway
/// failed (or the run was cancelled) before there was anything to filter.
struct ItemOutcome {
    std::optional<FilterOutcome> filtered;
    std::optional<ErrorCode> gateway_error;
    std::string detail;
};

struct GenerationRun {
    std::vector<UnifiedTaskRecord> records;  // kept, in input order
    std::vector<ItemOutcome> outcomes;       // one per item, in input order
    FilterStats stats;                       // excludes cancelled items
    std::size_t cancelled_items = 0;
};

struct GenerateOptions {
    std::size_t parallelism = 4;
    double temperature = 0.0;
    int max_output_tokens = 2048;
    std::optional<std::int64_t> seed;
    FilterPolicy filter;
    std::stop_token stop;
};

GenerationRun generate(const std::vector<SourceRecord>& records, GenerationTask task,
                       const std::vector<EvaluationMetric>& metrics, const LlmGateway& gateway,
                       const GenerateOptions& options = {}, const PromptBuilder& builder = PromptBuilder());

}  // namespace rec
