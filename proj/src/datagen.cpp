/// @file datagen.cpp

#include "rec/datagen.hpp"

#include <algorithm>
#include <cctype>

#include "rec/errors.hpp"
#include "rec/text.hpp"

namespace rec {

namespace {

const std::string* slot(const SourceRecord& r, const std::string& name) {
    const auto it = r.inputs.find(name);
    return it == r.inputs.end() ? nullptr : &it->second;
}

std::vector<ContextDocument> chunks_from_slot(const std::string& encoded) {
    const auto parsed = nlohmann::json::parse(encoded, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array())
        throw RecError(ErrorCode::WrongType, "chunks must be a JSON array of {context_id, body}");
    std::vector<ContextDocument> chunks;
    for (const auto& item : parsed) {
        auto doc = context_from_json(item);
        if (!doc.ok() || !doc.value->context_id)
            throw RecError(ErrorCode::WrongType, "chunk must carry context_id and body");
        doc.value->source_kind = SourceKind::RetrievedChunk;
        chunks.push_back(std::move(*doc.value));
    }
    return chunks;
}

FilterOutcome reject(FilterStatus status, std::string reason) { return {status, std::nullopt, std::move(reason)}; }

std::string first_violation(const ValidationReport& report) {
    if (report.ok()) return "ok";
    const auto& v = report.violations.front();
    return std::string(to_string(v.code)) + " at " + v.path + ": " + v.detail;
}

}  // namespace

std::size_t count_words(std::string_view text) {
    std::size_t words = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

std::size_t WordCountEstimator::estimate(std::string_view text) const {
    return (count_words(text) * per_word_milli_ + 999) / 1000;
}

const TokenEstimator& default_token_estimator() {
    static const WordCountEstimator estimator;
    return estimator;
}

std::string_view to_string(GenerationTask task) {
    switch (task) {
        case GenerationTask::Pointwise: return "pointwise";
        case GenerationTask::CiteQuality: return "cite-quality";
        case GenerationTask::CiteRag: return "cite-rag";
    }
    return "?";
}

std::optional<GenerationTask> parse_generation_task(std::string_view text) {
    if (text == "pointwise") return GenerationTask::Pointwise;
    if (text == "cite-quality") return GenerationTask::CiteQuality;
    if (text == "cite-rag") return GenerationTask::CiteRag;
    return std::nullopt;
}

Violations validate(const SourceRecord& record, GenerationTask task) {
    Violations v;
    auto need = [&](const char* name) {
        const auto* value = slot(record, name);
        if (!value || value->empty()) v.push_back(std::string("missing input slot ") + name);
    };
    switch (task) {
        case GenerationTask::Pointwise:
            need("query_with_context");
            need("answer");
            break;
        case GenerationTask::CiteQuality:
            need("task_prompt");
            need("generation");
            break;
        case GenerationTask::CiteRag:
            need("answer");
            need("chunks");
            break;
    }
    return v;
}

ParseResult<SourceRecord> source_record_from_json(const nlohmann::json& j) {
    ParseResult<SourceRecord> result;
    auto& report = result.report;
    if (!j.is_object()) {
        report.add(ViolationCode::WrongType, "$", "source record must be an object");
        return result;
    }
    SourceRecord r;
    r.source_dataset = j.value("source_dataset", std::string());
    if (const auto it = j.find("task_type"); it != j.end()) {
        const auto tt = it->is_string() ? parse_task_type(it->get<std::string>()) : std::nullopt;
        if (!tt) {
            report.add(ViolationCode::WrongType, "$.task_type", "unknown task type");
        } else {
            r.task_type = *tt;
        }
    }
    const auto inputs = j.find("inputs");
    if (inputs == j.end() || !inputs->is_object()) {
        report.add(ViolationCode::MissingField, "$.inputs", "inputs object is required");
        return result;
    }
    for (auto it = inputs->begin(); it != inputs->end(); ++it) {
        if (it->is_string()) {
            r.inputs[it.key()] = it->get<std::string>();
        } else if (it.key() == "chunks" && it->is_array()) {
            r.inputs[it.key()] = it->dump();
        } else {
            report.add(ViolationCode::WrongType, "$.inputs." + it.key(), "input slots must be strings");
        }
    }
    if (report.ok()) result.value = std::move(r);
    return result;
}

nlohmann::json to_json(const SourceRecord& record) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [k, v] : record.inputs) {
        if (k == "chunks") {
            auto parsed = nlohmann::json::parse(v, nullptr, false);
            inputs[k] = parsed.is_discarded() ? nlohmann::json(v) : parsed;
        } else {
            inputs[k] = v;
        }
    }
    return {{"source_dataset", record.source_dataset}, {"task_type", to_string(record.task_type)}, {"inputs", inputs}};
}

void FilterStats::add(FilterStatus status) {
    ++total;
    switch (status) {
        case FilterStatus::Kept: ++kept; break;
        case FilterStatus::RejectedBadJson: ++rejected_bad_json; break;
        case FilterStatus::RejectedNonVerbatim: ++rejected_non_verbatim; break;
        case FilterStatus::RejectedTooLong: ++rejected_too_long; break;
    }
}

nlohmann::json to_json(const FilterStats& s) {
    return {{"total", s.total},
            {"kept", s.kept},
            {"rejected_bad_json", s.rejected_bad_json},
            {"rejected_non_verbatim", s.rejected_non_verbatim},
            {"rejected_too_long", s.rejected_too_long},
            {"rejected_transport", s.rejected_transport}};
}

bool length_filter(std::string_view prompt, std::string_view completion, std::size_t max_tokens,
                   const TokenEstimator& estimator) {
    return estimator.estimate(prompt) + estimator.estimate(completion) <= max_tokens;
}

std::vector<GenerationItem> plan_items(const SourceRecord& record, GenerationTask task,
                                       const std::vector<EvaluationMetric>& metrics, const PromptBuilder& builder) {
    if (const auto v = validate(record, task); !v.empty()) throw RecError(ErrorCode::MissingField, v.front());
    if (metrics.empty()) throw RecError(ErrorCode::EmptyRequired, "at least one metric is required");

    std::vector<GenerationItem> items;
    GenerationItem base;
    base.source = record;
    base.task = task;

    switch (task) {
        case GenerationTask::Pointwise:
            base.source.task_type = TaskType::PointwiseEval;
            for (const auto& metric : metrics) {
                GenerationItem item = base;
                item.prompt = builder.pointwise(metric, *slot(record, "query_with_context"), *slot(record, "answer"));
                items.push_back(std::move(item));
            }
            break;
        case GenerationTask::CiteQuality: {
            base.source.task_type = TaskType::Citation;
            const EvaluationMetric* metric = &metrics.front();
            if (const auto* name = slot(record, "metric")) {
                const auto parsed = parse_metric_name(*name);
                if (!parsed) throw RecError(ErrorCode::WrongType, "unknown metric \"" + *name + "\"");
                metric = &catalog_metric(*parsed);
            }
            std::optional<std::string> conversation;
            if (const auto* c = slot(record, "conversation")) conversation = *c;
            base.prompt = builder.quality(*metric, *slot(record, "task_prompt"), *slot(record, "generation"), conversation);
            base.quality_context =
                ContextDocument{std::nullopt, compose_task_context(*slot(record, "task_prompt"), conversation),
                                SourceKind::TaskPrompt};
            items.push_back(std::move(base));
            break;
        }
        case GenerationTask::CiteRag: {
            base.source.task_type = TaskType::Citation;
            if (const auto* m = slot(record, "mode")) {
                const auto parsed = parse_citation_mode(*m);
                if (!parsed) throw RecError(ErrorCode::WrongType, "unknown citation mode \"" + *m + "\"");
                base.mode = *parsed;
            }
            base.chunks = chunks_from_slot(*slot(record, "chunks"));
            base.prompt = builder.rag_cite(base.chunks, *slot(record, "answer"), base.mode);
            items.push_back(std::move(base));
            break;
        }
    }
    return items;
}

FilterOutcome filter_one(std::string_view raw, const GenerationItem& item, const FilterPolicy& policy) {
    std::string completion;
    switch (item.task) {
        case GenerationTask::Pointwise: {
            const auto parsed = parse_pointwise(raw);
            if (!parsed.ok()) return reject(FilterStatus::RejectedBadJson, first_violation(parsed.report));
            completion = serialize_canonical(*parsed.value);
            break;
        }
        case GenerationTask::CiteQuality: {
            const auto parsed = parse_quality_output(raw);
            if (!parsed.ok()) return reject(FilterStatus::RejectedBadJson, first_violation(parsed.report));
            if (!item.quality_context) throw RecError(ErrorCode::InvalidArgument, "quality item without context");
            const auto report = verify_quality_output(*parsed.value, *item.quality_context, policy.match);
            if (!report.all_citations_verbatim) {
                for (const auto& c : report.per_citation) {
                    if (!c.match.found)
                        return reject(FilterStatus::RejectedNonVerbatim,
                                      "citation " + std::to_string(c.index) + " is not verbatim in the context");
                }
            }
            completion = serialize_canonical(*parsed.value);
            break;
        }
        case GenerationTask::CiteRag: {
            const auto parsed = parse_rag_output(raw, item.mode);
            if (!parsed.ok()) return reject(FilterStatus::RejectedBadJson, first_violation(parsed.report));
            VerificationReport report;
            try {
                report = verify_rag_output(*parsed.value, item.chunks, *slot(item.source, "answer"), policy.match);
            } catch (const RecError& e) {
                if (e.code() != ErrorCode::UnknownContextId) throw;
                return reject(FilterStatus::RejectedNonVerbatim, e.detail());
            }
            if (!report.all_citations_verbatim) return reject(FilterStatus::RejectedNonVerbatim, "snippet not verbatim");
            if (report.claims_verbatim == false) return reject(FilterStatus::RejectedNonVerbatim, "claim not verbatim");
            if (!policy.keep_unsupported_claims &&
                std::any_of(parsed.value->citations.begin(), parsed.value->citations.end(),
                            [](const RagCitationEntry& e) { return e.unsupported(); }))
                return reject(FilterStatus::RejectedNonVerbatim, "claim cites None");
            completion = serialize_canonical(*parsed.value);
            break;
        }
    }

    if (!length_filter(item.prompt.text, completion, policy.max_tokens, *policy.estimator))
        return reject(FilterStatus::RejectedTooLong,
                      "prompt + completion exceed " + std::to_string(policy.max_tokens) + " estimated tokens");

    UnifiedTaskRecord record{item.prompt.text, std::move(completion), item.source.task_type,
                             item.source.source_dataset, FilterStatus::Kept};
    return {FilterStatus::Kept, std::move(record), "kept"};
}

GenerationRun generate(const std::vector<SourceRecord>& records, GenerationTask task,
                       const std::vector<EvaluationMetric>& metrics, const LlmGateway& gateway,
                       const GenerateOptions& options, const PromptBuilder& builder) {
    std::vector<GenerationItem> items;
    for (const auto& r : records) {
        auto planned = plan_items(r, task, metrics, builder);
        std::move(planned.begin(), planned.end(), std::back_inserter(items));
    }

    std::vector<CompletionRequest> requests;
    requests.reserve(items.size());
    for (const auto& item : items)
        requests.push_back({item.prompt, options.temperature, options.max_output_tokens, options.seed});

    const auto slots = gateway.complete_batch(requests, options.parallelism, options.stop);

    GenerationRun run;
    run.outcomes.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto& outcome = run.outcomes[i];
        if (!slots[i].ok()) {
            outcome.gateway_error = slots[i].error;
            outcome.detail = slots[i].error_detail;
            if (slots[i].error == ErrorCode::Cancelled) {
                ++run.cancelled_items;
            } else {
                ++run.stats.total;
                ++run.stats.rejected_transport;
            }
            continue;
        }
        outcome.filtered = filter_one(slots[i].result->text, items[i], options.filter);
        outcome.detail = outcome.filtered->reason;
        run.stats.add(outcome.filtered->status);
        if (outcome.filtered->record) run.records.push_back(*outcome.filtered->record);
    }
    return run;
}

}  // namespace rec
