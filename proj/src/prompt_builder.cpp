/// @file prompt_builder.cpp

#include "rec/prompt_builder.hpp"

#include <cctype>
#include <set>

#include "rec/errors.hpp"
#include "rec/schema_io.hpp"

namespace rec {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_templates();
}

namespace {

bool blank(std::string_view s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

void require(std::string_view value, std::string_view what) {
    if (blank(value)) throw RecError(ErrorCode::EmptyRequired, std::string(what) + " must not be empty");
}

bool is_slot_char(char c, bool first) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalpha(u) || c == '_' || (!first && std::isdigit(u));
}

std::string rag_format_fields(CitationMode mode) {
    std::string fields = "         \"context_id\":\"<context_id>\"";
    if (mode_has_claim(mode)) fields += ",\n         \"claim\": \"<claims identified from LLM GENERATED ANSWER>\"";
    if (mode_has_snippet(mode))
        fields += ",\n         \"snippet\": \"<sentences extracted VERBATIM from the cited chunk>\"";
    return fields;
}

std::string_view rag_steps_template(CitationMode mode) {
    switch (mode) {
        case CitationMode::PostFix: return "rag_cite_steps_postfix";
        case CitationMode::Inline: return "rag_cite_steps_inline";
        case CitationMode::PostFixWithSnippet: return "rag_cite_steps_postfix_snippet";
        case CitationMode::InlineWithSnippet: return "rag_cite_steps_inline_snippet";
    }
    return "rag_cite_steps_inline";
}

constexpr std::string_view kAbcdConversationHeading = "### Conversation:";

}  // namespace

std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::QualityEval: return "QualityEval";
        case TemplateId::RagCite: return "RagCite";
        case TemplateId::Pointwise: return "Pointwise";
        case TemplateId::Grounding: return "Grounding";
        case TemplateId::PairwiseJudge: return "PairwiseJudge";
    }
    return "?";
}

std::string_view response_cue(TemplateId id) {
    switch (id) {
        case TemplateId::QualityEval: return "### Response(JSON only):";
        case TemplateId::RagCite: return "Response (JSON only):";
        case TemplateId::Pointwise: return "### Response(JSON Only):";
        case TemplateId::Grounding: return "Answer (yes|no only):";
        case TemplateId::PairwiseJudge: return "Your response should be either \"Output (a)\" or \"Output (b)\":";
    }
    return "";
}

std::string strip_template_metadata(std::string_view raw) {
    while (raw.substr(0, 2) == "#:") {
        const auto nl = raw.find('\n');
        raw = nl == std::string_view::npos ? std::string_view{} : raw.substr(nl + 1);
    }
    if (!raw.empty() && raw.back() == '\n') raw.remove_suffix(1);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    return std::string(raw);
}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        TemplateSet s;
        for (const auto& [name, content] : detail::embedded_templates())
            s.templates_.emplace(std::string(name), strip_template_metadata(content));
        return s;
    }();
    return set;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw RecError(ErrorCode::Io, "template directory not found: " + dir.string());
    TemplateSet s = builtin();
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        s.templates_[entry.path().stem().string()] = strip_template_metadata(read_text_file(entry.path()));
    }
    return s;
}

const std::string& TemplateSet::get(std::string_view name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) throw RecError(ErrorCode::MissingSlot, "no template named " + std::string(name));
    return it->second;
}

std::vector<std::string> TemplateSet::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && is_slot_char(tmpl[i + 1], true)) {
            std::size_t j = i + 1;
            while (j < tmpl.size() && is_slot_char(tmpl[j], false)) ++j;
            if (j < tmpl.size() && tmpl[j] == '}') {
                const std::string name(tmpl.substr(i + 1, j - i - 1));
                const auto it = slots.find(name);
                if (it == slots.end()) throw RecError(ErrorCode::MissingSlot, "template slot {" + name + "} has no value");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += tmpl[i++];
    }
    return out;
}

std::string compose_task_context(std::string_view task_prompt, const std::optional<std::string>& conversation) {
    std::string out(task_prompt);
    if (conversation) {
        out += "\n\n";
        out += kAbcdConversationHeading;
        out += "\n";
        out += *conversation;
    }
    return out;
}

std::string render_chunks(const std::vector<ContextDocument>& chunks) {
    std::string out;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "ID " + chunks[i].context_id.value_or("") + "\n" + chunks[i].body;
    }
    return out;
}

PromptText PromptBuilder::instantiate(TemplateId id, std::string_view name,
                                      std::map<std::string, std::string> slots) const {
    PromptText prompt{fill_template(templates_->get(name), slots), id, std::move(slots)};
    return prompt;
}

PromptText PromptBuilder::quality(const EvaluationMetric& metric, std::string_view task_prompt,
                                  std::string_view generation, const std::optional<std::string>& conversation) const {
    require(task_prompt, "task_prompt");
    require(generation, "generation");
    if (conversation) require(*conversation, "conversation");
    return instantiate(TemplateId::QualityEval, "quality_eval",
                       {{"metric_name", std::string(display_name(metric.name))},
                        {"metric_scale", metric.scale},
                        {"metric_description", metric.description},
                        {"task_prompt", compose_task_context(task_prompt, conversation)},
                        {"generation", std::string(generation)}});
}

PromptText PromptBuilder::rag_cite(const std::vector<ContextDocument>& chunks, std::string_view answer,
                                   CitationMode mode) const {
    require(answer, "answer");
    if (chunks.empty()) throw RecError(ErrorCode::EmptyRequired, "at least one retrieved chunk is required");
    std::set<std::string> seen;
    for (const auto& c : chunks) {
        if (!c.context_id || c.context_id->empty())
            throw RecError(ErrorCode::EmptyRequired, "every retrieved chunk needs a context_id");
        require(c.body, "chunk " + *c.context_id + " body");
        if (!seen.insert(*c.context_id).second)
            throw RecError(ErrorCode::DuplicateContextId, "duplicate context_id " + *c.context_id);
    }
    return instantiate(TemplateId::RagCite, "rag_cite",
                       {{"format_fields", rag_format_fields(mode)},
                        {"steps", templates_->get(rag_steps_template(mode))},
                        {"retrieved_chunks", render_chunks(chunks)},
                        {"answer", std::string(answer)}});
}

PromptText PromptBuilder::pointwise(const EvaluationMetric& metric, std::string_view query_with_context,
                                    std::string_view answer) const {
    require(query_with_context, "query_with_context");
    require(answer, "answer");
    return instantiate(TemplateId::Pointwise, "pointwise",
                       {{"metric_name", std::string(display_name(metric.name))},
                        {"metric_scale", metric.scale},
                        {"metric_description", metric.description},
                        {"query_with_context", std::string(query_with_context)},
                        {"answer", std::string(answer)}});
}

PromptText PromptBuilder::grounding(std::string_view doc, std::string_view claim) const {
    require(doc, "doc");
    require(claim, "claim");
    return instantiate(TemplateId::Grounding, "grounding", {{"doc", std::string(doc)}, {"claim", std::string(claim)}});
}

PromptText PromptBuilder::pairwise(std::string_view instruction, std::string_view out_a,
                                   std::string_view out_b) const {
    require(instruction, "instruction");
    require(out_a, "output (a)");
    require(out_b, "output (b)");
    return instantiate(TemplateId::PairwiseJudge, "pairwise_judge",
                       {{"instruction", std::string(instruction)},
                        {"output_a", std::string(out_a)},
                        {"output_b", std::string(out_b)}});
}

PromptText build_quality_prompt(const EvaluationMetric& metric, std::string_view task_prompt,
                                std::string_view generation, const std::optional<std::string>& conversation) {
    return PromptBuilder().quality(metric, task_prompt, generation, conversation);
}

PromptText build_rag_cite_prompt(const std::vector<ContextDocument>& chunks, std::string_view answer,
                                 CitationMode mode) {
    return PromptBuilder().rag_cite(chunks, answer, mode);
}

PromptText build_pointwise_prompt(const EvaluationMetric& metric, std::string_view query_with_context,
                                  std::string_view answer) {
    return PromptBuilder().pointwise(metric, query_with_context, answer);
}

PromptText build_grounding_prompt(std::string_view doc, std::string_view claim) {
    return PromptBuilder().grounding(doc, claim);
}

PromptText build_pairwise_prompt(std::string_view instruction, std::string_view out_a, std::string_view out_b) {
    return PromptBuilder().pairwise(instruction, out_a, out_b);
}

}  // namespace rec
