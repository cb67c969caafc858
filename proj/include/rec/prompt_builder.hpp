/// @file prompt_builder.hpp
/// @brief Deterministic instantiation of the evaluator prompt templates.
///
/// Templates are plain UTF-8 files with `{slot_name}` placeholders. Leading
/// lines starting with `#:` are template metadata and are not part of the
/// prompt. The built-in set is compiled from `templates/`; a directory passed
/// to TemplateSet::from_directory overrides individual files.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rec/model.hpp"

namespace rec {

enum class TemplateId { QualityEval, RagCite, Pointwise, Grounding, PairwiseJudge };

std::string_view to_string(TemplateId id);

struct PromptText {
    std::string text;
    TemplateId template_id;
    std::map<std::string, std::string> slots_filled;
};

/// Response cue each template ends with.
std::string_view response_cue(TemplateId id);

class TemplateSet {
public:
    static const TemplateSet& builtin();
    /// Files named `<template>.txt` in `dir` replace the built-in ones.
    static TemplateSet from_directory(const std::filesystem::path& dir);

    const std::string& get(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

/// Strips `#:` metadata lines and a single trailing newline.
std::string strip_template_metadata(std::string_view raw);

/// Substitutes every `{identifier}` in `tmpl`. Values are inserted literally
/// and never rescanned. Throws RecError(MissingSlot) for an unknown slot.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& slots);

/// Text that fills the task-prompt section of the quality prompt. The
/// optional conversation is appended under a `### Conversation:` heading.
/// This is also the context that quality citations are verified against.
std::string compose_task_context(std::string_view task_prompt, const std::optional<std::string>& conversation);

/// Chunks as `ID <context_id>\n<body>` blocks separated by blank lines.
std::string render_chunks(const std::vector<ContextDocument>& chunks);

class PromptBuilder {
public:
    PromptBuilder() : templates_(&TemplateSet::builtin()) {}
    explicit PromptBuilder(const TemplateSet& templates) : templates_(&templates) {}

    PromptText quality(const EvaluationMetric& metric, std::string_view task_prompt, std::string_view generation,
                       const std::optional<std::string>& conversation = std::nullopt) const;
    PromptText rag_cite(const std::vector<ContextDocument>& chunks, std::string_view answer, CitationMode mode) const;
    PromptText pointwise(const EvaluationMetric& metric, std::string_view query_with_context,
                         std::string_view answer) const;
    PromptText grounding(std::string_view doc, std::string_view claim) const;
    PromptText pairwise(std::string_view instruction, std::string_view out_a, std::string_view out_b) const;

private:
    PromptText instantiate(TemplateId id, std::string_view name, std::map<std::string, std::string> slots) const;

    const TemplateSet* templates_;
};

// Convenience wrappers over the built-in template set.
PromptText build_quality_prompt(const EvaluationMetric& metric, std::string_view task_prompt,
                                std::string_view generation,
                                const std::optional<std::string>& conversation = std::nullopt);
PromptText build_rag_cite_prompt(const std::vector<ContextDocument>& chunks, std::string_view answer,
                                 CitationMode mode);
PromptText build_pointwise_prompt(const EvaluationMetric& metric, std::string_view query_with_context,
                                  std::string_view answer);
PromptText build_grounding_prompt(std::string_view doc, std::string_view claim);
PromptText build_pairwise_prompt(std::string_view instruction, std::string_view out_a, std::string_view out_b);

}  // namespace rec
