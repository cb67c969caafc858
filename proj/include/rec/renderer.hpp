/// @file renderer.hpp
/// @brief Human-readable rendering of verified outputs in the four citation modes.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rec/model.hpp"

namespace rec {

struct Reference {
    int number = 0;                     // 1..k in first-appearance order
    std::string label;                  // text inside the [..] marker
    std::vector<std::string> snippets;  // empty for plain id references

    bool operator==(const Reference&) const = default;
};

struct RenderedText {
    std::string body;
    std::vector<Reference> references;
    CitationMode mode = CitationMode::InlineWithSnippet;
    std::vector<std::string> warnings;

    /// Body followed, for snippet modes, by a blank line and `[label]: "snippet"` lines.
    std::string to_text() const;
    nlohmann::json to_json() const;
};

/// Numbers distinct snippets by first appearance; snippets equal after
/// normalization share a number.
class ReferenceNumbering {
public:
    explicit ReferenceNumbering(const std::vector<std::string>& snippets);

    /// 0 when the snippet was not in the input list.
    int number_of(std::string_view snippet) const;
    /// One representative (first-seen spelling) per number, in order.
    const std::vector<std::string>& entries() const { return entries_; }

private:
    std::vector<std::string> entries_;
    std::vector<std::string> keys_;
};

ReferenceNumbering assign_reference_numbers(const std::vector<std::string>& snippets);

/// Throws RecError(ModeMismatch) for PostFix and Inline.
RenderedText render_quality(const QualityEvalOutput& out, CitationMode mode);

/// Entries with context_id "None" produce no marker. Throws
/// RecError(ClaimNotFound) when an inline claim does not occur in `answer`.
RenderedText render_rag(const RagCitationOutput& out, std::string_view answer,
                        const std::vector<ContextDocument>& chunks);

}  // namespace rec
