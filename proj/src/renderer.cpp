/// @file renderer.cpp

#include "rec/renderer.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "rec/errors.hpp"
#include "rec/text.hpp"
#include "rec/verifier.hpp"

namespace rec {

namespace {

struct Insertion {
    std::size_t position;  // code-point offset into the original body
    std::string markers;
};

// Code-point span of `needle` in `chars` at or after `from`, falling back to the
// first occurrence anywhere.
std::optional<CharSpan> locate(std::string_view needle, const std::u32string& chars, std::size_t from) {
    const std::string tail = text::encode_utf8(std::u32string_view(chars).substr(from));
    MatchResult m = find_verbatim(needle, tail, MatchPolicy::normalized());
    if (m.found) return CharSpan{m.char_span->start + from, m.char_span->end + from};
    if (from == 0) return std::nullopt;
    m = find_verbatim(needle, text::encode_utf8(chars), MatchPolicy::normalized());
    if (m.found) return m.char_span;
    return std::nullopt;
}

std::string apply_insertions(const std::u32string& chars, std::vector<Insertion> inserts) {
    std::stable_sort(inserts.begin(), inserts.end(),
                     [](const Insertion& a, const Insertion& b) { return a.position < b.position; });
    std::string out;
    std::size_t cursor = 0;
    for (const auto& ins : inserts) {
        out += text::encode_utf8(std::u32string_view(chars).substr(cursor, ins.position - cursor));
        out += ins.markers;
        cursor = ins.position;
    }
    out += text::encode_utf8(std::u32string_view(chars).substr(cursor));
    return out;
}

std::string marker(std::string_view label) { return "[" + std::string(label) + "]"; }

}  // namespace

std::string RenderedText::to_text() const {
    std::string out = body;
    if (mode_has_snippet(mode) && !references.empty()) {
        out += "\n";
        for (const auto& ref : references) {
            out += "\n" + marker(ref.label) + ":";
            for (const auto& s : ref.snippets) out += " \"" + s + "\"";
        }
    }
    return out;
}

nlohmann::json RenderedText::to_json() const {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : references)
        refs.push_back({{"number", r.number}, {"label", r.label}, {"snippets", r.snippets}});
    return {{"body", body}, {"references", std::move(refs)}, {"mode", to_string(mode)}, {"warnings", warnings}};
}

ReferenceNumbering::ReferenceNumbering(const std::vector<std::string>& snippets) {
    for (const auto& s : snippets) {
        std::string key = text::normalize(s);
        if (std::find(keys_.begin(), keys_.end(), key) != keys_.end()) continue;
        keys_.push_back(std::move(key));
        entries_.push_back(s);
    }
}

int ReferenceNumbering::number_of(std::string_view snippet) const {
    const std::string key = text::normalize(snippet);
    const auto it = std::find(keys_.begin(), keys_.end(), key);
    return it == keys_.end() ? 0 : static_cast<int>(it - keys_.begin()) + 1;
}

ReferenceNumbering assign_reference_numbers(const std::vector<std::string>& snippets) {
    return ReferenceNumbering(snippets);
}

RenderedText render_quality(const QualityEvalOutput& out, CitationMode mode) {
    if (!mode_valid_for_quality(mode))
        throw RecError(ErrorCode::ModeMismatch,
                       "content-quality rendering supports only snippet modes, got " + std::string(to_string(mode)));

    std::vector<std::string> all;
    for (const auto& st : out.statements) {
        for (const auto& c : st.citations) all.push_back(c.snippet);
    }
    const ReferenceNumbering numbering(all);

    RenderedText rendered;
    rendered.mode = mode;
    for (std::size_t i = 0; i < numbering.entries().size(); ++i)
        rendered.references.push_back({static_cast<int>(i) + 1, std::to_string(i + 1), {numbering.entries()[i]}});

    if (mode == CitationMode::PostFixWithSnippet) {
        rendered.body = out.feedback;
        if (!rendered.references.empty()) {
            rendered.body += "\n";
            for (const auto& ref : rendered.references) rendered.body += marker(ref.label);
        }
        return rendered;
    }

    const std::u32string feedback = text::decode_utf8(out.feedback);
    std::vector<Insertion> inserts;
    std::string trailing;
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < out.statements.size(); ++s) {
        const auto& st = out.statements[s];
        std::string markers;
        std::set<int> used;
        for (const auto& c : st.citations) {
            const int n = numbering.number_of(c.snippet);
            if (used.insert(n).second) markers += marker(std::to_string(n));
        }
        if (markers.empty()) continue;
        const auto where = st.statement_string.empty() ? std::nullopt : locate(st.statement_string, feedback, cursor);
        if (!where) {
            rendered.warnings.push_back("statement " + std::to_string(s) +
                                        " not found in feedback; markers appended at the end");
            trailing += " " + markers;
            continue;
        }
        inserts.push_back({where->end, " " + markers});
        cursor = where->end;
    }
    rendered.body = apply_insertions(feedback, std::move(inserts)) + trailing;
    return rendered;
}

RenderedText render_rag(const RagCitationOutput& out, std::string_view answer,
                        const std::vector<ContextDocument>& chunks) {
    std::set<std::string> known;
    for (const auto& c : chunks) {
        if (c.context_id) known.insert(*c.context_id);
    }

    RenderedText rendered;
    rendered.mode = out.mode;
    std::map<std::string, std::size_t> ref_index;
    for (const auto& e : out.citations) {
        if (e.unsupported()) continue;
        if (!known.count(e.context_id))
            throw RecError(ErrorCode::UnknownContextId, "citation cites unknown id \"" + e.context_id + "\"");
        auto [it, inserted] = ref_index.emplace(e.context_id, rendered.references.size());
        if (inserted) {
            const int number = static_cast<int>(rendered.references.size()) + 1;
            rendered.references.push_back({number, e.context_id, {}});
        }
        auto& ref = rendered.references[it->second];
        if (e.snippet) {
            const std::string key = text::normalize(*e.snippet);
            const bool dup = std::any_of(ref.snippets.begin(), ref.snippets.end(),
                                         [&](const std::string& s) { return text::normalize(s) == key; });
            if (!dup) ref.snippets.push_back(*e.snippet);
        }
    }

    if (!mode_has_claim(out.mode)) {
        rendered.body = std::string(answer);
        if (!rendered.references.empty()) {
            rendered.body += "\n";
            for (const auto& ref : rendered.references) rendered.body += marker(ref.label);
        }
        return rendered;
    }

    const std::u32string chars = text::decode_utf8(answer);
    std::map<std::size_t, std::vector<std::string>> at;  // claim end -> ids in entry order
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < out.citations.size(); ++i) {
        const auto& e = out.citations[i];
        if (!e.claim) continue;
        const auto where = locate(*e.claim, chars, cursor);
        if (!where) throw RecError(ErrorCode::ClaimNotFound, "claim " + std::to_string(i) + " does not occur in answer");
        cursor = where->start;
        if (e.unsupported()) continue;
        auto& ids = at[where->end];
        if (std::find(ids.begin(), ids.end(), e.context_id) == ids.end()) ids.push_back(e.context_id);
    }
    std::vector<Insertion> inserts;
    for (const auto& [pos, ids] : at) {
        std::string markers = " ";
        for (const auto& id : ids) markers += marker(id);
        inserts.push_back({pos, markers});
    }
    rendered.body = apply_insertions(chars, std::move(inserts));
    return rendered;
}

}  // namespace rec
