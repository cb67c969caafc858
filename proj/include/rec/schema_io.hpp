/// @file schema_io.hpp
/// @brief Parsing, validation and canonical serialization of evaluator outputs.
///
/// Parsing is lenient about the envelope (prose, code fences around the JSON)
/// and strict about the payload: required members must be present and typed.
/// Unknown members are kept in `extra_fields` and dropped on canonical output.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rec/model.hpp"

namespace rec {

using json = nlohmann::json;

enum class ViolationCode { BadJson, MissingField, WrongType, ModeMismatch, EmptyRequired };

std::string_view to_string(ViolationCode code);

struct Violation {
    ViolationCode code;
    std::string path;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    void add(ViolationCode code, std::string path, std::string detail) {
        violations.push_back({code, std::move(path), std::move(detail)});
    }
    /// Code of the first violation; only meaningful when !ok().
    ViolationCode first_code() const { return violations.front().code; }
};

template <typename T>
struct ParseResult {
    std::optional<T> value;
    ValidationReport report;

    bool ok() const { return value.has_value() && report.ok(); }
};

/// Locates the leftmost balanced `{...}` region that parses as a JSON object.
std::optional<json> extract_first_json_object(std::string_view raw);

ParseResult<QualityEvalOutput> parse_quality_output(std::string_view raw);
ParseResult<RagCitationOutput> parse_rag_output(std::string_view raw, CitationMode mode);
ParseResult<PointwiseVerdict> parse_pointwise(std::string_view raw);

// json conversions (canonical member layout)
json to_json(const CitationSnippet& c);
json to_json(const Statement& s);
json to_json(const QualityEvalOutput& out);
json to_json(const RagCitationEntry& e);
json to_json(const RagCitationOutput& out);
json to_json(const PointwiseVerdict& v);
json to_json(const UnifiedTaskRecord& r);
json to_json(const EvaluationMetric& m);
json to_json(const ContextDocument& d);
json to_json(const PairwiseJudgment& j);
json to_json(const ValidationReport& r);

ParseResult<UnifiedTaskRecord> unified_record_from_json(const json& j);
ParseResult<ContextDocument> context_from_json(const json& j);

/// Sorted keys, no insignificant whitespace, UTF-8 passed through unescaped.
std::string canonical_dump(const json& j);

template <typename T>
std::string serialize_canonical(const T& value) {
    return canonical_dump(to_json(value));
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

enum class LineErrorPolicy { Skip, Abort };

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string detail;
};

template <typename T>
struct JsonlRead {
    std::vector<T> records;
    std::vector<LineError> errors;
};

/// Blank lines are ignored. With Abort the first bad line throws RecError(BadJson).
JsonlRead<json> read_jsonl(const std::filesystem::path& path, LineErrorPolicy policy);
JsonlRead<UnifiedTaskRecord> read_unified_jsonl(const std::filesystem::path& path, LineErrorPolicy policy);

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
void write_jsonl(const std::filesystem::path& path, const std::vector<UnifiedTaskRecord>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rec
