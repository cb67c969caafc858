/// @file schema_io.cpp

#include "rec/schema_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "rec/errors.hpp"

namespace rec {

namespace {

// Index just past the `}` closing the object that opens at `open`, or npos.
std::size_t match_object(std::string_view raw, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < raw.size(); ++i) {
        const char c = raw[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

ExtraFields collect_extras(const json& obj, const std::set<std::string>& known) {
    ExtraFields extras;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) extras.emplace(it.key(), canonical_dump(it.value()));
    }
    return extras;
}

// Reads a required string member; records the violation and returns nullopt on failure.
std::optional<std::string> required_string(const json& obj, const std::string& key, const std::string& path,
                                           ValidationReport& report) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        report.add(ViolationCode::MissingField, path + "." + key, "missing required member");
        return std::nullopt;
    }
    if (!it->is_string()) {
        report.add(ViolationCode::WrongType, path + "." + key, "expected string, got " + std::string(it->type_name()));
        return std::nullopt;
    }
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const std::string& key, const std::string& path,
                                           ValidationReport& report) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        report.add(ViolationCode::WrongType, path + "." + key, "expected string, got " + std::string(it->type_name()));
        return std::nullopt;
    }
    return it->get<std::string>();
}

const json* required_array(const json& obj, const std::string& key, const std::string& path,
                           ValidationReport& report) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        report.add(ViolationCode::MissingField, path + "." + key, "missing required member");
        return nullptr;
    }
    if (!it->is_array()) {
        report.add(ViolationCode::WrongType, path + "." + key, "expected array, got " + std::string(it->type_name()));
        return nullptr;
    }
    return &*it;
}

std::optional<YesNo> required_yes_no(const json& obj, const std::string& key, ValidationReport& report) {
    auto text = required_string(obj, key, "$", report);
    if (!text) return std::nullopt;
    auto value = parse_yes_no(*text);
    if (!value) report.add(ViolationCode::WrongType, "$." + key, "expected Yes or No, got \"" + *text + "\"");
    return value;
}

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

// Common envelope step: find the object or report BadJson.
std::optional<json> envelope(std::string_view raw, ValidationReport& report) {
    auto obj = extract_first_json_object(raw);
    if (!obj) report.add(ViolationCode::BadJson, "$", "no parseable JSON object in output");
    return obj;
}

std::optional<CitationSnippet> parse_citation(const json& item, const std::string& path, ValidationReport& report) {
    CitationSnippet c;
    if (item.is_string()) {
        c.snippet = item.get<std::string>();
    } else if (item.is_object()) {
        auto snippet = required_string(item, "snippet", path, report);
        if (!snippet) return std::nullopt;
        c.snippet = std::move(*snippet);
        c.context_id = optional_string(item, "context_id", path, report);
        if (const auto it = item.find("char_span"); it != item.end() && !it->is_null()) {
            if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_unsigned() || !(*it)[1].is_number_unsigned()) {
                report.add(ViolationCode::WrongType, path + ".char_span", "expected [start, end]");
                return std::nullopt;
            }
            c.char_span = CharSpan{(*it)[0].get<std::size_t>(), (*it)[1].get<std::size_t>()};
        }
    } else {
        report.add(ViolationCode::WrongType, path, "citation must be a string or an object");
        return std::nullopt;
    }
    if (c.snippet.empty()) {
        report.add(ViolationCode::EmptyRequired, path + ".snippet", "snippet is empty");
        return std::nullopt;
    }
    return c;
}

}  // namespace

std::string_view to_string(ViolationCode code) {
    switch (code) {
        case ViolationCode::BadJson: return "BadJson";
        case ViolationCode::MissingField: return "MissingField";
        case ViolationCode::WrongType: return "WrongType";
        case ViolationCode::ModeMismatch: return "ModeMismatch";
        case ViolationCode::EmptyRequired: return "EmptyRequired";
    }
    return "?";
}

std::optional<json> extract_first_json_object(std::string_view raw) {
    std::size_t pos = raw.find('{');
    while (pos != std::string_view::npos) {
        const std::size_t end = match_object(raw, pos);
        if (end != std::string_view::npos) {
            json parsed = json::parse(raw.substr(pos, end - pos), nullptr, /*allow_exceptions=*/false);
            if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        }
        pos = raw.find('{', pos + 1);
    }
    return std::nullopt;
}

ParseResult<QualityEvalOutput> parse_quality_output(std::string_view raw) {
    ParseResult<QualityEvalOutput> result;
    auto& report = result.report;
    const auto obj = envelope(raw, report);
    if (!obj) return result;

    QualityEvalOutput out;
    const auto answer = required_yes_no(*obj, "answer", report);
    const auto feedback = required_string(*obj, "feedback", "$", report);
    if (feedback && is_blank(*feedback)) report.add(ViolationCode::EmptyRequired, "$.feedback", "feedback is empty");
    const json* statements = required_array(*obj, "statements", "$", report);
    if (statements) {
        for (std::size_t i = 0; i < statements->size(); ++i) {
            const std::string path = "$.statements[" + std::to_string(i) + "]";
            const json& item = (*statements)[i];
            if (!item.is_object()) {
                report.add(ViolationCode::WrongType, path, "statement must be an object");
                continue;
            }
            Statement st;
            auto text = required_string(item, "statement_string", path, report);
            if (text && text->empty()) report.add(ViolationCode::EmptyRequired, path + ".statement_string", "empty");
            if (text) st.statement_string = std::move(*text);
            if (const json* cites = required_array(item, "citations", path, report)) {
                for (std::size_t j = 0; j < cites->size(); ++j) {
                    if (auto c = parse_citation((*cites)[j], path + ".citations[" + std::to_string(j) + "]", report))
                        st.citations.push_back(std::move(*c));
                }
            }
            out.statements.push_back(std::move(st));
        }
    }
    if (answer == YesNo::No && statements && statements->empty())
        report.add(ViolationCode::EmptyRequired, "$.statements", "answer is No but no statements support it");

    if (!report.ok()) return result;
    out.answer = *answer;
    out.feedback = *feedback;
    out.extra_fields = collect_extras(*obj, {"answer", "feedback", "statements"});
    result.value = std::move(out);
    return result;
}

ParseResult<RagCitationOutput> parse_rag_output(std::string_view raw, CitationMode mode) {
    ParseResult<RagCitationOutput> result;
    auto& report = result.report;
    const auto obj = envelope(raw, report);
    if (!obj) return result;

    RagCitationOutput out;
    out.mode = mode;
    const json* citations = required_array(*obj, "citations", "$", report);
    if (citations) {
        for (std::size_t i = 0; i < citations->size(); ++i) {
            const std::string path = "$.citations[" + std::to_string(i) + "]";
            const json& item = (*citations)[i];
            if (!item.is_object()) {
                report.add(ViolationCode::WrongType, path, "citation must be an object");
                continue;
            }
            RagCitationEntry entry;
            auto id = required_string(item, "context_id", path, report);
            if (id && id->empty()) report.add(ViolationCode::EmptyRequired, path + ".context_id", "empty");
            if (id) entry.context_id = std::move(*id);
            entry.claim = optional_string(item, "claim", path, report);
            entry.snippet = optional_string(item, "snippet", path, report);

            const std::string mode_name(to_string(mode));
            if (mode_has_claim(mode) && !entry.claim)
                report.add(ViolationCode::ModeMismatch, path + ".claim", "claim required in mode " + mode_name);
            if (!mode_has_claim(mode) && item.contains("claim"))
                report.add(ViolationCode::ModeMismatch, path + ".claim", "claim not allowed in mode " + mode_name);
            if (mode_has_snippet(mode) && !entry.snippet && !entry.unsupported())
                report.add(ViolationCode::ModeMismatch, path + ".snippet", "snippet required in mode " + mode_name);
            if (!mode_has_snippet(mode) && item.contains("snippet"))
                report.add(ViolationCode::ModeMismatch, path + ".snippet", "snippet not allowed in mode " + mode_name);
            if (entry.claim && entry.claim->empty())
                report.add(ViolationCode::EmptyRequired, path + ".claim", "empty");
            if (entry.snippet && entry.snippet->empty())
                report.add(ViolationCode::EmptyRequired, path + ".snippet", "empty");

            entry.extra_fields = collect_extras(item, {"context_id", "claim", "snippet"});
            out.citations.push_back(std::move(entry));
        }
    }
    if (!report.ok()) return result;
    out.extra_fields = collect_extras(*obj, {"citations"});
    result.value = std::move(out);
    return result;
}

ParseResult<PointwiseVerdict> parse_pointwise(std::string_view raw) {
    ParseResult<PointwiseVerdict> result;
    auto& report = result.report;
    const auto obj = envelope(raw, report);
    if (!obj) return result;

    const auto label = required_yes_no(*obj, "metriclabel", report);
    auto justification = required_string(*obj, "justification", "$", report);
    if (justification && is_blank(*justification))
        report.add(ViolationCode::EmptyRequired, "$.justification", "justification is empty");
    if (!report.ok()) return result;

    PointwiseVerdict v;
    v.metriclabel = *label;
    v.justification = std::move(*justification);
    v.extra_fields = collect_extras(*obj, {"metriclabel", "justification"});
    result.value = std::move(v);
    return result;
}

json to_json(const CitationSnippet& c) {
    json j{{"snippet", c.snippet}};
    if (c.context_id) j["context_id"] = *c.context_id;
    if (c.char_span) j["char_span"] = json::array({c.char_span->start, c.char_span->end});
    return j;
}

json to_json(const Statement& s) {
    json cites = json::array();
    for (const auto& c : s.citations) cites.push_back(to_json(c));
    return {{"statement_string", s.statement_string}, {"citations", std::move(cites)}};
}

json to_json(const QualityEvalOutput& out) {
    json statements = json::array();
    for (const auto& s : out.statements) statements.push_back(to_json(s));
    return {{"answer", to_string(out.answer)}, {"feedback", out.feedback}, {"statements", std::move(statements)}};
}

json to_json(const RagCitationEntry& e) {
    json j{{"context_id", e.context_id}};
    if (e.claim) j["claim"] = *e.claim;
    if (e.snippet) j["snippet"] = *e.snippet;
    return j;
}

json to_json(const RagCitationOutput& out) {
    json cites = json::array();
    for (const auto& e : out.citations) cites.push_back(to_json(e));
    return {{"citations", std::move(cites)}};
}

json to_json(const PointwiseVerdict& v) {
    return {{"metriclabel", to_string(v.metriclabel)}, {"justification", v.justification}};
}

json to_json(const UnifiedTaskRecord& r) {
    return {{"prompt", r.prompt},
            {"completion", r.completion},
            {"task_type", to_string(r.task_type)},
            {"source_dataset", r.source_dataset},
            {"filter_status", to_string(r.filter_status)}};
}

json to_json(const EvaluationMetric& m) {
    return {{"name", to_string(m.name)}, {"scale", m.scale}, {"description", m.description}};
}

json to_json(const ContextDocument& d) {
    json j{{"body", d.body}, {"source_kind", to_string(d.source_kind)}};
    if (d.context_id) j["context_id"] = *d.context_id;
    return j;
}

json to_json(const PairwiseJudgment& p) {
    return {{"instruction", p.instruction},
            {"response_a", p.response_a},
            {"response_b", p.response_b},
            {"verdict", to_string(p.verdict)},
            {"presentation_order", to_string(p.presentation_order)}};
}

json to_json(const ValidationReport& r) {
    json violations = json::array();
    for (const auto& v : r.violations)
        violations.push_back({{"code", to_string(v.code)}, {"path", v.path}, {"detail", v.detail}});
    return {{"ok", r.ok()}, {"violations", std::move(violations)}};
}

ParseResult<UnifiedTaskRecord> unified_record_from_json(const json& j) {
    ParseResult<UnifiedTaskRecord> result;
    auto& report = result.report;
    if (!j.is_object()) {
        report.add(ViolationCode::WrongType, "$", "record must be an object");
        return result;
    }
    auto prompt = required_string(j, "prompt", "$", report);
    auto completion = required_string(j, "completion", "$", report);
    auto task_type = required_string(j, "task_type", "$", report);
    auto source = required_string(j, "source_dataset", "$", report);
    auto status = required_string(j, "filter_status", "$", report);
    if (!report.ok()) return result;

    UnifiedTaskRecord r;
    r.prompt = std::move(*prompt);
    r.completion = std::move(*completion);
    r.source_dataset = std::move(*source);
    const auto tt = parse_task_type(*task_type);
    if (!tt) report.add(ViolationCode::WrongType, "$.task_type", "unknown task type \"" + *task_type + "\"");
    const auto fs = parse_filter_status(*status);
    if (!fs) report.add(ViolationCode::WrongType, "$.filter_status", "unknown filter status \"" + *status + "\"");
    if (!report.ok()) return result;
    r.task_type = *tt;
    r.filter_status = *fs;
    for (const auto& msg : validate(r)) report.add(ViolationCode::EmptyRequired, "$", msg);
    if (report.ok()) result.value = std::move(r);
    return result;
}

ParseResult<ContextDocument> context_from_json(const json& j) {
    ParseResult<ContextDocument> result;
    auto& report = result.report;
    if (!j.is_object()) {
        report.add(ViolationCode::WrongType, "$", "context must be an object");
        return result;
    }
    ContextDocument doc;
    auto body = required_string(j, "body", "$", report);
    if (const auto it = j.find("context_id"); it != j.end() && !it->is_null()) {
        if (it->is_string()) {
            doc.context_id = it->get<std::string>();
        } else if (it->is_number_integer()) {
            doc.context_id = std::to_string(it->get<long long>());
        } else {
            report.add(ViolationCode::WrongType, "$.context_id", "expected string");
        }
    }
    doc.source_kind = doc.context_id ? SourceKind::RetrievedChunk : SourceKind::Document;
    if (auto kind = optional_string(j, "source_kind", "$", report)) {
        if (auto parsed = parse_source_kind(*kind)) {
            doc.source_kind = *parsed;
        } else {
            report.add(ViolationCode::WrongType, "$.source_kind", "unknown source kind \"" + *kind + "\"");
        }
    }
    if (!report.ok()) return result;
    doc.body = std::move(*body);
    for (const auto& msg : validate(doc)) report.add(ViolationCode::EmptyRequired, "$", msg);
    if (report.ok()) result.value = std::move(doc);
    return result;
}

std::string canonical_dump(const json& j) {
    return j.dump(-1, ' ', /*ensure_ascii=*/false, json::error_handler_t::replace);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RecError(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RecError(ErrorCode::Io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw RecError(ErrorCode::Io, "write failed for " + path.string());
}

JsonlRead<json> read_jsonl(const std::filesystem::path& path, LineErrorPolicy policy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RecError(ErrorCode::Io, "cannot open " + path.string());
    JsonlRead<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded()) {
            const std::string detail = "line " + std::to_string(line_no) + ": malformed JSON";
            if (policy == LineErrorPolicy::Abort) throw RecError(ErrorCode::BadJson, path.string() + " " + detail);
            out.errors.push_back({line_no, detail});
            continue;
        }
        out.records.push_back(std::move(parsed));
    }
    return out;
}

JsonlRead<UnifiedTaskRecord> read_unified_jsonl(const std::filesystem::path& path, LineErrorPolicy policy) {
    // Line numbers are needed for schema errors too, so parse line by line here.
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RecError(ErrorCode::Io, "cannot open " + path.string());
    JsonlRead<UnifiedTaskRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::string detail;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded()) {
            detail = "malformed JSON";
        } else {
            auto rec = unified_record_from_json(parsed);
            if (rec.ok()) {
                out.records.push_back(std::move(*rec.value));
                continue;
            }
            const auto& v = rec.report.violations.front();
            detail = std::string(to_string(v.code)) + " at " + v.path + ": " + v.detail;
        }
        detail = "line " + std::to_string(line_no) + ": " + detail;
        if (policy == LineErrorPolicy::Abort) throw RecError(ErrorCode::BadJson, path.string() + " " + detail);
        out.errors.push_back({line_no, detail});
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
    std::string content;
    for (const auto& r : records) {
        content += canonical_dump(r);
        content += '\n';
    }
    write_text_file(path, content);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<UnifiedTaskRecord>& records) {
    std::vector<json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(to_json(r));
    write_jsonl(path, rows);
}

}  // namespace rec
