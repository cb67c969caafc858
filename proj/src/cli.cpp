/// @file cli.cpp

#include "rec/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rec/datagen.hpp"
#include "rec/gateway.hpp"
#include "rec/metrics.hpp"
#include "rec/mock_backend.hpp"
#include "rec/renderer.hpp"
#include "rec/schema_io.hpp"
#include "rec/verifier.hpp"

namespace rec {

namespace {

using Env = std::vector<std::pair<std::string, std::string>>;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Settings {
    std::string backend;
    std::optional<std::int64_t> seed;
    MatchPolicy policy = MatchPolicy::normalized();
    std::string format = "text";
    std::string template_dir;
    std::string audit_log;
    std::size_t parallelism = 4;
    std::string base_url;
    std::string model;
    std::string api_key;
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_ms = 250;
    int max_output_tokens = 2048;
};

/// Raw flag values; empty means "not given on the command line".
struct GlobalFlags {
    std::string config, backend, seed, policy, format, template_dir, audit_log, parallelism, base_url, model,
        timeout_ms, max_retries, backoff_ms, max_output_tokens;
};

std::optional<std::string> lookup_env(const Env* env, const std::string& name) {
    if (env) {
        for (const auto& [k, v] : *env)
            if (k == name) return v;
        return std::nullopt;
    }
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

template <typename T>
T to_number(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        if constexpr (std::is_unsigned_v<T>) {
            if (v < 0) throw std::invalid_argument(text);
        }
        return static_cast<T>(v);
    } catch (const std::exception&) {
        throw UsageError(what + " must be an integer, got \"" + text + "\"");
    }
}

Settings resolve_settings(const GlobalFlags& flags, const Env* env) {
    nlohmann::json config = nlohmann::json::object();
    std::string config_path = flags.config;
    if (config_path.empty()) config_path = lookup_env(env, "REC_CONFIG").value_or("");
    if (!config_path.empty()) {
        config = nlohmann::json::parse(read_text_file(config_path), nullptr, false);
        if (config.is_discarded() || !config.is_object())
            throw UsageError("config file must hold a flat JSON object: " + config_path);
    }

    // flags > env > config
    auto pick = [&](const std::string& flag, const char* env_name, const char* key) -> std::optional<std::string> {
        if (!flag.empty()) return flag;
        if (auto v = lookup_env(env, env_name)) return v;
        if (const auto it = config.find(key); it != config.end() && !it->is_null())
            return it->is_string() ? it->get<std::string>() : it->dump();
        return std::nullopt;
    };

    Settings s;
    if (auto v = pick(flags.backend, "REC_BACKEND", "backend")) s.backend = *v;
    if (auto v = pick(flags.seed, "REC_SEED", "seed")) s.seed = to_number<std::int64_t>(*v, "seed");
    if (auto v = pick(flags.policy, "REC_POLICY", "policy")) {
        const auto mode = parse_match_mode(*v);
        if (!mode) throw UsageError("policy must be strict or normalized, got \"" + *v + "\"");
        s.policy = MatchPolicy{*mode};
    }
    if (auto v = pick(flags.format, "REC_FORMAT", "format")) {
        if (*v != "text" && *v != "json") throw UsageError("format must be text or json, got \"" + *v + "\"");
        s.format = *v;
    }
    if (auto v = pick(flags.template_dir, "REC_TEMPLATE_DIR", "template_dir")) s.template_dir = *v;
    if (auto v = pick(flags.audit_log, "REC_AUDIT_LOG", "audit_log")) s.audit_log = *v;
    if (auto v = pick(flags.parallelism, "REC_PARALLELISM", "parallelism")) {
        s.parallelism = to_number<std::size_t>(*v, "parallelism");
        if (s.parallelism == 0) throw UsageError("parallelism must be at least 1");
    }
    if (auto v = pick(flags.base_url, "REC_BASE_URL", "base_url")) s.base_url = *v;
    if (auto v = pick(flags.model, "REC_MODEL", "model")) s.model = *v;
    if (auto v = pick(flags.timeout_ms, "REC_TIMEOUT_MS", "timeout_ms")) s.timeout_ms = to_number<int>(*v, "timeout_ms");
    if (auto v = pick(flags.max_retries, "REC_MAX_RETRIES", "max_retries"))
        s.max_retries = to_number<int>(*v, "max_retries");
    if (auto v = pick(flags.backoff_ms, "REC_BACKOFF_MS", "backoff_ms")) s.backoff_ms = to_number<int>(*v, "backoff_ms");
    if (auto v = pick(flags.max_output_tokens, "REC_MAX_OUTPUT_TOKENS", "max_output_tokens"))
        s.max_output_tokens = to_number<int>(*v, "max_output_tokens");
    // Credentials come from the environment only.
    s.api_key = lookup_env(env, "REC_API_KEY").value_or("");
    return s;
}

std::unique_ptr<LlmGateway> make_gateway(const Settings& s) {
    std::shared_ptr<CompletionBackend> backend;
    if (s.backend.rfind("mock:", 0) == 0) {
        backend = MockBackend::from_script_file(s.backend.substr(5), s.seed);
    } else if (s.backend == "http") {
        if (s.base_url.empty()) throw UsageError("http backend needs --base-url or REC_BASE_URL");
        backend = std::make_shared<HttpChatBackend>(HttpBackendConfig{s.base_url, s.model, s.api_key, s.timeout_ms});
    } else if (s.backend.empty()) {
        throw UsageError("no backend configured; use --backend mock:SCRIPT or --backend http");
    } else {
        throw UsageError("unknown backend \"" + s.backend + "\"");
    }
    RetryPolicy retry;
    retry.max_retries = s.max_retries;
    retry.backoff_base = std::chrono::milliseconds(s.backoff_ms);
    std::shared_ptr<AuditLog> audit;
    if (!s.audit_log.empty()) audit = std::make_shared<AuditLog>(s.audit_log);
    return std::make_unique<LlmGateway>(std::move(backend), retry, std::move(audit));
}

TemplateSet load_templates(const Settings& s) {
    return s.template_dir.empty() ? TemplateSet::builtin() : TemplateSet::from_directory(s.template_dir);
}

/// File contents without one trailing line break.
std::string read_text_input(const std::string& path) {
    std::string text = read_text_file(path);
    if (!text.empty() && text.back() == '\n') text.pop_back();
    if (!text.empty() && text.back() == '\r') text.pop_back();
    return text;
}

struct QualityContext {
    std::string task_prompt;
    std::optional<std::string> conversation;
};

/// A JSON object {task_prompt, conversation?} or plain text used as the task prompt.
QualityContext read_quality_context(const std::string& path) {
    const std::string text = read_text_input(path);
    const auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
        const auto tp = parsed.find("task_prompt");
        if (tp == parsed.end() || !tp->is_string()) throw UsageError("context JSON needs a task_prompt string");
        QualityContext ctx{tp->get<std::string>(), std::nullopt};
        if (const auto c = parsed.find("conversation"); c != parsed.end() && c->is_string())
            ctx.conversation = c->get<std::string>();
        return ctx;
    }
    return {text, std::nullopt};
}

std::vector<ContextDocument> contexts_from_json_list(const std::vector<nlohmann::json>& items,
                                                     const std::string& path) {
    std::vector<ContextDocument> docs;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto doc = context_from_json(items[i]);
        if (!doc.ok() || !doc.value->context_id)
            throw UsageError(path + ": entry " + std::to_string(i + 1) + " needs context_id and body");
        doc.value->source_kind = SourceKind::RetrievedChunk;
        docs.push_back(std::move(*doc.value));
    }
    return docs;
}

/// A JSON array or JSONL of {context_id, body}.
std::vector<ContextDocument> read_chunks(const std::string& path) {
    const std::string text = read_text_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        const auto parsed = nlohmann::json::parse(text, nullptr, false);
        if (parsed.is_discarded()) throw UsageError(path + ": not valid JSON");
        return contexts_from_json_list(parsed.get<std::vector<nlohmann::json>>(), path);
    }
    return contexts_from_json_list(read_jsonl(path, LineErrorPolicy::Abort).records, path);
}

nlohmann::json to_json(const MatchResult& m) {
    nlohmann::json j{{"found", m.found}, {"occurrence_count", m.occurrence_count}};
    j["char_span"] = m.char_span ? nlohmann::json::array({m.char_span->start, m.char_span->end}) : nlohmann::json();
    return j;
}

nlohmann::json to_json(const VerificationReport& r) {
    nlohmann::json per_citation = nlohmann::json::array();
    for (const auto& c : r.per_citation) {
        auto j = to_json(c.match);
        j["index"] = c.index;
        if (c.statement) j["statement"] = *c.statement;
        if (c.context_id) j["context_id"] = *c.context_id;
        per_citation.push_back(std::move(j));
    }
    nlohmann::json per_claim = nlohmann::json::array();
    for (const auto& c : r.per_claim) {
        auto j = to_json(c.match);
        j["entry"] = c.entry;
        per_claim.push_back(std::move(j));
    }
    nlohmann::json extractive = nlohmann::json::array();
    for (const auto& [idx, ok] : r.statements_extractive) extractive.push_back({{"statement", idx}, {"extractive", ok}});
    nlohmann::json j{{"all_citations_verbatim", r.all_citations_verbatim},
                     {"per_citation", per_citation},
                     {"per_claim", per_claim},
                     {"statements_extractive", extractive},
                     {"warnings", r.warnings}};
    j["claims_verbatim"] = r.claims_verbatim ? nlohmann::json(*r.claims_verbatim) : nlohmann::json();
    return j;
}

void write_json_output(const nlohmann::json& j, const std::string& path, std::ostream& out) {
    const std::string text = canonical_dump(j) + "\n";
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

void emit_rendered(const RenderedText& rendered, const Settings& s, std::ostream& out) {
    if (s.format == "json")
        out << canonical_dump(rendered.to_json()) << "\n";
    else
        out << rendered.to_text() << "\n";
}

void report_violations(const ValidationReport& report, std::ostream& err) {
    for (const auto& v : report.violations)
        err << "invalid output: " << to_string(v.code) << " at " << v.path << ": " << v.detail << "\n";
}

CompletionRequest make_request(PromptText prompt, const Settings& s) {
    return {std::move(prompt), 0.0, s.max_output_tokens, s.seed};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

EvaluationMetric require_metric(const std::string& name) {
    const auto m = parse_metric_name(name);
    if (!m) throw UsageError("unknown metric \"" + name + "\"; expected faithfulness, instruction_following, "
                             "coherence or completeness");
    return catalog_metric(*m);
}

CitationMode require_mode(const std::string& name) {
    const auto m = parse_citation_mode(name);
    if (!m) throw UsageError("unknown citation mode \"" + name + "\"");
    return *m;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string context, generation, metric, mode = "inline-snippet", out;
};

int cmd_evaluate(const EvaluateArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    const auto metric = require_metric(a.metric);
    const auto mode = require_mode(a.mode);
    if (!mode_valid_for_quality(mode)) throw UsageError("quality evaluation needs a snippet mode");
    const auto ctx = read_quality_context(a.context);
    const auto generation = read_text_input(a.generation);
    const auto templates = load_templates(s);
    const PromptBuilder builder(templates);
    auto gateway = make_gateway(s);

    auto prompt = builder.quality(metric, ctx.task_prompt, generation, ctx.conversation);
    const auto result = gateway->complete(make_request(prompt, s));

    nlohmann::json sidecar{{"raw", result.text}, {"metric", to_string(metric.name)}, {"mode", to_string(mode)}};
    const auto parsed = parse_quality_output(result.text);
    sidecar["validation"] = to_json(parsed.report);
    if (!parsed.ok()) {
        report_violations(parsed.report, err);
        if (!a.out.empty()) write_json_output(sidecar, a.out, out);
        return kExitValidation;
    }
    const ContextDocument context{std::nullopt, compose_task_context(ctx.task_prompt, ctx.conversation),
                                  SourceKind::TaskPrompt};
    const auto verification = verify_quality_output(*parsed.value, context, s.policy);
    auto rendered = render_quality(*parsed.value, mode);
    sidecar["parsed"] = to_json(*parsed.value);
    sidecar["verification"] = to_json(verification);
    sidecar["rendered"] = rendered.to_json();

    for (const auto& c : verification.per_citation)
        if (!c.match.found) err << "warning: citation " << c.index << " is not verbatim in the context\n";
    for (const auto& w : verification.warnings) err << "warning: " << w << "\n";
    for (const auto& w : rendered.warnings) err << "warning: " << w << "\n";

    emit_rendered(rendered, s, out);
    if (!a.out.empty()) write_json_output(sidecar, a.out, out);
    return verification.all_citations_verbatim ? kExitOk : kExitValidation;
}

struct CiteArgs {
    std::string chunks, answer, mode = "inline-snippet", out;
};

int cmd_cite(const CiteArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    const auto mode = require_mode(a.mode);
    const auto chunks = read_chunks(a.chunks);
    const auto answer = read_text_input(a.answer);
    const auto templates = load_templates(s);
    const PromptBuilder builder(templates);
    auto prompt = builder.rag_cite(chunks, answer, mode);  // rejects duplicate ids before any backend call
    auto gateway = make_gateway(s);
    const auto result = gateway->complete(make_request(prompt, s));

    nlohmann::json sidecar{{"raw", result.text}, {"mode", to_string(mode)}};
    const auto parsed = parse_rag_output(result.text, mode);
    sidecar["validation"] = to_json(parsed.report);
    auto finish = [&](int code) {
        if (!a.out.empty()) write_json_output(sidecar, a.out, out);
        return code;
    };
    if (!parsed.ok()) {
        report_violations(parsed.report, err);
        return finish(kExitValidation);
    }
    sidecar["parsed"] = to_json(*parsed.value);

    VerificationReport verification;
    try {
        verification = verify_rag_output(*parsed.value, chunks, answer, s.policy);
    } catch (const RecError& e) {
        if (e.code() != ErrorCode::UnknownContextId) throw;
        err << "invalid output: " << e.detail() << "\n";
        sidecar["error"] = e.detail();
        return finish(kExitValidation);
    }
    sidecar["verification"] = to_json(verification);
    bool ok = verification.all_citations_verbatim && verification.claims_verbatim.value_or(true);
    for (const auto& c : verification.per_citation)
        if (!c.match.found) err << "warning: snippet of citation " << c.index << " is not verbatim in its chunk\n";
    for (const auto& c : verification.per_claim)
        if (!c.match.found) err << "warning: claim of entry " << c.entry << " is not verbatim in the answer\n";

    try {
        const auto rendered = render_rag(*parsed.value, answer, chunks);
        sidecar["rendered"] = rendered.to_json();
        for (const auto& w : rendered.warnings) err << "warning: " << w << "\n";
        emit_rendered(rendered, s, out);
    } catch (const RecError& e) {
        if (e.code() != ErrorCode::ClaimNotFound) throw;
        err << "warning: " << e.detail() << "\n";
        ok = false;
    }
    return finish(ok ? kExitOk : kExitValidation);
}

struct RenderArgs {
    std::string output, mode = "inline-snippet", answer, chunks;
};

int cmd_render(const RenderArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    const auto mode = require_mode(a.mode);
    const std::string raw = read_text_file(a.output);
    RenderedText rendered;
    if (!a.chunks.empty()) {
        if (a.answer.empty()) throw UsageError("rendering a RAG output needs --answer");
        const auto chunks = read_chunks(a.chunks);
        const auto answer = read_text_input(a.answer);
        const auto parsed = parse_rag_output(raw, mode);
        if (!parsed.ok()) {
            report_violations(parsed.report, err);
            return kExitValidation;
        }
        try {
            rendered = render_rag(*parsed.value, answer, chunks);
        } catch (const RecError& e) {
            if (e.code() != ErrorCode::ClaimNotFound && e.code() != ErrorCode::UnknownContextId) throw;
            err << "cannot render: " << e.detail() << "\n";
            return kExitValidation;
        }
    } else {
        if (!mode_valid_for_quality(mode)) throw UsageError("quality outputs render only in snippet modes");
        const auto parsed = parse_quality_output(raw);
        if (!parsed.ok()) {
            report_violations(parsed.report, err);
            return kExitValidation;
        }
        rendered = render_quality(*parsed.value, mode);
    }
    for (const auto& w : rendered.warnings) err << "warning: " << w << "\n";
    emit_rendered(rendered, s, out);
    return kExitOk;
}

struct ValidateArgs {
    std::string records, contexts, out;
};

nlohmann::json validate_record(const nlohmann::json& rec, const std::map<std::string, ContextDocument>& contexts,
                               const Settings& s, bool& ok) {
    nlohmann::json entry;
    ok = false;
    if (!rec.is_object()) {
        entry["error"] = "record must be a JSON object";
        return entry;
    }
    if (rec.contains("id")) entry["id"] = rec["id"];
    const std::string task = rec.value("task", std::string("quality"));

    std::string raw;
    if (const auto it = rec.find("raw"); it != rec.end() && it->is_string())
        raw = it->get<std::string>();
    else if (const auto o = rec.find("output"); o != rec.end())
        raw = o->dump();
    else {
        entry["error"] = "record needs raw or output";
        return entry;
    }

    auto context_by_id = [&](const std::string& id) -> const ContextDocument* {
        const auto it = contexts.find(id);
        return it == contexts.end() ? nullptr : &it->second;
    };
    auto ref_string = [](const nlohmann::json& j) { return j.is_string() ? j.get<std::string>() : j.dump(); };

    if (task == "quality") {
        const auto parsed = parse_quality_output(raw);
        entry["validation"] = to_json(parsed.report);
        if (!parsed.ok()) return entry;
        ContextDocument context{std::nullopt, "", SourceKind::TaskPrompt};
        if (const auto c = rec.find("context"); c != rec.end() && c->is_string()) {
            context.body = c->get<std::string>();
        } else if (const auto r = rec.find("context_ref"); r != rec.end()) {
            const auto* doc = context_by_id(ref_string(*r));
            if (!doc) {
                entry["error"] = "unknown context_ref " + ref_string(*r);
                return entry;
            }
            context.body = doc->body;
        } else {
            entry["error"] = "quality record needs context or context_ref";
            return entry;
        }
        const auto verification = verify_quality_output(*parsed.value, context, s.policy);
        entry["verification"] = to_json(verification);
        ok = verification.all_citations_verbatim;
        return entry;
    }
    if (task == "rag") {
        const auto mode = parse_citation_mode(rec.value("mode", std::string("inline-snippet")));
        if (!mode) {
            entry["error"] = "unknown citation mode";
            return entry;
        }
        const auto parsed = parse_rag_output(raw, *mode);
        entry["validation"] = to_json(parsed.report);
        if (!parsed.ok()) return entry;
        std::vector<ContextDocument> chunks;
        if (const auto refs = rec.find("context_refs"); refs != rec.end() && refs->is_array()) {
            for (const auto& r : *refs) {
                const auto* doc = context_by_id(ref_string(r));
                if (!doc) {
                    entry["error"] = "unknown context_ref " + ref_string(r);
                    return entry;
                }
                chunks.push_back(*doc);
            }
        } else {
            for (const auto& [id, doc] : contexts) chunks.push_back(doc);
        }
        try {
            const auto verification =
                verify_rag_output(*parsed.value, chunks, rec.value("answer", std::string()), s.policy);
            entry["verification"] = to_json(verification);
            ok = verification.all_citations_verbatim && verification.claims_verbatim.value_or(true);
        } catch (const RecError& e) {
            if (e.code() != ErrorCode::UnknownContextId) throw;
            entry["error"] = e.detail();
        }
        return entry;
    }
    entry["error"] = "task must be quality or rag";
    return entry;
}

int cmd_validate(const ValidateArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    std::map<std::string, ContextDocument> contexts;
    if (!a.contexts.empty()) {
        for (auto& doc : read_chunks(a.contexts)) {
            const std::string id = *doc.context_id;
            if (!contexts.emplace(id, std::move(doc)).second) throw UsageError("duplicate context_id " + id);
        }
    }
    const std::string text = read_text_file(a.records);
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0, failed = 0;
    nlohmann::json results = nlohmann::json::array();
    while (std::getline(lines, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        bool ok = false;
        nlohmann::json entry;
        const auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) {
            entry["error"] = "line is not valid JSON";
        } else {
            entry = validate_record(rec, contexts, s, ok);
        }
        entry["line"] = line_no;
        entry["ok"] = ok;
        if (!ok) {
            ++failed;
            err << "record on line " << line_no << " failed validation\n";
        }
        results.push_back(std::move(entry));
    }
    write_json_output({{"records", results}, {"n", results.size()}, {"failed", failed}}, a.out, out);
    return failed == 0 ? kExitOk : kExitValidation;
}

struct ScoreArgs {
    std::string pred, gold, contexts, out;
};

std::vector<std::string> string_list(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw UsageError(what + " must be an array of strings");
    std::vector<std::string> v;
    for (const auto& x : j) {
        if (!x.is_string()) throw UsageError(what + " must be an array of strings");
        v.push_back(x.get<std::string>());
    }
    return v;
}

YesNo yes_no_field(const nlohmann::json& j, const std::string& what) {
    if (j.is_boolean()) return j.get<bool>() ? YesNo::Yes : YesNo::No;
    const auto v = j.is_string() ? parse_yes_no(j.get<std::string>()) : std::nullopt;
    if (!v) throw UsageError(what + " must be Yes/No or a boolean");
    return *v;
}

/// A single label or a list with one label per annotator.
std::vector<YesNo> label_list(const nlohmann::json& j, const std::string& what) {
    std::vector<YesNo> v;
    if (j.is_array()) {
        for (const auto& x : j) v.push_back(yes_no_field(x, what));
    } else {
        v.push_back(yes_no_field(j, what));
    }
    return v;
}

struct MetricScores {
    std::size_t n = 0;
    // Indexed by annotator: (prediction, gold) rating pairs and explanation correctness labels.
    std::vector<std::pair<std::vector<YesNo>, std::vector<YesNo>>> ratings;
    std::vector<std::vector<YesNo>> explanations;
    std::vector<PRF> citation;
    std::size_t excluded_halu = 0;
};

nlohmann::json mean_rating_accuracy(const MetricScores& sc) {
    if (sc.ratings.empty()) return nullptr;
    double sum = 0;
    for (const auto& [pred, gold] : sc.ratings) sum += binary_accuracy(pred, gold);
    return sum / static_cast<double>(sc.ratings.size());
}

nlohmann::json mean_explain_accuracy(const MetricScores& sc) {
    if (sc.explanations.empty()) return nullptr;
    double sum = 0;
    for (const auto& labels : sc.explanations)
        sum += binary_accuracy(labels, std::vector<YesNo>(labels.size(), YesNo::Yes));
    return sum / static_cast<double>(sc.explanations.size());
}

nlohmann::json prf_report(const std::vector<PRF>& items) {
    if (items.empty()) return nullptr;
    double p = 0, r = 0, f = 0;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& c : items) {
        p += c.precision;
        r += c.recall;
        f += c.f1;
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    const double k = static_cast<double>(items.size());
    const auto micro = prf_from_counts(tp, fp, fn);
    return {{"precision", p / k}, {"recall", r / k}, {"f1", f / k}, {"scored", items.size()},
            {"micro", {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"precision", micro.precision}, {"recall", micro.recall},
                       {"f1", micro.f1}}}};
}

int cmd_score(const ScoreArgs& a, const Settings& s, std::ostream& out, std::ostream& /*err*/) {
    const auto preds = read_jsonl(a.pred, LineErrorPolicy::Abort).records;
    const auto golds = read_jsonl(a.gold, LineErrorPolicy::Abort).records;
    if (preds.size() != golds.size())
        throw UsageError("pred has " + std::to_string(preds.size()) + " records but gold has " +
                         std::to_string(golds.size()));
    std::map<std::string, ContextDocument> contexts;
    if (!a.contexts.empty())
        for (auto& doc : read_chunks(a.contexts)) contexts.emplace(*doc.context_id, std::move(doc));

    std::map<std::string, MetricScores> per_metric;
    std::size_t excluded_halu = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        const auto& g = golds[i];
        const std::string where = "record " + std::to_string(i + 1);
        if (!p.is_object() || !g.is_object()) throw UsageError(where + ": records must be objects");

        const auto metric = require_metric(g.value("metric", p.value("metric", std::string())));
        auto& sc = per_metric[std::string(to_string(metric.name))];
        ++sc.n;

        std::optional<YesNo> rating_pred;
        std::vector<std::string> predicted;
        if (const auto o = p.find("output"); o != p.end()) {
            const auto parsed = parse_quality_output(o->is_string() ? o->get<std::string>() : o->dump());
            if (!parsed.ok()) throw UsageError(where + ": pred output does not parse");
            rating_pred = parsed.value->answer;
            for (const auto& st : parsed.value->statements)
                for (const auto& c : st.citations) predicted.push_back(c.snippet);
        }
        if (const auto r = p.find("rating_pred"); r != p.end()) rating_pred = yes_no_field(*r, where + " rating_pred");
        if (const auto c = p.find("predicted_citations"); c != p.end())
            predicted = string_list(*c, where + " predicted_citations");

        if (const auto r = g.find("rating_gold"); r != g.end()) {
            if (!rating_pred) throw UsageError(where + ": pred has no rating_pred");
            const auto labels = label_list(*r, where + " rating_gold");
            if (sc.ratings.size() < labels.size()) sc.ratings.resize(labels.size());
            for (std::size_t k = 0; k < labels.size(); ++k) {
                sc.ratings[k].first.push_back(*rating_pred);
                sc.ratings[k].second.push_back(labels[k]);
            }
        }
        if (const auto e = g.find("explain_gold"); e != g.end()) {
            const auto labels = label_list(*e, where + " explain_gold");
            if (sc.explanations.size() < labels.size()) sc.explanations.resize(labels.size());
            for (std::size_t k = 0; k < labels.size(); ++k) sc.explanations[k].push_back(labels[k]);
        }

        if (!g.contains("gold_a")) continue;
        ContextDocument context{std::nullopt, "", SourceKind::TaskPrompt};
        if (const auto c = g.find("context"); c != g.end() && c->is_string()) {
            context.body = c->get<std::string>();
        } else if (const auto tp = g.find("task_prompt"); tp != g.end() && tp->is_string()) {
            std::optional<std::string> convo;
            if (const auto cv = g.find("conversation"); cv != g.end() && cv->is_string()) convo = cv->get<std::string>();
            context.body = compose_task_context(tp->get<std::string>(), convo);
        } else if (const auto ref = g.find("context_ref"); ref != g.end()) {
            const std::string id = ref->is_string() ? ref->get<std::string>() : ref->dump();
            const auto it = contexts.find(id);
            if (it == contexts.end()) throw UsageError(where + ": unknown context_ref " + id);
            context.body = it->second.body;
        } else {
            throw UsageError(where + ": gold citations need context, task_prompt or context_ref");
        }
        const auto ga = GoldCitationSet::from_annotation(string_list(g["gold_a"], where + " gold_a"));
        const auto gold = g.contains("gold_b")
                              ? gold_intersection(
                                    ga, GoldCitationSet::from_annotation(string_list(g["gold_b"], where + " gold_b")),
                                    context, s.policy)
                              : ga;
        if (gold.halu) {
            ++sc.excluded_halu;
            ++excluded_halu;
            continue;
        }
        sc.citation.push_back(citation_prf(predicted, gold, context, s.policy));
    }

    nlohmann::json report_metrics = nlohmann::json::object();
    for (const auto& [name, sc] : per_metric) {
        report_metrics[name] = {{"n", sc.n},
                                {"rate_acc", mean_rating_accuracy(sc)},
                                {"explain_acc", mean_explain_accuracy(sc)},
                                {"citation_prf", prf_report(sc.citation)},
                                {"excluded_halu", sc.excluded_halu}};
    }
    write_json_output({{"per_metric", report_metrics}, {"n", preds.size()}, {"excluded_halu", excluded_halu}}, a.out,
                      out);
    return kExitOk;
}

struct JudgeArgs {
    std::string pairs, out;
    bool both_orders = false;
};

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::A: return "A";
        case Verdict::B: return "B";
        case Verdict::Unparseable: return "unparseable";
    }
    return "?";
}

int cmd_judge(const JudgeArgs& a, const Settings& s, std::ostream& out, std::ostream& err) {
    struct Pair {
        std::string instruction, chosen, rejected;
    };
    std::vector<Pair> pairs;
    const auto records = read_jsonl(a.pairs, LineErrorPolicy::Abort).records;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto field = [&](const char* name) {
            const auto it = r.find(name);
            if (!r.is_object() || it == r.end() || !it->is_string())
                throw UsageError("pair " + std::to_string(i + 1) + " needs a string " + name);
            return it->get<std::string>();
        };
        pairs.push_back({field("instruction"), field("chosen"), field("rejected")});
    }

    const auto templates = load_templates(s);
    const PromptBuilder builder(templates);
    std::vector<CompletionRequest> requests;
    std::vector<PairwiseJudgment> judgments;
    std::vector<Verdict> truth;
    for (const auto& p : pairs) {
        requests.push_back(make_request(builder.pairwise(p.instruction, p.chosen, p.rejected), s));
        judgments.push_back({p.instruction, p.chosen, p.rejected, Verdict::Unparseable, PresentationOrder::AB});
        truth.push_back(Verdict::A);
        if (a.both_orders) {
            requests.push_back(make_request(builder.pairwise(p.instruction, p.rejected, p.chosen), s));
            judgments.push_back({p.instruction, p.rejected, p.chosen, Verdict::Unparseable, PresentationOrder::BA});
            truth.push_back(Verdict::B);
        }
    }

    nlohmann::json report{{"pairs", pairs.size()}, {"judgments", judgments.size()}};
    if (pairs.empty()) {
        report["win_rate"] = nullptr;
        if (a.both_orders) report["order_bias"] = nullptr;
        write_json_output(report, a.out, out);
        return kExitOk;
    }

    auto gateway = make_gateway(s);
    const auto slots = gateway->complete_batch(requests, s.parallelism);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].ok()) {
            err << "judge request " << i << " failed: " << slots[i].error_detail << "\n";
            return kExitBackend;
        }
        judgments[i].verdict = parse_pairwise_verdict(slots[i].result->text);
    }

    std::size_t unparseable = 0;
    nlohmann::json verdicts = nlohmann::json::array();
    for (std::size_t i = 0; i < judgments.size(); ++i) {
        if (judgments[i].verdict == Verdict::Unparseable) ++unparseable;
        verdicts.push_back({{"pair", a.both_orders ? i / 2 : i},
                            {"order", judgments[i].presentation_order == PresentationOrder::AB ? "ab" : "ba"},
                            {"verdict", verdict_name(judgments[i].verdict)}});
    }
    report["win_rate"] = win_rate(judgments, truth);
    report["unparseable"] = unparseable;
    report["verdicts"] = verdicts;
    if (a.both_orders) {
        std::vector<std::pair<Verdict, Verdict>> paired;
        for (std::size_t i = 0; i + 1 < judgments.size(); i += 2)
            paired.emplace_back(judgments[i].verdict, judgments[i + 1].verdict);
        try {
            const auto bias = order_bias(paired);
            report["order_bias"] = bias.value;
            report["order_bias_pairs_used"] = bias.pairs_used;
            report["order_bias_excluded_unparseable"] = bias.excluded_unparseable;
        } catch (const RecError& e) {
            if (e.code() != ErrorCode::Empty) throw;
            report["order_bias"] = nullptr;
            report["order_bias_pairs_used"] = 0;
            report["order_bias_excluded_unparseable"] = paired.size();
        }
    }
    write_json_output(report, a.out, out);
    return kExitOk;
}

struct DatagenArgs {
    std::string input, task, metrics = "faithfulness,instruction_following,coherence,completeness", out, stats;
    std::size_t max_tokens = kDefaultMaxTokens;
    bool drop_unsupported = false;
};

int cmd_datagen(const DatagenArgs& a, const Settings& s, std::ostream& out, std::ostream& err,
                std::stop_token stop) {
    const auto task = parse_generation_task(a.task);
    if (!task) throw UsageError("task must be pointwise, cite-quality or cite-rag");
    std::vector<EvaluationMetric> metrics;
    for (const auto& name : split_list(a.metrics)) metrics.push_back(require_metric(name));
    if (metrics.empty()) throw UsageError("--metrics must name at least one metric");

    std::vector<SourceRecord> sources;
    const auto rows = read_jsonl(a.input, LineErrorPolicy::Abort).records;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto parsed = source_record_from_json(rows[i]);
        if (!parsed.ok())
            throw UsageError(a.input + ": record " + std::to_string(i + 1) + ": " +
                             parsed.report.violations.front().detail);
        if (const auto v = validate(*parsed.value, *task); !v.empty())
            throw UsageError(a.input + ": record " + std::to_string(i + 1) + ": " + v.front());
        sources.push_back(std::move(*parsed.value));
    }

    const auto templates = load_templates(s);
    const PromptBuilder builder(templates);
    auto gateway = make_gateway(s);

    GenerateOptions options;
    options.parallelism = s.parallelism;
    options.max_output_tokens = s.max_output_tokens;
    options.seed = s.seed;
    options.filter.match = s.policy;
    options.filter.max_tokens = a.max_tokens;
    options.filter.keep_unsupported_claims = !a.drop_unsupported;
    options.stop = stop;
    const auto run = generate(sources, *task, metrics, *gateway, options, builder);
    const bool interrupted = run.cancelled_items > 0;

    std::ostringstream jsonl;
    for (const auto& r : run.records) jsonl << canonical_dump(to_json(r)) << "\n";
    if (interrupted)
        jsonl << canonical_dump({{"stats", to_json(run.stats)}, {"cancelled_items", run.cancelled_items},
                                 {"interrupted", true}})
              << "\n";
    if (a.out.empty() || a.out == "-")
        out << jsonl.str();
    else
        write_text_file(a.out, jsonl.str());
    if (!a.stats.empty()) write_text_file(a.stats, canonical_dump(to_json(run.stats)) + "\n");

    const auto& st = run.stats;
    err << "datagen: total=" << st.total << " kept=" << st.kept << " bad_json=" << st.rejected_bad_json
        << " non_verbatim=" << st.rejected_non_verbatim << " too_long=" << st.rejected_too_long
        << " transport=" << st.rejected_transport;
    if (interrupted) err << " cancelled=" << run.cancelled_items;
    err << "\n";
    for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
        const auto& o = run.outcomes[i];
        if (o.gateway_error && *o.gateway_error != ErrorCode::Cancelled)
            err << "item " << i << ": " << to_string(*o.gateway_error) << ": " << o.detail << "\n";
    }

    if (interrupted) return kExitInterrupted;
    if (st.total > 0 && st.rejected_transport == st.total) return kExitBackend;
    return kExitOk;
}

int exit_code_for(const RecError& e) {
    switch (e.code()) {
        case ErrorCode::Transport:
        case ErrorCode::AuthFailure:
        case ErrorCode::BackendRefusal:
        case ErrorCode::Truncated:
        case ErrorCode::Cancelled:
            return kExitBackend;
        default:
            return kExitUsage;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::stop_token stop,
            const Env* env) {
    CLI::App app{"Rating, explanation and citation toolkit for LLM evaluator outputs", "rec"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "Flat JSON config file");
    app.add_option("--backend", g.backend, "mock:SCRIPT or http");
    app.add_option("--seed", g.seed, "Seed for requests and the mock backend");
    app.add_option("--policy", g.policy, "Verbatim match policy: strict or normalized");
    app.add_option("--format", g.format, "Rendered output format: text or json");
    app.add_option("--template-dir", g.template_dir, "Directory with replacement prompt templates");
    app.add_option("--audit-log", g.audit_log, "Append a JSONL audit line per backend call");
    app.add_option("--parallelism", g.parallelism, "Concurrent backend requests");
    app.add_option("--base-url", g.base_url, "Chat-completions endpoint base URL (http backend)");
    app.add_option("--model", g.model, "Model name sent to the http backend");
    app.add_option("--timeout-ms", g.timeout_ms, "Per-request timeout for the http backend");
    app.add_option("--max-retries", g.max_retries, "Retries for transient backend failures");
    app.add_option("--backoff-ms", g.backoff_ms, "Base delay of the exponential retry backoff");
    app.add_option("--max-output-tokens", g.max_output_tokens, "Completion token limit per request");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Rate a generation with explanation and citations");
    evaluate->add_option("--context", ev.context, "Task prompt text, or JSON {task_prompt, conversation}")->required();
    evaluate->add_option("--generation", ev.generation, "Generation to evaluate")->required();
    evaluate->add_option("--metric", ev.metric, "faithfulness, instruction_following, coherence or completeness")
        ->required();
    evaluate->add_option("--mode", ev.mode, "inline-snippet or post-fix-snippet");
    evaluate->add_option("--out", ev.out, "JSON sidecar with raw output, verification and rendering");

    CiteArgs ci;
    auto* cite = app.add_subcommand("cite", "Add citations to an answer from retrieved chunks");
    cite->add_option("--chunks", ci.chunks, "JSON array or JSONL of {context_id, body}")->required();
    cite->add_option("--answer", ci.answer, "Answer text")->required();
    cite->add_option("--mode", ci.mode, "post-fix, inline, post-fix-snippet or inline-snippet");
    cite->add_option("--out", ci.out, "JSON sidecar");

    ValidateArgs va;
    auto* validate_cmd = app.add_subcommand("validate", "Check stored evaluator outputs");
    validate_cmd->add_option("--records", va.records, "JSONL of records to check")->required();
    validate_cmd->add_option("--contexts", va.contexts, "JSONL of {context_id, body}");
    validate_cmd->add_option("--out", va.out, "Report path (default stdout)");

    RenderArgs re;
    auto* render = app.add_subcommand("render", "Render a stored evaluator output");
    render->add_option("--output", re.output, "Raw evaluator output")->required();
    render->add_option("--mode", re.mode, "Citation mode");
    render->add_option("--answer", re.answer, "Answer text (RAG outputs)");
    render->add_option("--chunks", re.chunks, "Chunks (RAG outputs)");

    ScoreArgs sc;
    auto* score = app.add_subcommand("score", "Score predictions against gold annotations");
    score->add_option("--pred", sc.pred, "Prediction JSONL")->required();
    score->add_option("--gold", sc.gold, "Gold JSONL, line-aligned with --pred")->required();
    score->add_option("--contexts", sc.contexts, "JSONL of {context_id, body} for context_ref lookups");
    score->add_option("--out", sc.out, "Report path (default stdout)");

    JudgeArgs ju;
    auto* judge = app.add_subcommand("judge", "Pairwise preference judging");
    judge->add_option("--pairs", ju.pairs, "JSONL of {instruction, chosen, rejected}")->required();
    judge->add_flag("--both-orders", ju.both_orders, "Judge each pair in both presentation orders");
    judge->add_option("--out", ju.out, "Report path (default stdout)");

    DatagenArgs dg;
    auto* datagen = app.add_subcommand("datagen", "Generate and filter training records");
    datagen->add_option("--input", dg.input, "Source records JSONL")->required();
    datagen->add_option("--task", dg.task, "pointwise, cite-quality or cite-rag")->required();
    datagen->add_option("--metrics", dg.metrics, "Comma-separated metrics (default: all four)");
    datagen->add_option("--out", dg.out, "Output JSONL (default stdout)");
    datagen->add_option("--stats", dg.stats, "Filter statistics JSON");
    datagen->add_option("--max-tokens", dg.max_tokens, "Length filter threshold");
    datagen->add_flag("--drop-unsupported", dg.drop_unsupported, "Reject RAG outputs citing None");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run 'rec --help' for usage\n";
        return kExitUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        const Settings settings = resolve_settings(g, env);
        if (active == evaluate) return cmd_evaluate(ev, settings, out, err);
        if (active == cite) return cmd_cite(ci, settings, out, err);
        if (active == validate_cmd) return cmd_validate(va, settings, out, err);
        if (active == render) return cmd_render(re, settings, out, err);
        if (active == score) return cmd_score(sc, settings, out, err);
        if (active == judge) return cmd_judge(ju, settings, out, err);
        if (active == datagen) return cmd_datagen(dg, settings, out, err, stop);
        return kExitInternal;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << active->help();
        return kExitUsage;
    } catch (const GatewayError& e) {
        err << "backend error: " << to_string(e.code()) << ": " << e.detail() << "\n";
        return kExitBackend;
    } catch (const RecError& e) {
        err << "error: " << to_string(e.code()) << ": " << e.detail() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace rec
