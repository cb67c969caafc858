/// @file mock_backend.cpp

#include "rec/mock_backend.hpp"

#include <thread>

#include "rec/schema_io.hpp"

namespace rec {

namespace {

std::uint64_t mix(std::string_view prompt_hash, std::int64_t seed) {
    // FNV-1a over the hex digest, then the seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : prompt_hash) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    h ^= static_cast<std::uint64_t>(seed);
    h *= 1099511628211ULL;
    return h ^ (h >> 29);
}

struct Rule {
    std::string contains;
    std::optional<std::string> response;
    std::vector<std::string> choices;
    std::optional<std::string> error;
    std::optional<std::size_t> times;
    std::shared_ptr<std::atomic<std::size_t>> hits = std::make_shared<std::atomic<std::size_t>>(0);
};

GatewayError scripted_error(const std::string& kind) {
    if (kind == "auth") return GatewayError(ErrorCode::AuthFailure, "scripted auth failure", false, 401);
    if (kind == "transport") return GatewayError(ErrorCode::Transport, "scripted transient failure", true, 503);
    if (kind == "refusal") return GatewayError(ErrorCode::BackendRefusal, "scripted refusal", false, 400);
    throw RecError(ErrorCode::InvalidArgument, "unknown scripted error kind \"" + kind + "\"");
}

constexpr std::string_view kTruncated = "truncated";

}  // namespace

std::optional<std::pair<std::string, std::string>> split_pairwise_prompt(std::string_view prompt) {
    constexpr std::string_view kA = "# Output (a):\n";
    constexpr std::string_view kB = "# Output (b):\n";
    constexpr std::string_view kEnd = "# Which is better";
    const auto a = prompt.find(kA);
    const auto b = prompt.find(kB, a == std::string_view::npos ? 0 : a);
    const auto end = prompt.find(kEnd, b == std::string_view::npos ? 0 : b);
    if (a == std::string_view::npos || b == std::string_view::npos || end == std::string_view::npos) return std::nullopt;
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.remove_suffix(1);
        return std::string(s);
    };
    return std::make_pair(trim(prompt.substr(a + kA.size(), b - a - kA.size())),
                          trim(prompt.substr(b + kB.size(), end - b - kB.size())));
}

MockBackend::MockBackend(Responder responder, LatencyFn latency)
    : responder_(std::move(responder)), latency_(std::move(latency)) {}

CompletionResult MockBackend::complete(const CompletionRequest& request) {
    ++calls_;
    const std::size_t now = ++in_flight_;
    std::size_t peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<std::size_t>& counter;
        ~Leave() { --counter; }
    } leave{in_flight_};

    if (latency_) {
        const int ms = latency_(request);
        if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
    CompletionResult result;
    result.text = responder_(request);
    if (result.text == kTruncated) {
        result.text.clear();
        result.truncated = true;
    }
    return result;
}

std::shared_ptr<MockBackend> MockBackend::from_script(const nlohmann::json& script, std::optional<std::int64_t> seed) {
    if (!script.is_object()) throw RecError(ErrorCode::BadJson, "mock script must be a JSON object");
    const std::int64_t script_seed = seed.value_or(script.value("seed", std::int64_t{0}));

    auto responses = std::make_shared<std::map<std::string, std::string>>();
    if (const auto it = script.find("responses"); it != script.end()) {
        for (auto r = it->begin(); r != it->end(); ++r) (*responses)[r.key()] = r.value().get<std::string>();
    }

    auto rules = std::make_shared<std::vector<Rule>>();
    if (const auto it = script.find("rules"); it != script.end()) {
        for (const auto& j : *it) {
            Rule rule;
            rule.contains = j.value("contains", std::string());
            if (j.contains("response")) rule.response = j["response"].get<std::string>();
            if (j.contains("choices")) rule.choices = j["choices"].get<std::vector<std::string>>();
            if (j.contains("error")) rule.error = j["error"].get<std::string>();
            if (j.contains("times")) rule.times = j["times"].get<std::size_t>();
            if (rule.error && *rule.error != kTruncated) (void)scripted_error(*rule.error);
            rules->push_back(std::move(rule));
        }
    }

    std::string pairwise_mode;
    std::string prefer_token;
    if (const auto it = script.find("pairwise"); it != script.end()) {
        if (it->is_string()) {
            pairwise_mode = it->get<std::string>();
        } else if (it->is_object() && it->contains("prefer")) {
            pairwise_mode = "prefer";
            prefer_token = (*it)["prefer"].get<std::string>();
        }
        if (pairwise_mode != "always_first" && pairwise_mode != "always_second" && pairwise_mode != "lexicographic" &&
            pairwise_mode != "prefer")
            throw RecError(ErrorCode::InvalidArgument, "unknown pairwise mock behaviour");
    }

    std::optional<std::string> fallback;
    if (script.contains("default")) fallback = script["default"].get<std::string>();

    Responder responder = [=](const CompletionRequest& req) -> std::string {
        const std::string hash = sha256_hex(req.prompt.text);
        if (const auto it = responses->find(hash); it != responses->end()) return it->second;
        const std::int64_t s = req.seed.value_or(script_seed);
        for (auto& rule : *rules) {
            if (req.prompt.text.find(rule.contains) == std::string::npos) continue;
            if (rule.error) {
                const std::size_t hit = rule.hits->fetch_add(1);
                if (rule.times && hit >= *rule.times) continue;
                if (*rule.error == kTruncated) return std::string(kTruncated);
                throw scripted_error(*rule.error);
            }
            if (!rule.choices.empty()) return rule.choices[mix(hash, s) % rule.choices.size()];
            if (rule.response) return *rule.response;
        }
        if (!pairwise_mode.empty() && req.prompt.template_id == TemplateId::PairwiseJudge) {
            if (pairwise_mode == "always_first") return "Output (a)";
            if (pairwise_mode == "always_second") return "Output (b)";
            const auto outputs = split_pairwise_prompt(req.prompt.text);
            if (!outputs) return "I cannot tell.";
            if (pairwise_mode == "prefer") {
                const bool in_a = outputs->first.find(prefer_token) != std::string::npos;
                const bool in_b = outputs->second.find(prefer_token) != std::string::npos;
                if (in_a != in_b) return in_a ? "Output (a)" : "Output (b)";
            }
            return outputs->first <= outputs->second ? "Output (a)" : "Output (b)";
        }
        if (fallback) return *fallback;
        throw GatewayError(ErrorCode::BackendRefusal, "mock script has no response for prompt " + hash, false);
    };

    LatencyFn latency;
    if (const auto it = script.find("latency_ms"); it != script.end()) {
        const int lo = (*it)[0].get<int>();
        const int hi = (*it)[1].get<int>();
        latency = [=](const CompletionRequest& req) {
            if (hi <= lo) return lo;
            const auto h = mix(sha256_hex(req.prompt.text), req.seed.value_or(script_seed));
            return lo + static_cast<int>(h % static_cast<std::uint64_t>(hi - lo + 1));
        };
    }
    return std::make_shared<MockBackend>(std::move(responder), std::move(latency));
}

std::shared_ptr<MockBackend> MockBackend::from_script_file(const std::string& path, std::optional<std::int64_t> seed) {
    const auto parsed = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (parsed.is_discarded()) throw RecError(ErrorCode::BadJson, "mock script is not valid JSON: " + path);
    return from_script(parsed, seed);
}

}  // namespace rec
