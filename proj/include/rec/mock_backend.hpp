/// @file mock_backend.hpp
/// @brief Deterministic scripted backend for offline runs and tests.
///
/// Script file (JSON):
///
///     {
///       "responses": {"<sha256 of prompt>": "text", ...},
///       "rules": [
///         {"contains": "substring", "response": "text"},
///         {"contains": "substring", "choices": ["t1", "t2"]},
///         {"contains": "substring", "error": "auth|transport|refusal|truncated", "times": 1}
///       ],
///       "pairwise": "always_first" | "always_second" | "lexicographic" | {"prefer": "token"},
///       "latency_ms": [min, max],
///       "seed": 7,
///       "default": "text"
///     }
///
/// Lookup order: exact prompt hash, then rules in order, then the pairwise
/// judge behaviour (pairwise prompts only), then "default". `times` limits a
/// fault rule to its first N matches. `choices` and latencies are picked from
/// a hash of the prompt and the seed, so runs are reproducible.

#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rec/gateway.hpp"

namespace rec {

class MockBackend final : public CompletionBackend {
public:
    /// Returns the completion text or throws GatewayError.
    using Responder = std::function<std::string(const CompletionRequest&)>;
    using LatencyFn = std::function<int(const CompletionRequest&)>;

    explicit MockBackend(Responder responder, LatencyFn latency = nullptr);

    static std::shared_ptr<MockBackend> from_script(const nlohmann::json& script, std::optional<std::int64_t> seed = {});
    static std::shared_ptr<MockBackend> from_script_file(const std::string& path, std::optional<std::int64_t> seed = {});

    CompletionResult complete(const CompletionRequest& request) override;

    std::size_t calls() const { return calls_.load(); }
    std::size_t peak_in_flight() const { return peak_.load(); }

private:
    Responder responder_;
    LatencyFn latency_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Text of the "Output (a)" and "Output (b)" sections of a pairwise judge prompt.
std::optional<std::pair<std::string, std::string>> split_pairwise_prompt(std::string_view prompt);

}  // namespace rec
