/// @file gateway.hpp
/// @brief Pluggable completion backends behind a retrying, auditing gateway.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "rec/errors.hpp"
#include "rec/prompt_builder.hpp"
#include "rec/token_estimator.hpp"

namespace rec {

struct CompletionRequest {
    PromptText prompt;
    double temperature = 0.0;
    int max_output_tokens = 2048;
    std::optional<std::int64_t> seed;
};

struct TokenUsage {
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
    bool estimated = false;
};

struct CompletionResult {
    std::string text;
    TokenUsage usage;
    double latency_ms = 0.0;
    bool truncated = false;
    int retries = 0;
};

/// Backend failure. `transient` failures are retried by the gateway.
class GatewayError : public RecError {
public:
    GatewayError(ErrorCode code, const std::string& detail, bool transient, int http_status = 0)
        : RecError(code, detail), transient_(transient), http_status_(http_status) {}

    bool transient() const noexcept { return transient_; }
    int http_status() const noexcept { return http_status_; }

private:
    bool transient_;
    int http_status_;
};

/// One attempt at one completion; must be safe to call concurrently.
/// Backends leave usage zeroed when they do not know it.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

std::string sha256_hex(std::string_view data);

/// Thread-safe JSONL audit trail: {ts, prompt_sha256, status, latency_ms, output_tokens, retries}.
class AuditLog {
public:
    explicit AuditLog(const std::filesystem::path& path);
    void record(std::string_view prompt_sha256, std::string_view status, double latency_ms, std::size_t output_tokens,
                int retries);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{250};
    double backoff_factor = 2.0;
};

struct BatchSlot {
    std::optional<CompletionResult> result;
    std::optional<ErrorCode> error;
    std::string error_detail;

    bool ok() const { return result.has_value(); }
};

class LlmGateway {
public:
    explicit LlmGateway(std::shared_ptr<CompletionBackend> backend, RetryPolicy retry = {},
                        std::shared_ptr<AuditLog> audit = nullptr,
                        const TokenEstimator* estimator = &default_token_estimator());

    /// Retries transient failures with exponential backoff. Throws GatewayError.
    CompletionResult complete(const CompletionRequest& request) const;

    /// At most `parallelism` requests in flight. Results are in input order and
    /// failures stay in their slot. After `stop` is requested, slots not yet
    /// started are marked Cancelled.
    std::vector<BatchSlot> complete_batch(const std::vector<CompletionRequest>& requests, std::size_t parallelism,
                                          std::stop_token stop = {}) const;

private:
    std::shared_ptr<CompletionBackend> backend_;
    RetryPolicy retry_;
    std::shared_ptr<AuditLog> audit_;
    const TokenEstimator* estimator_;
};

// ---------------------------------------------------------------------------
// HTTP chat-completions backend
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
    std::string base_url;    // e.g. http://localhost:8000/v1
    std::string model_name;
    std::string api_key;     // sent only as "Authorization: Bearer"
    int timeout_ms = 60000;
};

/// POSTs {model, messages:[{role:user, content}], temperature, max_tokens[, seed]}
/// to `<base_url>/chat/completions`.
class HttpChatBackend final : public CompletionBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    CompletionResult complete(const CompletionRequest& request) override;

    /// Request body for `request`; exposed so the wire shape can be tested.
    std::string request_body(const CompletionRequest& request) const;

private:
    HttpBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

}  // namespace rec
