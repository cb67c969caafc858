/// @file http_backend.cpp
/// @brief Chat-completions client over cpp-httplib.

#include <chrono>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rec/gateway.hpp"

namespace rec {

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    const std::string& url = config_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw RecError(ErrorCode::InvalidArgument, "base_url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpChatBackend::request_body(const CompletionRequest& request) const {
    nlohmann::json body{{"model", config_.model_name},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt.text}}})},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    return body.dump();
}

CompletionResult HttpChatBackend::complete(const CompletionRequest& request) {
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, request_body(request), "application/json");
    if (!res) throw GatewayError(ErrorCode::Transport, "request failed: " + httplib::to_string(res.error()), true);

    const int status = res->status;
    if (status == 401 || status == 403)
        throw GatewayError(ErrorCode::AuthFailure, "backend rejected credentials (HTTP " + std::to_string(status) + ")",
                           false, status);
    if (status < 200 || status >= 300) {
        if (transient_status(status))
            throw GatewayError(ErrorCode::Transport, "HTTP " + std::to_string(status) + ": " + res->body, true, status);
        throw GatewayError(ErrorCode::BackendRefusal, "HTTP " + std::to_string(status) + ": " + res->body, false,
                           status);
    }

    const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty())
        throw GatewayError(ErrorCode::BackendRefusal, "malformed completion response: " + res->body, false, status);

    const auto& choice = parsed["choices"][0];
    CompletionResult result;
    if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
        result.text = choice["message"]["content"].get<std::string>();
    else if (choice.contains("text") && choice["text"].is_string())
        result.text = choice["text"].get<std::string>();
    result.truncated = choice.value("finish_reason", std::string()) == "length";
    if (const auto it = parsed.find("usage"); it != parsed.end() && it->is_object()) {
        result.usage.prompt_tokens = it->value("prompt_tokens", std::size_t{0});
        result.usage.output_tokens = it->value("completion_tokens", std::size_t{0});
    }
    return result;
}

}  // namespace rec
