/// @file gateway.cpp

#include "rec/gateway.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace rec {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return ss.str();
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0F]);
    }
    return out;
}

AuditLog::AuditLog(const std::filesystem::path& path) : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw RecError(ErrorCode::Io, "cannot open audit log " + path.string());
}

void AuditLog::record(std::string_view prompt_sha256, std::string_view status, double latency_ms,
                      std::size_t output_tokens, int retries) {
    const nlohmann::json row{{"ts", utc_timestamp()},
                             {"prompt_sha256", prompt_sha256},
                             {"status", status},
                             {"latency_ms", std::round(latency_ms * 1000.0) / 1000.0},
                             {"output_tokens", output_tokens},
                             {"retries", retries}};
    std::lock_guard lock(mutex_);
    out_ << row.dump() << '\n';
    out_.flush();
}

LlmGateway::LlmGateway(std::shared_ptr<CompletionBackend> backend, RetryPolicy retry, std::shared_ptr<AuditLog> audit,
                       const TokenEstimator* estimator)
    : backend_(std::move(backend)), retry_(retry), audit_(std::move(audit)), estimator_(estimator) {
    if (!backend_) throw RecError(ErrorCode::InvalidArgument, "gateway needs a backend");
    if (!estimator_) estimator_ = &default_token_estimator();
}

CompletionResult LlmGateway::complete(const CompletionRequest& request) const {
    if (request.max_output_tokens < 1) throw RecError(ErrorCode::InvalidArgument, "max_output_tokens must be >= 1");
    if (request.temperature < 0.0) throw RecError(ErrorCode::InvalidArgument, "temperature must be >= 0");

    const std::string prompt_hash = audit_ ? sha256_hex(request.prompt.text) : std::string();
    const auto started = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    };

    int attempt = 0;
    while (true) {
        try {
            CompletionResult result = backend_->complete(request);
            if (result.truncated && result.text.empty())
                throw GatewayError(ErrorCode::Truncated, "backend returned no text (truncated)", false);
            result.retries = attempt;
            result.latency_ms = elapsed_ms();
            if (result.usage.prompt_tokens == 0 && result.usage.output_tokens == 0) {
                result.usage.prompt_tokens = estimator_->estimate(request.prompt.text);
                result.usage.output_tokens = estimator_->estimate(result.text);
                result.usage.estimated = true;
            }
            if (audit_) audit_->record(prompt_hash, "ok", result.latency_ms, result.usage.output_tokens, attempt);
            return result;
        } catch (const GatewayError& e) {
            if (e.transient() && attempt < retry_.max_retries) {
                const double delay = static_cast<double>(retry_.backoff_base.count()) *
                                     std::pow(retry_.backoff_factor, static_cast<double>(attempt));
                std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
                ++attempt;
                continue;
            }
            if (audit_) audit_->record(prompt_hash, to_string(e.code()), elapsed_ms(), 0, attempt);
            throw;
        }
    }
}

std::vector<BatchSlot> LlmGateway::complete_batch(const std::vector<CompletionRequest>& requests,
                                                  std::size_t parallelism, std::stop_token stop) const {
    if (parallelism < 1) throw RecError(ErrorCode::InvalidArgument, "parallelism must be >= 1");
    std::vector<BatchSlot> slots(requests.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            BatchSlot& slot = slots[i];
            if (stop.stop_requested()) {
                slot.error = ErrorCode::Cancelled;
                slot.error_detail = "batch cancelled before this request started";
                continue;
            }
            try {
                slot.result = complete(requests[i]);
            } catch (const RecError& e) {
                slot.error = e.code();
                slot.error_detail = e.detail();
            } catch (const std::exception& e) {
                slot.error = ErrorCode::Transport;
                slot.error_detail = e.what();
            }
        }
    };

    const std::size_t workers = std::min(parallelism, requests.size());
    if (workers <= 1) {
        worker();
        return slots;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();  // joins
    return slots;
}

}  // namespace rec
