#pragma once

#include <atomic>
#include <chrono>

#include <httplib.h>
#include <json.hpp>

#include "gpr/prior.hpp"

namespace gpr {

/// Prior provider speaking a generic chat-completion JSON shape: the prompt
/// template plus a base64 query image in one user message, temperature 0.
/// Transport failures (including non-2xx statuses) are retried with
/// exponential backoff; once retries are exhausted the query degrades to
/// Fallback-Unavailable and is counted, it does not abort the batch.
class RemotePriorProvider : public PriorProvider {
public:
    explicit RemotePriorProvider(RemotePriorConfig config) : config_(std::move(config)) {
        const size_t scheme = config_.url.find("://");
        if (scheme == std::string::npos) {
            raise(Errc::ConfigError, "remote prior url must include a scheme: " + config_.url);
        }
        const size_t slash = config_.url.find('/', scheme + 3);
        base_ = config_.url.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : config_.url.substr(slash);
        if (base_.size() <= scheme + 3) {
            raise(Errc::ConfigError, "remote prior url has no host: " + config_.url);
        }
        template_text_ = read_file(config_.prompt_template_path);
        if (!config_.auth_env.empty()) {
            const char* tok = std::getenv(config_.auth_env.c_str());
            if (tok == nullptr) {
                // the variable NAME is loggable, its value never is
                raise(Errc::ConfigError,
                      "auth token environment variable not set: " + config_.auth_env);
            }
            token_ = tok;
        }
        semaphore_ = std::make_unique<std::counting_semaphore<>>(
            std::max<uint32_t>(1, config_.in_flight_cap));
    }

    PriorEstimate get_prior(uint64_t query_id, std::span<const unsigned char> image) override {
        if (image.empty()) {
            raise(Errc::ConfigError, "remote prior provider requires query image bytes (query " +
                                         std::to_string(query_id) + ")");
        }

        nlohmann::json request = {
            {"model", config_.model},
            {"temperature", 0},
            {"messages",
             {{{"role", "user"},
               {"content",
                {{{"type", "text"}, {"text", template_text_}},
                 {{"type", "image_url"},
                  {"image_url",
                   {{"url", "data:image/jpeg;base64," + detail::base64_encode(image)}}}}}}}}},
        };
        const std::string body = request.dump();

        semaphore_->acquire();
        struct Release {
            std::counting_semaphore<>* s;
            ~Release() { s->release(); }
        } release{semaphore_.get()};

        for (uint32_t attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0) {
                const auto backoff =
                    std::chrono::milliseconds(uint64_t(config_.initial_backoff_ms) << (attempt - 1));
                std::this_thread::sleep_for(backoff);
            }
            httplib::Client client(base_);
            client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
            client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
            httplib::Headers headers;
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

            auto res = client.Post(path_, headers, body, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                return extract_coordinates(response_text(res->body), tag());
            }
        }
        ++exhausted_;
        return PriorEstimate::unavailable("", tag());
    }

    std::string tag() const override { return "remote:" + config_.model; }
    uint64_t transport_exhaustions() const override { return exhausted_.load(); }

private:
    /// choices[0].message.content when the body is a chat-completion JSON,
    /// otherwise the raw body (mock endpoints may answer in plain text).
    static std::string response_text(const std::string& body) {
        auto j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (!j.is_discarded()) {
            auto it = j.find("choices");
            if (it != j.end() && it->is_array() && !it->empty()) {
                const auto& msg = (*it)[0];
                if (msg.contains("message") && msg["message"].contains("content") &&
                    msg["message"]["content"].is_string()) {
                    return msg["message"]["content"].get<std::string>();
                }
            }
        }
        return body;
    }

    RemotePriorConfig config_;
    std::string base_;
    std::string path_;
    std::string template_text_;
    std::string token_;
    std::unique_ptr<std::counting_semaphore<>> semaphore_;
    std::atomic<uint64_t> exhausted_{0};
};

}  // namespace gpr
