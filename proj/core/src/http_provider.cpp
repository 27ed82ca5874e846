#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "selfbias/error.hpp"
#include "selfbias/providers.hpp"

namespace selfbias::providers {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

std::string redact(std::string text, const std::string& secret) {
    if (secret.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(secret, pos)) != std::string::npos) {
        text.replace(pos, secret.size(), "***");
        pos += 3;
    }
    return text;
}

}  // namespace

struct HttpProvider::Impl {
    ProviderConfig config;
    Sleeper sleep;
    Endpoint endpoint;
    std::string api_key;
    std::counting_semaphore<1024> in_flight;

    Impl(ProviderConfig c, Sleeper s)
        : config(std::move(c)),
          sleep(std::move(s)),
          endpoint(split_url(config.endpoint)),
          in_flight(std::clamp(config.max_in_flight, 1, 1024)) {
        if (!sleep) sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
        if (!config.api_key_env.empty()) {
            if (const char* v = std::getenv(config.api_key_env.c_str())) api_key = v;
        }
    }

    std::string body_for(const CompletionRequest& request) const {
        nlohmann::ordered_json body;
        body["model"] = config.model;
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
        body["temperature"] = request.temperature.value_or(config.temperature);
        body["max_tokens"] = config.max_tokens;
        body["seed"] = request.seed;
        return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    }

    std::string complete(const CompletionRequest& request) {
        const std::string body = body_for(request);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

        struct Slot {
            std::counting_semaphore<1024>& sem;
            explicit Slot(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
            ~Slot() { sem.release(); }
        } slot(in_flight);

        httplib::Client client(endpoint.origin);
        const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

        std::string last_error;
        int last_status = 0;
        for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
            if (attempt > 0) {
                const auto delay = std::chrono::milliseconds(
                    static_cast<long long>(config.backoff_initial_seconds * 1000.0 * std::pow(2.0, attempt - 1)));
                spdlog::debug("retrying {} in {} ms ({})", request.key.describe(), delay.count(), last_error);
                sleep(delay);
            }
            spdlog::debug("POST {}{} body={}", endpoint.origin, endpoint.path, redact(body, api_key));
            auto res = client.Post(endpoint.path, headers, body, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                last_status = 0;
                continue;
            }
            spdlog::debug("HTTP {} body={}", res->status, redact(res->body, api_key));
            if (res->status >= 200 && res->status < 300) return parse_content(res->body);
            last_status = res->status;
            last_error = "HTTP " + std::to_string(res->status);
            if (!retryable(res->status)) {
                throw TransportError(last_error + " from " + config.endpoint + " for " + request.key.describe(),
                                     res->status);
            }
        }
        throw TransportError("retries exhausted (" + last_error + ") for " + request.key.describe(), last_status);
    }

    static std::string parse_content(const std::string& body) {
        try {
            const auto j = nlohmann::json::parse(body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed completion response: ") + e.what());
        }
    }
};

HttpProvider::HttpProvider(ProviderConfig config, Sleeper sleeper)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(sleeper))) {}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::complete(const CompletionRequest& request) { return impl_->complete(request); }

std::string HttpProvider::tag() const { return impl_->config.effective_tag(); }

}  // namespace selfbias::providers
