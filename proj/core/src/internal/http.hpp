#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "httplib.h"

#include "tqa/errors.hpp"

namespace tqa::internal {

struct EndpointParts {
    std::string base;   // scheme://host:port
    std::string prefix; // optional path prefix, no trailing slash
};

inline EndpointParts split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint must include a scheme: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {endpoint, ""};
    }
    std::string prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path_start), prefix};
}

inline std::string bearer_from_env(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* val = std::getenv(env_name.c_str());
    return val ? std::string(val) : std::string{};
}

struct HttpPostSpec {
    std::string endpoint; // base URL, may carry a path prefix
    std::string path;     // API path appended after the prefix
    std::string body;     // JSON payload
    std::string bearer;   // empty disables the Authorization header
    std::size_t timeout_ms = 30000;
    std::size_t max_retries = 3;
    double backoff_initial_ms = 100.0;
};

inline bool is_timeout_error(httplib::Error e) {
    return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
           e == httplib::Error::Write;
}

// POST returning the body of an HTTP 200 response. 429 and 5xx responses and
// connection-level failures are retried with exponential backoff (jittered);
// 401/403 abort immediately as AuthError, any other status as
// ProviderUnavailable. `on_attempt` fires before every wire attempt.
inline std::string http_post_json(const HttpPostSpec& spec,
                                  const std::function<void()>& on_attempt = {}) {
    EndpointParts parts = split_endpoint(spec.endpoint);
    const std::string path = parts.prefix + spec.path;

    std::string last_error;
    bool last_was_timeout = false;
    thread_local std::mt19937 jitter_rng{std::random_device{}()};

    for (std::size_t attempt = 0; attempt <= spec.max_retries; ++attempt) {
        if (attempt > 0) {
            double base = spec.backoff_initial_ms *
                          static_cast<double>(1ULL << (attempt - 1));
            std::uniform_real_distribution<double> jitter(
                0.0, spec.backoff_initial_ms * 0.5 + 1.0);
            double sleep_ms = std::min(base + jitter(jitter_rng), 5000.0);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long long>(sleep_ms)));
        }
        if (on_attempt) on_attempt();

        httplib::Client client(parts.base);
        auto ms = static_cast<time_t>(spec.timeout_ms);
        client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
        client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
        client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
        httplib::Headers headers;
        if (!spec.bearer.empty()) {
            headers.emplace("Authorization", "Bearer " + spec.bearer);
        }

        httplib::Result res =
            client.Post(path, headers, spec.body, "application/json");
        if (!res) {
            last_was_timeout = is_timeout_error(res.error());
            last_error = "connection error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            return res->body;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError("HTTP " + std::to_string(res->status) + " from " +
                            spec.endpoint + spec.path);
        }
        if (res->status == 429 || res->status >= 500) {
            last_was_timeout = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        throw ProviderUnavailable("HTTP " + std::to_string(res->status) +
                                  " from " + spec.endpoint + spec.path);
    }

    std::string msg = "request to " + spec.endpoint + spec.path + " failed after " +
                      std::to_string(spec.max_retries + 1) + " attempt(s): " +
                      last_error;
    if (last_was_timeout) throw TimeoutError(msg);
    throw ProviderUnavailable(msg);
}

} // namespace tqa::internal
