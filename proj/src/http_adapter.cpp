// SPDX-License-Identifier: Apache-2.0

#include "brv/http_adapter.hpp"

#include <cstdlib>

#include "httplib.h"

#include "brv/errors.hpp"

namespace brv {

namespace {

/// The marker a backend answers with when the prefetched context does
/// not cover the question (documented in CONFIG.md).
constexpr std::string_view kInsufficientMarker = "INSUFFICIENT_CONTEXT";

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

/// Splits http://host:port/prefix into (host:port, /prefix).
bool split_base_url(const std::string& base, std::string& host_port, std::string& prefix) {
    constexpr std::string_view scheme = "http://";
    if (base.rfind(scheme.data(), 0) != 0) return false;
    std::string rest = base.substr(scheme.size());
    auto slash = rest.find('/');
    if (slash == std::string::npos) {
        host_port = rest;
        prefix.clear();
    } else {
        host_port = rest.substr(0, slash);
        prefix = rest.substr(slash);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
    return !host_port.empty();
}

AdapterVerdict parse_model_text(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
    if (text.find(kInsufficientMarker) != std::string::npos) {
        return AdapterVerdict::insufficient_context();
    }
    // A bare JSON object {"tool": ..., "arguments": ...} is a tool call.
    auto parsed = Json::parse(text, nullptr, false);
    if (parsed.is_object() && parsed.contains("tool") && parsed["tool"].is_string()) {
        return AdapterVerdict::tool(parsed["tool"].get<std::string>(),
                                    parsed.value("arguments", Json::object()));
    }
    return AdapterVerdict::answer(std::move(text));
}

} // namespace

HttpChatAdapter::HttpChatAdapter(HttpAdapterConfig config) : config_(std::move(config)) {}

std::unique_ptr<Adapter> HttpChatAdapter::from_env() {
    std::string base = env_or("BRV_LLM_BASE_URL", "");
    if (base.empty()) return nullptr;
    HttpAdapterConfig config;
    config.base_url = base;
    config.model = env_or("BRV_LLM_MODEL", "default");
    config.api_key = env_or("BRV_LLM_API_KEY", "");
    config.complete_timeout_s = std::atoi(env_or("BRV_LLM_COMPLETE_TIMEOUT_S", "10").c_str());
    config.loop_turn_timeout_s = std::atoi(env_or("BRV_LLM_LOOP_TIMEOUT_S", "20").c_str());
    return std::make_unique<HttpChatAdapter>(std::move(config));
}

AdapterVerdict HttpChatAdapter::post_chat(const std::vector<ChatMessage>& messages,
                                          int max_tokens, double temperature, int timeout_s) {
    std::string host_port, prefix;
    if (!split_base_url(config_.base_url, host_port, prefix)) {
        raise(Errc::adapter_unavailable,
              "unsupported base URL (need http://host:port[/prefix]): " + config_.base_url);
    }

    Json body = {{"model", config_.model},
                 {"max_tokens", max_tokens},
                 {"temperature", temperature}};
    body["messages"] = Json::array();
    for (const auto& message : messages) {
        body["messages"].push_back({{"role", message.role}, {"content", message.content}});
    }

    httplib::Client client(host_port);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    auto response =
        client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
    if (!response) {
        auto err = response.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write) {
            raise(Errc::adapter_timeout, "backend did not answer within " +
                                             std::to_string(timeout_s) + "s");
        }
        raise(Errc::adapter_unavailable, "cannot reach " + config_.base_url + ": " +
                                             httplib::to_string(err));
    }
    if (response->status != 200) {
        raise(Errc::adapter_unavailable,
              "backend returned HTTP " + std::to_string(response->status));
    }

    auto parsed = Json::parse(response->body, nullptr, false);
    if (!parsed.is_object() || !parsed.contains("choices") || parsed["choices"].empty()) {
        raise(Errc::adapter_unavailable, "malformed backend response");
    }
    const auto& message = parsed["choices"][0]["message"];
    if (!message.is_object() || !message.contains("content") || !message["content"].is_string()) {
        raise(Errc::adapter_unavailable, "malformed backend response");
    }
    return parse_model_text(message["content"].get<std::string>());
}

AdapterVerdict HttpChatAdapter::complete(const CompletionRequest& request) {
    return post_chat({{"user", request.prompt}}, request.max_output_tokens, request.temperature,
                     config_.complete_timeout_s);
}

AdapterVerdict HttpChatAdapter::next_turn(const LoopRequest& request) {
    return post_chat(request.messages, request.max_output_tokens, request.temperature,
                     config_.loop_turn_timeout_s);
}

} // namespace brv
