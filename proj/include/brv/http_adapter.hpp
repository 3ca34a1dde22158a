// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "brv/adapter.hpp"

namespace brv {

/// Generic chat-completions backend reachable over plain HTTP (a local
/// gateway or proxy). No provider specifics live here; everything is
/// configuration.
struct HttpAdapterConfig {
    std::string base_url; // http://host:port[/prefix]
    std::string model;
    std::string api_key;            // optional bearer token
    int complete_timeout_s = 10;    // single completion deadline
    int loop_turn_timeout_s = 20;   // per loop-turn deadline
};

class HttpChatAdapter : public Adapter {
public:
    explicit HttpChatAdapter(HttpAdapterConfig config);

    AdapterVerdict complete(const CompletionRequest& request) override;
    AdapterVerdict next_turn(const LoopRequest& request) override;

    /// Builds the adapter from BRV_LLM_* environment variables; returns
    /// nullptr when BRV_LLM_BASE_URL is unset (engine runs adapter-free).
    static std::unique_ptr<Adapter> from_env();

private:
    AdapterVerdict post_chat(const std::vector<ChatMessage>& messages, int max_tokens,
                             double temperature, int timeout_s);

    HttpAdapterConfig config_;
};

} // namespace brv
