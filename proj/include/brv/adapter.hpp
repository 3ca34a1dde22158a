// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace brv {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json; // for wire shapes with pinned key order

/// Single-shot completion parameters. Retrieval tier 3 uses
/// (1024, 0.3); the agentic loop uses (2048, 0.5) per turn.
struct CompletionRequest {
    std::string prompt;
    int max_output_tokens = 1024;
    double temperature = 0.3;
};

struct ChatMessage {
    std::string role; // system | user | assistant | tool
    std::string content;
};

/// One turn of a multi-turn loop: the whole conversation so far.
struct LoopRequest {
    std::vector<ChatMessage> messages;
    int max_output_tokens = 2048;
    double temperature = 0.5;
};

/// A structured tool invocation requested by the model.
struct ToolCall {
    std::string name; // search_knowledge | read_entry | list_tree | curate
    Json arguments;
};

enum class VerdictKind { Answer, InsufficientContext, ToolCallRequest };

/// What the model decided to do with a request.
struct AdapterVerdict {
    VerdictKind kind = VerdictKind::Answer;
    std::string text;
    ToolCall call;

    static AdapterVerdict answer(std::string text) {
        return {VerdictKind::Answer, std::move(text), {}};
    }
    static AdapterVerdict insufficient_context() {
        return {VerdictKind::InsufficientContext, {}, {}};
    }
    static AdapterVerdict tool(std::string name, Json arguments) {
        return {VerdictKind::ToolCallRequest, {}, {std::move(name), std::move(arguments)}};
    }
};

/// Boundary for all LLM interaction. Implementations must be safe for
/// concurrent calls.
class Adapter {
public:
    virtual ~Adapter() = default;

    /// One completion. Answer text is capped at max_output_tokens.
    /// Throws Error{adapter_timeout, adapter_unavailable}.
    virtual AdapterVerdict complete(const CompletionRequest& request) = 0;

    /// One loop turn over the conversation so far.
    virtual AdapterVerdict next_turn(const LoopRequest& request) = 0;
};

/// A scripted step: either a fixed verdict or a callback that sees the
/// rendered prompt (useful for echoing context back in tests).
using ScriptStep =
    std::variant<AdapterVerdict, std::function<AdapterVerdict(const std::string& prompt)>>;

/// Deterministic adapter for tests: replays a finite script and records
/// every request it sees. Throws Error{script_exhausted} past the end.
class StubAdapter : public Adapter {
public:
    StubAdapter() = default;
    explicit StubAdapter(std::vector<ScriptStep> script) : script_(std::move(script)) {}

    void push(ScriptStep step) {
        std::lock_guard lock(mutex_);
        script_.push_back(std::move(step));
    }

    AdapterVerdict complete(const CompletionRequest& request) override;
    AdapterVerdict next_turn(const LoopRequest& request) override;

    struct RecordedRequest {
        std::string prompt; // rendered conversation for loop turns
        int max_output_tokens = 0;
        double temperature = 0.0;
        bool loop_turn = false;
    };

    std::vector<RecordedRequest> transcript() const {
        std::lock_guard lock(mutex_);
        return transcript_;
    }
    std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return transcript_.size();
    }

private:
    AdapterVerdict step(RecordedRequest request);

    mutable std::mutex mutex_;
    std::vector<ScriptStep> script_;
    std::size_t next_ = 0;
    std::vector<RecordedRequest> transcript_;
};

/// Engine-side implementations of the tools the loop may call. Absent
/// bindings make the tool invalid (reported back into the loop, not
/// thrown). Bindings signal bad arguments with Error{tool_validation}.
struct ToolBindings {
    std::function<Json(const Json&)> search_knowledge;
    std::function<Json(const Json&)> read_entry;
    std::function<Json(const Json&)> list_tree;
    std::function<Json(const Json&)> curate;
};

struct LoopEvent {
    enum class Kind { Verdict, Observation } kind = Kind::Verdict;
    AdapterVerdict verdict;  // Kind::Verdict
    std::string tool_name;   // Kind::Observation
    Json payload;            // tool result or validation error
    bool error = false;
};

struct LoopResult {
    std::string answer;
    bool iteration_limit_hit = false;
    std::vector<LoopEvent> transcript;
    std::vector<std::string> read_paths; // entries fetched via read_entry
};

inline constexpr int kLoopMaxIterations = 50;
inline constexpr int kLoopMaxOutputTokens = 2048;
inline constexpr double kLoopTemperature = 0.5;
inline constexpr int kDirectMaxOutputTokens = 1024;
inline constexpr double kDirectTemperature = 0.3;

/// Alternates adapter turns and tool executions until the model answers
/// or the iteration cap hits (cap is reported, not thrown). Invalid tool
/// calls become error observations the model sees next turn.
LoopResult run_tool_loop(Adapter& adapter, const std::string& goal, const ToolBindings& tools,
                         int max_iterations = kLoopMaxIterations,
                         int max_output_tokens = kLoopMaxOutputTokens,
                         double temperature = kLoopTemperature);

/// Renders a conversation to one prompt string (used by the stub's
/// callback steps and by plain-completion backends).
std::string render_conversation(const std::vector<ChatMessage>& messages);

/// Truncates text to a whitespace-token budget.
std::string truncate_to_tokens(const std::string& text, int max_tokens);

} // namespace brv
