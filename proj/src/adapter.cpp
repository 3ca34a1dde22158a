// SPDX-License-Identifier: Apache-2.0

#include "brv/adapter.hpp"

#include <sstream>

#include "brv/errors.hpp"

namespace brv {

std::string render_conversation(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (const auto& message : messages) {
        out += message.role + ": " + message.content + "\n";
    }
    return out;
}

std::string truncate_to_tokens(const std::string& text, int max_tokens) {
    if (max_tokens <= 0) return "";
    int count = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size(); i++) {
        bool ws = text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r';
        if (!ws && !in_token) {
            count++;
            if (count > max_tokens) {
                std::string head = text.substr(0, i);
                while (!head.empty() && (head.back() == ' ' || head.back() == '\t' ||
                                         head.back() == '\n' || head.back() == '\r')) {
                    head.pop_back();
                }
                return head;
            }
        }
        in_token = !ws;
    }
    return text;
}

AdapterVerdict StubAdapter::step(RecordedRequest request) {
    std::function<AdapterVerdict(const std::string&)> callback;
    AdapterVerdict verdict;
    {
        std::lock_guard lock(mutex_);
        if (next_ >= script_.size()) {
            raise(Errc::script_exhausted,
                  "stub script exhausted after " + std::to_string(script_.size()) + " steps");
        }
        ScriptStep& current = script_[next_++];
        if (auto* fixed = std::get_if<AdapterVerdict>(&current)) {
            verdict = *fixed;
        } else {
            callback = std::get<std::function<AdapterVerdict(const std::string&)>>(current);
        }
        transcript_.push_back(request);
    }
    if (callback) verdict = callback(request.prompt);
    if (verdict.kind == VerdictKind::Answer) {
        verdict.text = truncate_to_tokens(verdict.text, request.max_output_tokens);
    }
    return verdict;
}

AdapterVerdict StubAdapter::complete(const CompletionRequest& request) {
    return step({request.prompt, request.max_output_tokens, request.temperature, false});
}

AdapterVerdict StubAdapter::next_turn(const LoopRequest& request) {
    return step({render_conversation(request.messages), request.max_output_tokens,
                 request.temperature, true});
}

LoopResult run_tool_loop(Adapter& adapter, const std::string& goal, const ToolBindings& tools,
                         int max_iterations, int max_output_tokens, double temperature) {
    LoopResult result;
    std::vector<ChatMessage> messages{{"user", goal}};

    for (int iteration = 0; iteration < max_iterations; iteration++) {
        AdapterVerdict verdict = adapter.next_turn({messages, max_output_tokens, temperature});
        result.transcript.push_back({LoopEvent::Kind::Verdict, verdict, {}, {}, false});

        if (verdict.kind == VerdictKind::Answer) {
            result.answer = verdict.text;
            return result;
        }
        if (verdict.kind == VerdictKind::InsufficientContext) {
            // Only a direct-response verdict; in a loop the model must
            // gather context through tools instead.
            Json observation = {{"error", "insufficient_context is not valid inside the loop; "
                                          "call a tool or answer"}};
            result.transcript.push_back(
                {LoopEvent::Kind::Observation, {}, "", observation, true});
            messages.push_back({"tool", observation.dump()});
            continue;
        }

        const ToolCall& call = verdict.call;
        messages.push_back({"assistant", "TOOL " + call.name + " " + call.arguments.dump()});

        const std::function<Json(const Json&)>* binding = nullptr;
        if (call.name == "search_knowledge") binding = &tools.search_knowledge;
        else if (call.name == "read_entry") binding = &tools.read_entry;
        else if (call.name == "list_tree") binding = &tools.list_tree;
        else if (call.name == "curate") binding = &tools.curate;

        Json observation;
        bool error = false;
        if (!binding || !*binding) {
            observation = {{"error", "unknown or unavailable tool: " + call.name}};
            error = true;
        } else {
            try {
                observation = (*binding)(call.arguments);
            } catch (const Error& e) {
                observation = {{"error", e.what()}};
                error = true;
            }
        }
        if (!error && call.name == "read_entry" && call.arguments.contains("path") &&
            call.arguments["path"].is_string()) {
            result.read_paths.push_back(call.arguments["path"].get<std::string>());
        }
        result.transcript.push_back(
            {LoopEvent::Kind::Observation, {}, call.name, observation, error});
        messages.push_back({"tool", observation.dump()});
    }

    result.iteration_limit_hit = true;
    result.answer = "Iteration limit reached without a final answer.";
    return result;
}

} // namespace brv
