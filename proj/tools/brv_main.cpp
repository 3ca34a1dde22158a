// SPDX-License-Identifier: Apache-2.0

// brv: command-line front end over the memory engine. Talks to the
// project daemon through its socket; --standalone runs the same task
// pipeline in-process. See PROTOCOL.md for the wire format.

#include <signal.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "brv/daemon.hpp"
#include "brv/engine.hpp"
#include "brv/errors.hpp"
#include "brv/http_adapter.hpp"

namespace fs = std::filesystem;
using brv::Json;
using brv::OrderedJson;

namespace {

/// A failure reported by the daemon. Carried as strings because the
/// server may be a newer build with codes this binary does not know.
struct WireError {
    std::string code;
    std::string message;
};

std::string slurp_file(const fs::path& path, brv::Errc missing) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        brv::raise(missing, "cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// `adapter.baseUrl = "stub:<script.json>"` replays a scripted adapter:
/// a JSON array of {"kind": "answer"|"insufficient"|"tool", ...} steps.
std::unique_ptr<brv::Adapter> scripted_stub(const fs::path& script_path) {
    const Json script =
        Json::parse(slurp_file(script_path, brv::Errc::file_not_found), nullptr, false);
    if (script.is_discarded() || !script.is_array())
        brv::raise(brv::Errc::tool_validation, "stub script must be a JSON array of steps");
    std::vector<brv::ScriptStep> steps;
    for (const Json& step : script) {
        const std::string kind = step.value("kind", "answer");
        if (kind == "answer") {
            steps.push_back(brv::AdapterVerdict::answer(step.value("text", "")));
        } else if (kind == "insufficient") {
            steps.push_back(brv::AdapterVerdict::insufficient_context());
        } else if (kind == "tool") {
            steps.push_back(brv::AdapterVerdict::tool(
                step.value("name", ""),
                step.contains("arguments") ? step.at("arguments") : Json::object()));
        } else {
            brv::raise(brv::Errc::tool_validation, "unknown stub step kind: " + kind);
        }
    }
    return std::make_unique<brv::StubAdapter>(std::move(steps));
}

std::unique_ptr<brv::Adapter> make_adapter(const brv::EngineConfig& cfg) {
    const std::string& url = cfg.adapter.base_url;
    if (url.rfind("stub:", 0) == 0) {
        fs::path script(url.substr(5));
        if (script.is_relative())
            script = cfg.project_root / script;
        return scripted_stub(script);
    }
    if (!url.empty())
        return std::make_unique<brv::HttpChatAdapter>(cfg.adapter);
    return brv::HttpChatAdapter::from_env();
}

/// One call surface for both modes. Standalone runs a private session so
/// the CLI and the daemon execute verbs through identical code.
class Frontend {
public:
    Frontend(brv::EngineConfig cfg, bool standalone) {
        if (standalone) {
            session_ = std::make_unique<brv::ProjectSession>(cfg, make_adapter(cfg));
            session_->start();
        } else {
            client_ = std::make_unique<brv::DaemonClient>(cfg.socket_path);
        }
    }

    OrderedJson call(const std::string& op, const Json& params) {
        if (session_) {
            brv::TaskResult result = session_->submit(op, params).result.get();
            if (!result.ok)
                throw WireError{result.error_code, result.error_message};
            return std::move(result.value);
        }
        OrderedJson response = client_->request(op, params);
        if (response.value("ok", false))
            return response.at("result");
        const OrderedJson error =
            response.contains("error") ? response.at("error") : OrderedJson::object();
        throw WireError{error.value("code", "internal"), error.value("message", "daemon error")};
    }

private:
    std::unique_ptr<brv::ProjectSession> session_;
    std::unique_ptr<brv::DaemonClient> client_;
};

/// Resolves the operation list for `curate`: an explicit --ops file, or
/// source files digested by the adapter into a proposed batch.
Json load_operations(const std::string& ops_file, const std::vector<std::string>& files,
                     const std::string& message, const brv::EngineConfig& cfg) {
    Json ops;
    if (!ops_file.empty()) {
        const Json doc =
            Json::parse(slurp_file(ops_file, brv::Errc::file_not_found), nullptr, false);
        if (doc.is_discarded())
            brv::raise(brv::Errc::tool_validation, "operations file is not valid JSON");
        ops = doc.is_object() && doc.contains("operations") ? doc.at("operations") : doc;
    } else {
        if (files.empty())
            brv::raise(brv::Errc::tool_validation, "curate needs --ops FILE or --files ...");
        const auto adapter = make_adapter(cfg);
        if (!adapter)
            brv::raise(brv::Errc::adapter_unavailable,
                       "curate --files needs an adapter; set adapter.baseUrl in "
                       ".brv/config.json or BRV_LLM_BASE_URL");
        const auto sources = brv::preprocess_sources(files, cfg.project_root);
        std::string prompt =
            "Digest the sources below into knowledge entries.\n"
            "Reply with only a JSON array of curate operations, each\n"
            "{\"type\": \"ADD|UPDATE|UPSERT|MERGE|DELETE\", \"path\": "
            "\"domain/topic/entry\", \"content\": \"markdown\", \"reason\": \"why\"}.\n";
        if (!message.empty())
            prompt += "Instruction: " + message + "\n";
        for (const auto& src : sources)
            prompt += "\n=== " + src.path + " ===\n" + src.text + "\n";
        const brv::AdapterVerdict verdict = adapter->complete({prompt, 2048, 0.2});
        if (verdict.kind != brv::VerdictKind::Answer)
            brv::raise(brv::Errc::tool_validation, "adapter did not propose operations");
        ops = Json::parse(verdict.text, nullptr, false);
        if (ops.is_discarded())
            brv::raise(brv::Errc::tool_validation, "adapter proposal is not valid JSON");
        if (ops.is_object() && ops.contains("operations"))
            ops = ops.at("operations");
    }
    (void)brv::parse_operations(ops); // validate before the write turn
    return ops;
}

int run_serve(const brv::EngineConfig& cfg) {
    // Block the shutdown signals before any thread exists so every
    // worker inherits the mask and only sigwait() sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    brv::ProjectSession session(cfg, make_adapter(cfg));
    session.start();
    brv::DaemonServer server(cfg.socket_path, session);
    server.start();
    std::cout << "brv daemon: project " << cfg.project_root.string() << ", socket "
              << cfg.socket_path.string() << std::endl;

    int signal_number = 0;
    sigwait(&signals, &signal_number);
    std::cerr << "brv daemon: draining after signal " << signal_number << std::endl;
    server.stop();
    session.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"brv: markdown context tree memory engine"};
    app.require_subcommand(1);

    std::string root_flag;
    std::string socket_flag;
    bool standalone = false;
    app.add_option("--root", root_flag,
                   "project root (default: $BRV_PROJECT_ROOT, then the working directory)");
    app.add_option("--socket", socket_flag, "daemon socket path (default from config)");
    app.add_flag("--standalone", standalone, "run in-process instead of contacting a daemon");

    auto* query_cmd = app.add_subcommand("query", "resolve a question through the tiered pipeline");
    std::string query_text;
    bool plain = false;
    bool strict = false;
    query_cmd->add_option("text", query_text, "the question")->required();
    query_cmd->add_flag("--plain", plain, "print only the answer text");
    query_cmd->add_flag("--strict", strict, "exit 2 when the answer is out of distribution");

    auto* search_cmd = app.add_subcommand("search", "rank entries against a query");
    std::string search_text;
    int limit = 10;
    search_cmd->add_option("text", search_text, "search terms")->required();
    search_cmd->add_option("--limit", limit, "maximum hits to print");

    auto* curate_cmd = app.add_subcommand("curate", "apply a batch of knowledge operations");
    std::string ops_file;
    std::vector<std::string> files;
    std::string message;
    curate_cmd->add_option("--ops", ops_file, "JSON file holding the operation array");
    curate_cmd->add_option("--files", files, "source files the adapter digests into operations");
    curate_cmd->add_option("--message", message, "instruction accompanying --files");

    auto* serve_cmd = app.add_subcommand("serve", "run the project daemon until SIGINT/SIGTERM");
    auto* status_cmd = app.add_subcommand("status", "print tree, cache and queue statistics");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path root = brv::resolve_project_root(root_flag);
        brv::EngineConfig cfg = brv::EngineConfig::load(root);
        if (!socket_flag.empty())
            cfg.socket_path = fs::absolute(socket_flag);

        if (app.got_subcommand(serve_cmd))
            return run_serve(cfg);

        Frontend frontend(cfg, standalone);
        if (app.got_subcommand(query_cmd)) {
            const OrderedJson outcome = frontend.call("query", Json{{"q", query_text}});
            if (plain)
                std::cout << outcome.value("answer", "") << "\n";
            else
                std::cout << outcome.dump() << "\n";
            return strict && outcome.value("ood", false) ? 2 : 0;
        }
        if (app.got_subcommand(search_cmd)) {
            std::cout << frontend.call("search", Json{{"q", search_text}, {"limit", limit}}).dump()
                      << "\n";
            return 0;
        }
        if (app.got_subcommand(curate_cmd)) {
            const Json ops = load_operations(ops_file, files, message, cfg);
            std::cout << frontend.call("curate", Json{{"operations", ops}}).dump() << "\n";
            return 0;
        }
        if (app.got_subcommand(status_cmd)) {
            std::cout << frontend.call("status", Json::object()).dump() << "\n";
            return 0;
        }
    } catch (const WireError& e) {
        std::cerr << "brv: " << e.code << ": " << e.message << "\n";
        return 1;
    } catch (const brv::Error& e) {
        std::cerr << "brv: " << brv::to_string(e.code()) << ": " << e.what() << "\n";
        if (e.code() == brv::Errc::daemon_unreachable)
            std::cerr << "hint: start one with `brv serve`, or pass --standalone\n";
        return 1;
    }
    return 0;
}
