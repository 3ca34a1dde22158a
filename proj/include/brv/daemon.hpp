// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "brv/engine.hpp"

namespace brv {

inline constexpr std::size_t kDefaultQueueCapacity = 1024;

/// Outcome of one executed task, fanned out to every submitter that was
/// deduplicated into it. The value keeps insertion order so reports
/// serialize bit-exactly over the wire.
struct TaskResult {
    bool ok = false;
    OrderedJson value;
    std::string error_code;
    std::string error_message;
};

struct Task {
    std::uint64_t seq = 0; // submission order, also the internal id
    std::string kind;      // query | curate | search | status
    Json params;
    std::uint64_t dedup_key = 0;
    std::string dedup_payload; // canonical payload; guards against key collisions
    std::shared_ptr<std::promise<TaskResult>> promise;
    std::shared_future<TaskResult> future;
};

/// Key of (kind, canonical payload): queries and searches canonicalize
/// their text the same way the query cache does; curate tasks hash the
/// ordered operation list.
std::uint64_t task_dedup_key(const std::string& kind, const Json& params);

/// Bounded FIFO with pending-only deduplication. A task stops being a
/// dedup target the moment the executor picks it up.
class TaskQueue {
public:
    struct Submission {
        std::uint64_t task_seq = 0;
        std::shared_future<TaskResult> result;
        bool deduplicated = false; // attached to an already-pending task
    };

    explicit TaskQueue(std::size_t capacity = kDefaultQueueCapacity);

    /// Throws Error{queue_full} at capacity or after stop().
    Submission submit(const std::string& kind, const Json& params);

    /// Blocks for the next task. After stop(), drains what is queued and
    /// then returns nullptr.
    std::shared_ptr<Task> next();

    void stop();
    std::size_t depth() const;

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<std::shared_ptr<Task>> queue_;
    std::unordered_map<std::uint64_t, std::shared_ptr<Task>> pending_;
    std::uint64_t next_seq_ = 1;
    bool stopped_ = false;
};

/// One project's engine plus its serialized executor. All mutations and
/// queries flow through the queue in FIFO order; results fan out to
/// deduplicated submitters.
class ProjectSession {
public:
    ProjectSession(EngineConfig config, std::unique_ptr<Adapter> adapter = nullptr,
                   std::size_t queue_capacity = kDefaultQueueCapacity);
    ~ProjectSession();

    /// Loads the engine and starts the executor. Tasks submitted before
    /// start() run once it begins.
    void start();

    /// Graceful shutdown: stops intake, drains every queued task, joins.
    void stop();

    TaskQueue::Submission submit(const std::string& kind, const Json& params);

    MemoryEngine& engine() { return engine_; }
    std::size_t queue_depth() const { return queue_.depth(); }

private:
    void run();
    TaskResult execute(const Task& task);

    MemoryEngine engine_;
    TaskQueue queue_;
    std::thread executor_;
    std::atomic<bool> started_{false};
};

/// Newline-delimited JSON over a local domain socket. Request
/// `{id, op, params}`, response `{id, ok, result | error}`; see
/// PROTOCOL.md.
class DaemonServer {
public:
    DaemonServer(std::filesystem::path socket_path, ProjectSession& session);
    ~DaemonServer();

    /// Binds and starts accepting. A live daemon on the same path raises
    /// Error{socket_in_use}; a stale socket file is replaced.
    void start();

    /// Stops accepting and tears down client connections. The session is
    /// left running; stop it separately.
    void stop();

    const std::filesystem::path& socket_path() const { return path_; }

private:
    void accept_loop();
    void serve_connection(int fd);

    std::filesystem::path path_;
    ProjectSession& session_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex clients_mutex_;
    std::vector<std::thread> client_threads_;
    std::vector<int> client_fds_;
};

/// Blocking single-connection client used by the CLI and tests.
class DaemonClient {
public:
    /// Throws Error{daemon_unreachable} when nothing listens on the path.
    explicit DaemonClient(const std::filesystem::path& socket_path);
    ~DaemonClient();

    DaemonClient(const DaemonClient&) = delete;
    DaemonClient& operator=(const DaemonClient&) = delete;

    /// One round trip. Returns the full response frame with the server's
    /// key order intact; transport failures raise Error{daemon_unreachable}.
    OrderedJson request(const std::string& op, const Json& params);

private:
    int fd_ = -1;
    std::uint64_t next_id_ = 1;
    std::string buffer_;
};

} // namespace brv
