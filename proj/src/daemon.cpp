// SPDX-License-Identifier: Apache-2.0
#include "brv/daemon.hpp"

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <utility>

#include "brv/errors.hpp"
#include "brv/hash.hpp"

namespace brv {

namespace {

// A frame larger than this is a protocol violation, not a big request.
constexpr std::size_t kMaxFrameBytes = 16u << 20;

std::string dedup_payload(const std::string& kind, const Json& params) {
    if (kind == "query" || kind == "search")
        return canonicalize_query(params.is_object() ? params.value("q", "") : "");
    if (kind == "curate" && params.is_object() && params.contains("operations"))
        return params.at("operations").dump();
    return params.is_null() ? std::string() : params.dump();
}

std::uint64_t fold_key(const std::string& kind, const std::string& payload) {
    const Hash128 h = murmur3_128(kind + '\0' + payload);
    return h.hi ^ h.lo;
}

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

void fill_addr(sockaddr_un& addr, const std::string& path, Errc on_too_long) {
    if (path.size() >= sizeof(addr.sun_path))
        raise(on_too_long, "socket path too long: " + path);
    addr = {};
    addr.sun_family = AF_UNIX;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
}

OrderedJson error_frame(const Json& id, std::string_view code, std::string_view message) {
    return OrderedJson{{"id", OrderedJson(id)},
                       {"ok", false},
                       {"error", OrderedJson{{"code", std::string(code)},
                                             {"message", std::string(message)}}}};
}

} // namespace

std::uint64_t task_dedup_key(const std::string& kind, const Json& params) {
    return fold_key(kind, dedup_payload(kind, params));
}

TaskQueue::TaskQueue(std::size_t capacity) : capacity_(capacity) {}

TaskQueue::Submission TaskQueue::submit(const std::string& kind, const Json& params) {
    std::lock_guard lock(mutex_);
    if (stopped_)
        raise(Errc::queue_full, "task queue is shut down");

    std::string payload = dedup_payload(kind, params);
    const std::uint64_t key = fold_key(kind, payload);
    const auto hit = pending_.find(key);
    if (hit != pending_.end() && hit->second->kind == kind &&
        hit->second->dedup_payload == payload)
        return {hit->second->seq, hit->second->future, true};

    if (queue_.size() >= capacity_)
        raise(Errc::queue_full,
              "task queue is full (" + std::to_string(capacity_) + " pending)");

    auto task = std::make_shared<Task>();
    task->seq = next_seq_++;
    task->kind = kind;
    task->params = params;
    task->dedup_key = key;
    task->dedup_payload = std::move(payload);
    task->promise = std::make_shared<std::promise<TaskResult>>();
    task->future = task->promise->get_future().share();
    queue_.push_back(task);
    if (hit == pending_.end())
        pending_.emplace(key, task);
    ready_.notify_one();
    return {task->seq, task->future, false};
}

std::shared_ptr<Task> TaskQueue::next() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return stopped_ || !queue_.empty(); });
    if (queue_.empty())
        return nullptr;
    auto task = queue_.front();
    queue_.pop_front();
    const auto it = pending_.find(task->dedup_key);
    if (it != pending_.end() && it->second == task)
        pending_.erase(it);
    return task;
}

void TaskQueue::stop() {
    {
        std::lock_guard lock(mutex_);
        stopped_ = true;
    }
    ready_.notify_all();
}

std::size_t TaskQueue::depth() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

ProjectSession::ProjectSession(EngineConfig config, std::unique_ptr<Adapter> adapter,
                               std::size_t queue_capacity)
    : engine_(std::move(config), std::move(adapter)), queue_(queue_capacity) {}

ProjectSession::~ProjectSession() { stop(); }

void ProjectSession::start() {
    if (started_.exchange(true))
        return;
    engine_.load();
    executor_ = std::thread([this] { run(); });
}

void ProjectSession::stop() {
    queue_.stop();
    if (executor_.joinable())
        executor_.join();
    // A session that never started still owes its waiters an answer.
    while (auto task = queue_.next()) {
        TaskResult result;
        result.ok = false;
        result.error_code = "queue_full";
        result.error_message = "session stopped before the task ran";
        task->promise->set_value(std::move(result));
    }
}

TaskQueue::Submission ProjectSession::submit(const std::string& kind, const Json& params) {
    return queue_.submit(kind, params);
}

void ProjectSession::run() {
    while (auto task = queue_.next())
        task->promise->set_value(execute(*task));
}

TaskResult ProjectSession::execute(const Task& task) {
    TaskResult result;
    try {
        if (task.kind == "query") {
            const std::string q = task.params.is_object() ? task.params.value("q", "") : "";
            result.value = engine_.query(q).to_json();
        } else if (task.kind == "search") {
            const std::string q = task.params.is_object() ? task.params.value("q", "") : "";
            int limit = task.params.is_object() ? task.params.value("limit", 10) : 10;
            limit = std::max(limit, 0);
            const SearchResult found = engine_.search(q);
            OrderedJson hits = OrderedJson::array();
            for (const SearchHit& hit : found.hits) {
                if (hits.size() >= static_cast<std::size_t>(limit))
                    break;
                const KnowledgeEntry* entry = engine_.store().find_entry(hit.path);
                hits.push_back(OrderedJson{{"path", hit.path},
                                           {"title", entry ? entry->title : ""},
                                           {"score", hit.normalized_score}});
            }
            result.value = OrderedJson{{"hits", std::move(hits)}};
        } else if (task.kind == "curate") {
            if (!task.params.is_object() || !task.params.contains("operations"))
                raise(Errc::tool_validation, "curate expects params.operations");
            const auto ops = parse_operations(task.params.at("operations"));
            result.value = engine_.curate(ops).to_json();
        } else if (task.kind == "status") {
            OrderedJson status = engine_.status();
            status["queueDepth"] = queue_.depth();
            result.value = std::move(status);
        } else {
            raise(Errc::tool_validation, "unknown op: " + task.kind);
        }
        result.ok = true;
    } catch (const Error& e) {
        result.ok = false;
        result.error_code = std::string(to_string(e.code()));
        result.error_message = e.what();
    } catch (const std::exception& e) {
        result.ok = false;
        result.error_code = "internal";
        result.error_message = e.what();
    }
    return result;
}

DaemonServer::DaemonServer(std::filesystem::path socket_path, ProjectSession& session)
    : path_(std::move(socket_path)), session_(session) {}

DaemonServer::~DaemonServer() { stop(); }

void DaemonServer::start() {
    const std::string path = path_.string();
    sockaddr_un addr;
    fill_addr(addr, path, Errc::io_failure);
    if (path_.has_parent_path())
        std::filesystem::create_directories(path_.parent_path());

    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        raise(Errc::io_failure, "socket: " + std::string(std::strerror(errno)));

    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        if (errno != EADDRINUSE) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            listen_fd_ = -1;
            raise(Errc::io_failure, "bind " + path + ": " + why);
        }
        // Somebody answering on the path means a live daemon; a refused
        // connection means a stale file from a dead one.
        const int probe = ::socket(AF_UNIX, SOCK_STREAM, 0);
        const bool alive =
            probe >= 0 &&
            ::connect(probe, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0;
        if (probe >= 0)
            ::close(probe);
        if (alive) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            raise(Errc::socket_in_use, "another daemon is listening on " + path);
        }
        ::unlink(path.c_str());
        if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            listen_fd_ = -1;
            raise(Errc::io_failure, "bind " + path + ": " + why);
        }
    }
    if (::listen(listen_fd_, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        ::unlink(path.c_str());
        raise(Errc::io_failure, "listen " + path + ": " + why);
    }
    running_.store(true);
    acceptor_ = std::thread([this] { accept_loop(); });
}

void DaemonServer::stop() {
    running_.store(false);
    if (listen_fd_ >= 0) {
        // shutdown() wakes a blocked accept(), close() alone may not
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
        ::unlink(path_.string().c_str());
    }
    if (acceptor_.joinable())
        acceptor_.join();

    std::vector<std::thread> workers;
    {
        std::lock_guard lock(clients_mutex_);
        for (const int fd : client_fds_)
            ::shutdown(fd, SHUT_RDWR);
        workers.swap(client_threads_);
    }
    for (std::thread& worker : workers)
        worker.join();
}

void DaemonServer::accept_loop() {
    while (running_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR && running_.load())
                continue;
            break;
        }
        std::lock_guard lock(clients_mutex_);
        if (!running_.load()) {
            ::close(fd);
            break;
        }
        client_fds_.push_back(fd);
        client_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void DaemonServer::serve_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    bool open = true;
    while (open && running_.load()) {
        const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            break;
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while (open && (pos = buffer.find('\n')) != std::string::npos) {
            const std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (line.empty())
                continue;

            OrderedJson response;
            const Json request = Json::parse(line, nullptr, false);
            if (request.is_discarded() || !request.is_object()) {
                response = error_frame(nullptr, "tool_validation", "malformed frame");
            } else {
                const Json id = request.contains("id") ? request.at("id") : Json();
                const std::string op = request.value("op", "");
                const Json params =
                    request.contains("params") ? request.at("params") : Json::object();
                try {
                    auto submission = session_.submit(op, params);
                    const TaskResult outcome = submission.result.get();
                    if (outcome.ok)
                        response = OrderedJson{
                            {"id", OrderedJson(id)}, {"ok", true}, {"result", outcome.value}};
                    else
                        response = error_frame(id, outcome.error_code, outcome.error_message);
                } catch (const Error& e) {
                    response = error_frame(id, to_string(e.code()), e.what());
                }
            }
            open = send_all(fd, response.dump() + "\n");
        }
        if (buffer.size() > kMaxFrameBytes) {
            send_all(fd, error_frame(nullptr, "tool_validation", "frame too large").dump() + "\n");
            break;
        }
    }
    {
        std::lock_guard lock(clients_mutex_);
        client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd),
                          client_fds_.end());
    }
    ::close(fd);
}

DaemonClient::DaemonClient(const std::filesystem::path& socket_path) {
    const std::string path = socket_path.string();
    sockaddr_un addr;
    fill_addr(addr, path, Errc::daemon_unreachable);
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd_ < 0)
        raise(Errc::daemon_unreachable, "socket: " + std::string(std::strerror(errno)));
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        fd_ = -1;
        raise(Errc::daemon_unreachable, "no daemon at " + path);
    }
}

DaemonClient::~DaemonClient() {
    if (fd_ >= 0)
        ::close(fd_);
}

OrderedJson DaemonClient::request(const std::string& op, const Json& params) {
    const Json frame = Json{{"id", next_id_++}, {"op", op}, {"params", params}};
    if (!send_all(fd_, frame.dump() + "\n"))
        raise(Errc::daemon_unreachable, "daemon connection lost while sending");

    while (true) {
        const std::size_t pos = buffer_.find('\n');
        if (pos != std::string::npos) {
            const std::string line = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            OrderedJson response = OrderedJson::parse(line, nullptr, false);
            if (response.is_discarded())
                raise(Errc::daemon_unreachable, "malformed response frame");
            return response;
        }
        char chunk[4096];
        const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            raise(Errc::daemon_unreachable, "daemon connection closed");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

} // namespace brv
