// SPDX-License-Identifier: Apache-2.0

#include "brv/tree.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include "brv/errors.hpp"

namespace fs = std::filesystem;

namespace brv {

namespace {

constexpr std::string_view kSummaryFileName = "context.md";
constexpr std::string_view kUseSearchInstruction =
    "Knowledge base is indexed; call the search tool instead of browsing the tree.\n";

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> segments;
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t slash = path.find('/', start);
        if (slash == std::string_view::npos) {
            segments.emplace_back(path.substr(start));
            break;
        }
        segments.emplace_back(path.substr(start, slash - start));
        start = slash + 1;
    }
    return segments;
}

std::string slurp_file(const fs::path& p, bool& ok) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    ok = !in.bad();
    return ss.str();
}

SymbolKind dir_kind_for_level(std::size_t level) {
    switch (level) {
    case 0: return SymbolKind::Domain;
    case 1: return SymbolKind::Topic;
    default: return SymbolKind::Subtopic;
    }
}

/// RAII fd that closes but never unlinks; a simulated crash must leave
/// the temp file behind.
struct FdGuard {
    int fd = -1;
    ~FdGuard() {
        if (fd >= 0) ::close(fd);
    }
};

} // namespace

std::string_view to_string(SymbolKind kind) {
    switch (kind) {
    case SymbolKind::Domain: return "domain";
    case SymbolKind::Topic: return "topic";
    case SymbolKind::Subtopic: return "subtopic";
    case SymbolKind::Context: return "context";
    case SymbolKind::Summary: return "summary";
    }
    return "unknown";
}

ContextTreeStore::ContextTreeStore(fs::path root) : root_(std::move(root)) {}

std::filesystem::path ContextTreeStore::resolve(std::string_view rel_path) const {
    if (rel_path.empty() || rel_path.front() == '/' ||
        rel_path.find('\\') != std::string_view::npos) {
        raise(Errc::path_escapes_root, "path must be tree-relative: " + std::string(rel_path));
    }
    for (const auto& seg : split_path(rel_path)) {
        if (seg.empty() || seg == "." || seg == "..") {
            raise(Errc::path_escapes_root, "path escapes the tree root: " + std::string(rel_path));
        }
    }
    return root_ / fs::path(rel_path);
}

void ContextTreeStore::load() {
    if (!fs::is_directory(root_)) {
        raise(Errc::root_not_found, "context tree root not found: " + root_.string());
    }

    entries_.clear();
    node_by_path_.clear();
    content_hashes_.clear();
    references_ = {};
    load_issues_.clear();
    warnings_.clear();
    root_node_ = {};

    std::vector<std::string> summary_paths;

    for (auto it = fs::recursive_directory_iterator(root_); it != fs::recursive_directory_iterator();
         ++it) {
        const fs::directory_entry& dirent = *it;
        std::string name = dirent.path().filename().string();
        if (dirent.is_directory()) {
            // Don't descend below subtopic level or into hidden dirs.
            if (name.starts_with(".") || it.depth() + 1 >= 4) it.disable_recursion_pending();
            continue;
        }
        if (!dirent.is_regular_file()) continue;
        if (name.starts_with(".") || !name.ends_with(".md")) continue;

        std::string rel = fs::relative(dirent.path(), root_).generic_string();
        std::size_t segments = split_path(rel).size();
        if (name == kSummaryFileName) {
            if (segments >= 2 && segments <= 4) summary_paths.push_back(rel);
            continue;
        }
        if (!is_valid_entry_path(rel)) {
            warnings_.push_back("ignored file outside the entry layout: " + rel);
            continue;
        }

        bool ok = true;
        std::string bytes = slurp_file(dirent.path(), ok);
        if (!ok) {
            load_issues_.push_back({rel, "unreadable file"});
            continue;
        }
        try {
            KnowledgeEntry entry = parse_entry(bytes);
            entry.path = rel;
            content_hashes_[rel] = murmur3_128(bytes);
            entries_.emplace(rel, std::move(entry));
        } catch (const Error& e) {
            load_issues_.push_back({rel, e.what()});
        }
    }

    // Symbol tree: directories become Domain/Topic/Subtopic nodes, entry
    // files Context leaves, context.md files Summary leaves.
    auto place = [&](const std::string& rel, SymbolKind leaf_kind) {
        std::vector<std::string> segments = split_path(rel);
        SymbolNode* node = &root_node_;
        for (std::size_t i = 0; i + 1 < segments.size(); i++) {
            SymbolNode& child = node->children[segments[i]];
            child.kind = dir_kind_for_level(i);
            child.name = segments[i];
            node = &child;
        }
        SymbolNode& leaf = node->children[segments.back()];
        leaf.kind = leaf_kind;
        leaf.name = segments.back();
        leaf.entry_path = rel;
    };
    for (const auto& [path, entry] : entries_) place(path, SymbolKind::Context);
    for (const auto& path : summary_paths) place(path, SymbolKind::Summary);

    // Paths resolve to nodes through a flat map (constant-time lookups).
    std::function<void(const SymbolNode&, const std::string&)> index_nodes =
        [&](const SymbolNode& node, const std::string& prefix) {
            for (const auto& [seg, child] : node.children) {
                std::string path = prefix.empty() ? seg : prefix + "/" + seg;
                node_by_path_[path] = &child;
                index_nodes(child, path);
            }
        };
    index_nodes(root_node_, "");

    // Relation edges, both directions. Dangling targets stay in the maps
    // (the two sides must mirror each other) but are reported.
    std::vector<std::string> sorted_paths = entry_paths();
    for (const auto& path : sorted_paths) {
        const KnowledgeEntry& entry = entries_.at(path);
        auto& targets = references_.forward[path];
        for (const auto& ref : entry.relations) {
            targets.insert(ref.target);
            references_.backward[ref.target].insert(path);
            if (!entries_.count(ref.target)) {
                warnings_.push_back("dangling relation: " + path + " -> " + ref.target);
            }
        }
    }

    rebuild_fingerprint();
}

void ContextTreeStore::rebuild_fingerprint() {
    std::vector<std::string> paths = entry_paths();
    std::string acc;
    acc.reserve(paths.size() * 64);
    for (const auto& path : paths) {
        acc += path;
        acc += '\0';
        acc += content_hashes_.at(path).hex();
        acc += '\n';
    }
    fingerprint_ = TreeFingerprint{murmur3_128(acc)};
}

const SymbolNode* ContextTreeStore::lookup(std::string_view path) const {
    auto it = node_by_path_.find(std::string(path));
    return it == node_by_path_.end() ? nullptr : it->second;
}

const KnowledgeEntry* ContextTreeStore::find_entry(std::string_view path) const {
    auto it = entries_.find(std::string(path));
    return it == entries_.end() ? nullptr : &it->second;
}

KnowledgeEntry* ContextTreeStore::find_entry_mutable(std::string_view path) {
    auto it = entries_.find(std::string(path));
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> ContextTreeStore::entry_paths() const {
    std::vector<std::string> paths;
    paths.reserve(entries_.size());
    for (const auto& [path, entry] : entries_) paths.push_back(path);
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<std::string> ContextTreeStore::neighbors(std::string_view path, Direction direction,
                                                     int depth) const {
    std::string start(path);
    if (!entries_.count(start)) {
        raise(Errc::unknown_path, "no entry at " + start);
    }
    std::set<std::string> seen{start};
    std::set<std::string> result;
    std::deque<std::string> frontier{start};
    for (int hop = 0; hop < depth && !frontier.empty(); hop++) {
        std::deque<std::string> next;
        for (const auto& node : frontier) {
            auto expand = [&](const std::map<std::string, std::set<std::string>>& edges) {
                auto it = edges.find(node);
                if (it == edges.end()) return;
                for (const auto& peer : it->second) {
                    if (!entries_.count(peer) || !seen.insert(peer).second) continue;
                    result.insert(peer);
                    next.push_back(peer);
                }
            };
            if (direction != Direction::In) expand(references_.forward);
            if (direction != Direction::Out) expand(references_.backward);
        }
        frontier = std::move(next);
    }
    return {result.begin(), result.end()};
}

void ContextTreeStore::atomic_write(std::string_view rel_path, std::string_view content) {
    fs::path target = resolve(rel_path);
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) {
        raise(Errc::io_failure, "cannot create " + target.parent_path().string() + ": " + ec.message());
    }

    // Temp lives beside the target so the rename stays on one filesystem.
    // The leading dot and .tmp suffix keep load() from picking up remnants.
    fs::path temp = target.parent_path() /
                    ("." + target.filename().string() + "." + std::to_string(::getpid()) + "." +
                     std::to_string(temp_seq_++) + ".tmp");

    auto step = [&](WriteStep s) {
        if (write_hook_) write_hook_(s, target);
    };
    auto fail = [&](const char* what, const fs::path& temp_path) {
        int err = errno;
        ::unlink(temp_path.c_str());
        raise(Errc::io_failure,
              std::string(what) + " failed for " + temp_path.string() + ": " + std::strerror(err));
    };

    step(WriteStep::OpenTemp);
    FdGuard fd;
    fd.fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd.fd < 0) fail("open", temp);

    step(WriteStep::WriteTemp);
    std::size_t written = 0;
    while (written < content.size()) {
        ssize_t n = ::write(fd.fd, content.data() + written, content.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail("write", temp);
        }
        written += static_cast<std::size_t>(n);
    }

    step(WriteStep::SyncTemp);
    if (::fsync(fd.fd) != 0) fail("fsync", temp);

    step(WriteStep::CloseTemp);
    ::close(fd.fd);
    fd.fd = -1;

    step(WriteStep::Rename);
    if (::rename(temp.c_str(), target.c_str()) != 0) fail("rename", temp);

    // Persist the rename itself; best effort.
    int dirfd = ::open(target.parent_path().c_str(), O_RDONLY | O_DIRECTORY);
    if (dirfd >= 0) {
        ::fsync(dirfd);
        ::close(dirfd);
    }
}

bool ContextTreeStore::remove_file(std::string_view rel_path) {
    fs::path target = resolve(rel_path);
    std::error_code ec;
    bool removed = fs::remove(target, ec);
    if (ec) {
        raise(Errc::io_failure, "cannot remove " + target.string() + ": " + ec.message());
    }
    return removed;
}

std::vector<std::string> ContextTreeStore::remove_subtree(std::string_view rel_dir) {
    fs::path target = resolve(rel_dir);
    std::vector<std::string> removed;
    std::error_code ec;
    if (fs::is_directory(target, ec)) {
        for (const auto& dirent : fs::recursive_directory_iterator(target, ec)) {
            if (!dirent.is_regular_file()) continue;
            std::string name = dirent.path().filename().string();
            if (name.starts_with(".") || !name.ends_with(".md") || name == kSummaryFileName) continue;
            removed.push_back(fs::relative(dirent.path(), root_).generic_string());
        }
        std::sort(removed.begin(), removed.end());
        fs::remove_all(target, ec);
        if (ec) {
            raise(Errc::io_failure, "cannot remove " + target.string() + ": " + ec.message());
        }
    }
    return removed;
}

void ContextTreeStore::write_summary_for_dir(const std::string& rel_dir,
                                             std::vector<std::string>& written) {
    fs::path dir = root_ / fs::path(rel_dir);
    if (!fs::is_directory(dir)) return;

    std::vector<std::string> subdirs;
    std::vector<std::pair<std::string, std::string>> files; // name, title
    for (const auto& dirent : fs::directory_iterator(dir)) {
        std::string name = dirent.path().filename().string();
        if (name.starts_with(".")) continue;
        if (dirent.is_directory()) {
            subdirs.push_back(name);
            continue;
        }
        if (!name.ends_with(".md") || name == kSummaryFileName) continue;
        std::string rel = rel_dir + "/" + name;
        std::string title;
        if (const KnowledgeEntry* entry = find_entry(rel)) {
            title = entry->title;
        } else {
            bool ok = true;
            std::string bytes = slurp_file(dirent.path(), ok);
            if (ok) {
                try {
                    title = parse_entry(bytes).title;
                } catch (const Error&) {
                }
            }
        }
        files.emplace_back(name, title);
    }
    std::sort(subdirs.begin(), subdirs.end());
    std::sort(files.begin(), files.end());

    std::string body = "# " + split_path(rel_dir).back() + "\n\n";
    for (const auto& sub : subdirs) body += "- " + sub + "/\n";
    for (const auto& [name, title] : files) body += "- " + name + " — " + title + "\n";

    std::string rel_summary = rel_dir + "/" + std::string(kSummaryFileName);
    bool ok = true;
    std::string existing = slurp_file(dir / fs::path(kSummaryFileName), ok);
    if (ok && existing == body) return; // idempotent: skip untouched files

    atomic_write(rel_summary, body);
    written.push_back(rel_summary);

    // Keep the in-memory tree aware of the new summary leaf.
    std::vector<std::string> segments = split_path(rel_summary);
    SymbolNode* node = &root_node_;
    for (std::size_t i = 0; i + 1 < segments.size(); i++) {
        SymbolNode& child = node->children[segments[i]];
        if (child.name.empty()) {
            child.kind = dir_kind_for_level(i);
            child.name = segments[i];
        }
        node = &child;
    }
    SymbolNode& leaf = node->children[segments.back()];
    leaf.kind = SymbolKind::Summary;
    leaf.name = segments.back();
    leaf.entry_path = rel_summary;
    node_by_path_[rel_summary] = &leaf;
}

std::vector<std::string> ContextTreeStore::regenerate_summaries(
    const std::vector<std::string>& affected) {
    std::set<std::string> dirs;
    for (const auto& path : affected) {
        std::vector<std::string> segments = split_path(path);
        std::string prefix;
        for (std::size_t i = 0; i + 1 < segments.size(); i++) {
            prefix = prefix.empty() ? segments[i] : prefix + "/" + segments[i];
            dirs.insert(prefix);
        }
    }
    std::vector<std::string> written;
    for (const auto& dir : dirs) write_summary_for_dir(dir, written);
    return written;
}

std::string ContextTreeStore::render_tree_overview(std::size_t max_entries,
                                                   bool search_available) const {
    if (search_available) return std::string(kUseSearchInstruction);

    std::vector<std::string> lines;
    for (const auto& [domain, domain_node] : root_node_.children) {
        if (domain_node.kind != SymbolKind::Domain) continue;
        lines.push_back(domain + "/");
        for (const auto& [topic, topic_node] : domain_node.children) {
            if (topic_node.kind != SymbolKind::Topic) continue;
            lines.push_back(domain + "/" + topic + "/");
        }
    }
    std::sort(lines.begin(), lines.end());

    std::string out;
    std::size_t shown = std::min(lines.size(), max_entries);
    for (std::size_t i = 0; i < shown; i++) out += lines[i] + "\n";
    if (lines.size() > max_entries) {
        out += "... (" + std::to_string(lines.size() - max_entries) + " more)\n";
    }
    return out;
}

} // namespace brv
