// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "brv/entry.hpp"
#include "brv/hash.hpp"

namespace brv {

/// Node kinds along a root-to-leaf path. Values are ordered; kind is
/// strictly increasing from root to leaf.
enum class SymbolKind { Domain = 1, Topic = 2, Subtopic = 3, Context = 4, Summary = 5 };

std::string_view to_string(SymbolKind kind);

struct SymbolNode {
    SymbolKind kind = SymbolKind::Domain;
    std::string name;                         // path segment
    std::map<std::string, SymbolNode> children; // sorted for deterministic walks
    std::string entry_path;                   // set iff kind is Context or Summary

    bool is_leaf() const { return children.empty(); }
};

/// Bidirectional relation maps. Targets may be dangling (referenced but
/// not present); the maps stay mutually consistent regardless.
struct ReferenceIndex {
    std::map<std::string, std::set<std::string>> forward;
    std::map<std::string, std::set<std::string>> backward;
};

struct TreeFingerprint {
    Hash128 digest;
    bool operator==(const TreeFingerprint&) const = default;
};

/// A file that failed to parse during load. The file is skipped; load
/// continues.
struct LoadIssue {
    std::string path;
    std::string message;
};

enum class Direction { Out, In, Both };

/// Steps of one atomic write, in execution order. The test hook fires
/// before each step; throwing from it simulates a crash at that point.
enum class WriteStep { OpenTemp, WriteTemp, SyncTemp, CloseTemp, Rename };

using WriteStepHook = std::function<void(WriteStep, const std::filesystem::path& target)>;

/// On-disk context tree: markdown entries under
/// `<root>/<domain>/<topic>[/<subtopic>]/<entry>.md` plus generated
/// `context.md` summaries. One writer at a time; reads are lock-free
/// against the loaded snapshot.
class ContextTreeStore {
public:
    explicit ContextTreeStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Scans the root and rebuilds every in-memory structure.
    /// Throws Error{root_not_found}. Per-file parse failures are
    /// collected in load_issues(), not thrown.
    void load();

    const SymbolNode& root_node() const { return root_node_; }
    const SymbolNode* lookup(std::string_view path) const;
    const KnowledgeEntry* find_entry(std::string_view path) const;
    /// Mutable access for in-memory lifecycle updates (retrieval access
    /// events). Never triggers a rewrite of the file.
    KnowledgeEntry* find_entry_mutable(std::string_view path);

    std::size_t entry_count() const { return entries_.size(); }
    /// Sorted entry paths (Context kind only).
    std::vector<std::string> entry_paths() const;

    const ReferenceIndex& references() const { return references_; }

    /// BFS over relation edges up to `depth` hops, restricted to entries
    /// that exist; excludes the start; lexicographically sorted.
    /// Throws Error{unknown_path}.
    std::vector<std::string> neighbors(std::string_view path, Direction direction,
                                       int depth) const;

    /// Crash-safe write: temp file in the target's directory, fsync,
    /// rename. Parent directories are created as needed.
    /// Throws Error{path_escapes_root, io_failure}.
    void atomic_write(std::string_view rel_path, std::string_view content);

    /// Removes one entry file. Missing file is not an error (returns
    /// false). Throws Error{path_escapes_root}.
    bool remove_file(std::string_view rel_path);

    /// Recursively removes a directory subtree. Returns the removed
    /// entry file paths. Throws Error{path_escapes_root}.
    std::vector<std::string> remove_subtree(std::string_view rel_dir);

    /// Rewrites `context.md` for every directory on the path of each
    /// affected entry. Unchanged files are skipped. Returns the paths
    /// (tree-relative) actually written.
    std::vector<std::string> regenerate_summaries(const std::vector<std::string>& affected);

    /// Domain/topic listing for agent prompts. With `search_available`
    /// returns a one-line instruction to use the search tool instead.
    std::string render_tree_overview(std::size_t max_entries = 200,
                                     bool search_available = false) const;

    TreeFingerprint fingerprint() const { return fingerprint_; }

    const std::vector<LoadIssue>& load_issues() const { return load_issues_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Test seam: fires before every step of every atomic write.
    void set_write_step_hook(WriteStepHook hook) { write_hook_ = std::move(hook); }

    /// Resolves a tree-relative path against the root, rejecting
    /// absolute paths and `..` segments. Throws Error{path_escapes_root}.
    std::filesystem::path resolve(std::string_view rel_path) const;

private:
    void index_entry_node(const std::string& path);
    void write_summary_for_dir(const std::string& rel_dir, std::vector<std::string>& written);
    void rebuild_fingerprint();

    std::filesystem::path root_;
    SymbolNode root_node_; // kind unused on the root itself
    std::unordered_map<std::string, KnowledgeEntry> entries_;
    std::unordered_map<std::string, const SymbolNode*> node_by_path_;
    std::unordered_map<std::string, Hash128> content_hashes_;
    ReferenceIndex references_;
    TreeFingerprint fingerprint_;
    std::vector<LoadIssue> load_issues_;
    std::vector<std::string> warnings_;
    WriteStepHook write_hook_;
    unsigned long temp_seq_ = 0;
};

} // namespace brv
