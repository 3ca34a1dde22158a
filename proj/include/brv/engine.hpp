// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "brv/adapter.hpp"
#include "brv/curation.hpp"
#include "brv/http_adapter.hpp"
#include "brv/retrieval.hpp"
#include "brv/search.hpp"
#include "brv/tree.hpp"

namespace brv {

/// Everything a project instance needs, with working defaults. The
/// on-disk form is `<project>/.brv/config.json`; see CONFIG.md.
struct EngineConfig {
    std::filesystem::path project_root;
    std::filesystem::path tree_root;   // default <project>/.brv/context-tree
    std::filesystem::path socket_path; // default <project>/.brv/daemon.sock
    RetrievalConfig retrieval;
    QueryCache::Config cache;
    HttpAdapterConfig adapter; // empty base_url runs adapter-free

    static EngineConfig defaults(std::filesystem::path project_root);

    /// defaults() overlaid with `.brv/config.json` when present.
    /// Throws Error{invalid_config} on malformed JSON, unknown keys of
    /// the wrong type, or weights that do not sum to 1.
    static EngineConfig load(const std::filesystem::path& project_root);
};

/// Project root resolution for CLI and daemon: explicit flag, then the
/// BRV_PROJECT_ROOT environment variable, then the working directory.
std::filesystem::path resolve_project_root(const std::string& flag_value = {});

/// One project's full memory engine: store, index, cache, retrieval and
/// curation wired together. Queries may run concurrently; curate takes
/// the exclusive write turn (the daemon queue guarantees it).
class MemoryEngine {
public:
    explicit MemoryEngine(EngineConfig config, std::unique_ptr<Adapter> adapter = nullptr);

    /// Creates the tree root if missing, loads the store and builds the
    /// index. Must be called before the first query.
    void load();

    QueryOutcome query(const std::string& q);
    CurateReport curate(const std::vector<CurateOperation>& ops);
    SearchResult search(const std::string& q);

    /// { docs, fingerprint, cacheEntries, treeRoot, adapter }.
    OrderedJson status() const;

    ContextTreeStore& store() { return store_; }
    const SearchIndex& index() const { return index_; }
    const EngineConfig& config() const { return config_; }
    Adapter* adapter() { return adapter_.get(); }

private:
    void rebuild_index();

    EngineConfig config_;
    std::unique_ptr<Adapter> adapter_;
    ContextTreeStore store_;
    SearchIndex index_;
    QueryCache cache_;
    CurationEngine curation_;
    RetrievalEngine retrieval_;
};

} // namespace brv
