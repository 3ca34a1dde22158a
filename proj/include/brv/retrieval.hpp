// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "brv/adapter.hpp"
#include "brv/lifecycle.hpp"
#include "brv/search.hpp"
#include "brv/tree.hpp"

namespace brv {

/// Escalation thresholds for the tiered pipeline. All operate on
/// normalized scores in [0, 1).
struct TierThresholds {
    double fuzzy = 0.6;        // tier-1 Jaccard floor
    double high = 0.93;        // tier-2 fires unconditionally
    double min_direct = 0.85;  // tier-2 fires with a dominant gap
    double gap = 0.08;         // top minus runner-up
    double med = 0.6;          // tier-3 gate
    double ood = 0.85;         // OOD score ceiling (unmatched-term branch)
    double min_relevance = 0.6; // hits below are dropped before any gate
};

struct QueryOutcome {
    std::string answer;
    int tier = 0; // 0 exact cache, 1 fuzzy cache, 2 direct, 3 one-shot LLM, 4 agentic
    std::vector<std::string> sources; // entry paths the answer is based on
    bool ood = false;
    std::int64_t latency_ms = 0;

    /// Wire shape: { answer, tier, sources, ood, latencyMs }, in that order.
    OrderedJson to_json() const;
};

/// Lowercased, trimmed, inner whitespace collapsed to single spaces.
std::string canonicalize_query(std::string_view query);

/// Cache key of a canonicalized query.
std::uint64_t query_hash(std::string_view canonical);

/// Jaccard similarity of the two queries' word-token sets.
double jaccard_similarity(std::string_view a, std::string_view b);

struct CacheEntry {
    std::uint64_t query_hash = 0;
    std::string query_text; // canonical form
    QueryOutcome answer;
    TreeFingerprint fingerprint; // tree state the answer was computed on
    std::int64_t created_at = 0; // unix seconds, for TTL expiry
};

/// Answer cache with fingerprint invalidation. A cached answer is served
/// only while the tree fingerprint still matches; stale entries found
/// during lookup are evicted. Internally synchronized.
class QueryCache {
public:
    struct Config {
        std::size_t capacity = 4096;
        std::int64_t ttl_seconds = 0; // 0 keeps entries until invalidation
        bool disabled = false;        // benchmark-faithful mode: no caching at all
        std::size_t fuzzy_scan_limit = 1000; // most-recent entries examined by tier 1
    };

    QueryCache();
    explicit QueryCache(Config config);

    std::optional<QueryOutcome> find_exact(std::string_view canonical,
                                           const TreeFingerprint& fingerprint,
                                           std::int64_t now);

    /// Best candidate by Jaccard over cached queries, served iff the
    /// similarity reaches `threshold` and the fingerprint is current.
    std::optional<QueryOutcome> find_fuzzy(std::string_view canonical,
                                           const TreeFingerprint& fingerprint,
                                           std::int64_t now, double threshold);

    void insert(std::string_view canonical, const QueryOutcome& outcome,
                const TreeFingerprint& fingerprint, std::int64_t now);

    std::size_t size() const;
    void clear();

private:
    bool expired(const CacheEntry& entry, std::int64_t now) const {
        return config_.ttl_seconds > 0 && now - entry.created_at >= config_.ttl_seconds;
    }

    Config config_;
    mutable std::mutex mutex_;
    std::list<CacheEntry> recency_; // front is most recently used
    std::unordered_map<std::uint64_t, std::list<CacheEntry>::iterator> by_hash_;
};

struct RetrievalConfig {
    TierThresholds thresholds;
    akl::ScoreWeights weights;     // compound ordering of direct-response content
    SearchOptions search_options;
    std::size_t direct_answer_docs = 3; // documents included in a tier-2 answer
    std::size_t prefetch_docs = 5;      // documents prefetched for tier 3
};

/// The tiered query pipeline over one project's tree, index and cache.
/// Queries may run concurrently with each other but never with a curate
/// mutation (the daemon queue serializes those).
class RetrievalEngine {
public:
    /// `adapter` may be null: tiers 0-2 and OOD still work; tiers 3-4
    /// raise Error{adapter_unavailable}.
    RetrievalEngine(ContextTreeStore& store, SearchIndex& index, QueryCache& cache,
                    Adapter* adapter = nullptr, RetrievalConfig config = {});

    /// Joins any search still in flight from an early tier-1 return.
    ~RetrievalEngine();

    RetrievalEngine(const RetrievalEngine&) = delete;
    RetrievalEngine& operator=(const RetrievalEngine&) = delete;

    /// Resolves `q` through tiers 0 -> 1 -> OOD gate -> 2 -> 3 -> 4 and
    /// returns the first satisfied tier's outcome. Successful non-OOD
    /// outcomes are cached under the current fingerprint; source entries
    /// receive in-memory access events.
    /// Throws Error{empty_query, adapter_unavailable}.
    QueryOutcome query(const std::string& q);

    /// Makes the curate tool available inside tier-4 loops. Unset by
    /// default (the loop reports it unavailable).
    void set_curate_tool(std::function<Json(const Json&)> tool) {
        curate_tool_ = std::move(tool);
    }

    /// Joins every search still in flight. Callers must drain before
    /// mutating the store or rebuilding the index those searches read.
    void drain();

    const RetrievalConfig& config() const { return config_; }

private:
    QueryOutcome direct_response(const SearchResult& filtered, std::int64_t now);
    QueryOutcome one_shot(const std::string& q, const SearchResult& filtered,
                          bool& escalate);
    QueryOutcome agentic(const std::string& q, bool& cacheable);
    ToolBindings make_tool_bindings();
    void record_access(const std::vector<std::string>& sources, std::int64_t now);
    std::future<SearchResult> spawn_search(std::string canonical);

    ContextTreeStore& store_;
    SearchIndex& index_;
    QueryCache& cache_;
    Adapter* adapter_;
    RetrievalConfig config_;
    std::function<Json(const Json&)> curate_tool_;

    // Guards in-memory lifecycle state: access events from concurrent
    // queries write it, ranking and prompt assembly read it. Curates
    // never overlap queries (daemon queue).
    std::mutex access_mutex_;

    // Searches spawned on a tier-0 miss keep running when tier 1 answers
    // first; they are joined lazily and at destruction.
    struct SpawnedSearch {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::mutex spawn_mutex_;
    std::vector<SpawnedSearch> spawned_;
};

inline constexpr std::string_view kOodAnswer =
    "This query appears outside the scope of stored knowledge.";

} // namespace brv
