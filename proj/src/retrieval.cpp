// SPDX-License-Identifier: Apache-2.0

#include "brv/retrieval.hpp"

#include <algorithm>
#include <chrono>

#include "brv/errors.hpp"
#include "brv/hash.hpp"
#include "brv/timeutil.hpp"

namespace brv {

OrderedJson QueryOutcome::to_json() const {
    return OrderedJson{{"answer", answer},
                       {"tier", tier},
                       {"sources", sources},
                       {"ood", ood},
                       {"latencyMs", latency_ms}};
}

std::string canonicalize_query(std::string_view query) {
    std::string out;
    out.reserve(query.size());
    bool pending_space = false;
    for (unsigned char c : query) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                           : static_cast<char>(c));
    }
    return out;
}

std::uint64_t query_hash(std::string_view canonical) {
    Hash128 h = murmur3_128(canonical);
    return h.hi ^ h.lo;
}

double jaccard_similarity(std::string_view a, std::string_view b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t intersection = 0;
    for (const auto& token : sa) intersection += sb.count(token);
    std::size_t unions = sa.size() + sb.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

QueryCache::QueryCache() : QueryCache(Config{}) {}

QueryCache::QueryCache(Config config) : config_(config) {}

std::optional<QueryOutcome> QueryCache::find_exact(std::string_view canonical,
                                                   const TreeFingerprint& fingerprint,
                                                   std::int64_t now) {
    if (config_.disabled) return std::nullopt;
    std::lock_guard lock(mutex_);
    auto it = by_hash_.find(query_hash(canonical));
    if (it == by_hash_.end()) return std::nullopt;
    auto node = it->second;
    // On a 64-bit key collision the slot belongs to a different query.
    if (node->query_text != canonical) return std::nullopt;
    if (expired(*node, now) || !(node->fingerprint == fingerprint)) {
        by_hash_.erase(it);
        recency_.erase(node);
        return std::nullopt;
    }
    recency_.splice(recency_.begin(), recency_, node);
    return node->answer;
}

std::optional<QueryOutcome> QueryCache::find_fuzzy(std::string_view canonical,
                                                   const TreeFingerprint& fingerprint,
                                                   std::int64_t now, double threshold) {
    if (config_.disabled) return std::nullopt;
    std::lock_guard lock(mutex_);
    auto best = recency_.end();
    double best_similarity = -1.0;
    std::size_t examined = 0;
    for (auto it = recency_.begin();
         it != recency_.end() && examined < config_.fuzzy_scan_limit;) {
        examined++;
        if (expired(*it, now) || !(it->fingerprint == fingerprint)) {
            by_hash_.erase(it->query_hash);
            it = recency_.erase(it);
            continue;
        }
        double similarity = jaccard_similarity(canonical, it->query_text);
        if (similarity > best_similarity) {
            best_similarity = similarity;
            best = it;
        }
        ++it;
    }
    if (best == recency_.end() || best_similarity < threshold) return std::nullopt;
    recency_.splice(recency_.begin(), recency_, best);
    return best->answer;
}

void QueryCache::insert(std::string_view canonical, const QueryOutcome& outcome,
                        const TreeFingerprint& fingerprint, std::int64_t now) {
    if (config_.disabled) return;
    std::lock_guard lock(mutex_);
    std::uint64_t hash = query_hash(canonical);
    auto it = by_hash_.find(hash);
    if (it != by_hash_.end()) {
        recency_.erase(it->second);
        by_hash_.erase(it);
    }
    recency_.push_front({hash, std::string(canonical), outcome, fingerprint, now});
    by_hash_[hash] = recency_.begin();
    while (recency_.size() > config_.capacity) {
        by_hash_.erase(recency_.back().query_hash);
        recency_.pop_back();
    }
}

std::size_t QueryCache::size() const {
    std::lock_guard lock(mutex_);
    return recency_.size();
}

void QueryCache::clear() {
    std::lock_guard lock(mutex_);
    recency_.clear();
    by_hash_.clear();
}

RetrievalEngine::RetrievalEngine(ContextTreeStore& store, SearchIndex& index, QueryCache& cache,
                                 Adapter* adapter, RetrievalConfig config)
    : store_(store), index_(index), cache_(cache), adapter_(adapter),
      config_(std::move(config)) {}

RetrievalEngine::~RetrievalEngine() { drain(); }

void RetrievalEngine::drain() {
    std::lock_guard lock(spawn_mutex_);
    for (auto& spawned : spawned_) {
        if (spawned.thread.joinable()) spawned.thread.join();
    }
    spawned_.clear();
}

std::future<SearchResult> RetrievalEngine::spawn_search(std::string canonical) {
    auto task = std::make_shared<std::packaged_task<SearchResult()>>(
        [this, canonical = std::move(canonical)] {
            return index_.search(canonical, config_.search_options);
        });
    auto future = task->get_future();
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::thread worker([task, done] {
        (*task)();
        done->store(true);
    });
    std::lock_guard lock(spawn_mutex_);
    for (auto it = spawned_.begin(); it != spawned_.end();) {
        if (it->done->load()) {
            if (it->thread.joinable()) it->thread.join();
            it = spawned_.erase(it);
        } else {
            ++it;
        }
    }
    spawned_.push_back({std::move(worker), std::move(done)});
    return future;
}

QueryOutcome RetrievalEngine::query(const std::string& q) {
    const auto started = std::chrono::steady_clock::now();
    const std::string canonical = canonicalize_query(q);
    if (canonical.empty()) raise(Errc::empty_query, "query is empty");

    const std::int64_t now = utc_now();
    const TreeFingerprint fingerprint = store_.fingerprint();

    auto finish = [&](QueryOutcome outcome) {
        outcome.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        return outcome;
    };

    if (auto hit = cache_.find_exact(canonical, fingerprint, now)) {
        QueryOutcome outcome = std::move(*hit);
        outcome.tier = 0;
        return finish(std::move(outcome));
    }

    // Search runs while the fuzzy scan happens; a tier-1 hit returns
    // without awaiting it.
    std::future<SearchResult> pending = spawn_search(canonical);

    if (auto hit = cache_.find_fuzzy(canonical, fingerprint, now, config_.thresholds.fuzzy)) {
        QueryOutcome outcome = std::move(*hit);
        outcome.tier = 1;
        // Record under the new phrasing so repetition lands in tier 0.
        cache_.insert(canonical, outcome, fingerprint, now);
        return finish(std::move(outcome));
    }

    SearchResult results = pending.get();

    SearchResult filtered;
    filtered.query_terms = std::move(results.query_terms);
    filtered.matched_query_terms = std::move(results.matched_query_terms);
    for (auto& hit : results.hits) {
        if (hit.normalized_score >= config_.thresholds.min_relevance) {
            filtered.hits.push_back(std::move(hit));
        }
    }

    bool unmatched_significant = false;
    for (const auto& term : significant_terms(canonical)) {
        if (!filtered.matched_query_terms.count(term)) {
            unmatched_significant = true;
            break;
        }
    }
    const double top = filtered.hits.empty() ? 0.0 : filtered.hits.front().normalized_score;

    if (filtered.hits.empty() || (unmatched_significant && top < config_.thresholds.ood)) {
        QueryOutcome outcome;
        outcome.answer = std::string(kOodAnswer);
        outcome.tier = 2;
        outcome.ood = true;
        return finish(std::move(outcome)); // rejections are never cached
    }

    const bool dominant =
        filtered.hits.size() < 2 ||
        top - filtered.hits[1].normalized_score >= config_.thresholds.gap;
    if (top >= config_.thresholds.high ||
        (top >= config_.thresholds.min_direct && dominant)) {
        QueryOutcome outcome = direct_response(filtered, now);
        cache_.insert(canonical, outcome, fingerprint, now);
        record_access(outcome.sources, now);
        return finish(std::move(outcome));
    }

    QueryOutcome outcome;
    bool cacheable = true;
    bool escalate = top < config_.thresholds.med;
    if (!escalate) outcome = one_shot(q, filtered, escalate);
    if (escalate) outcome = agentic(q, cacheable);

    if (cacheable) cache_.insert(canonical, outcome, fingerprint, now);
    record_access(outcome.sources, now);
    return finish(std::move(outcome));
}

QueryOutcome RetrievalEngine::direct_response(const SearchResult& filtered, std::int64_t now) {
    struct Ranked {
        const SearchHit* hit;
        const KnowledgeEntry* entry;
        double score;
    };
    std::lock_guard lock(access_mutex_); // lifecycle reads below
    std::vector<Ranked> ranked;
    ranked.reserve(filtered.hits.size());
    for (const auto& hit : filtered.hits) {
        const KnowledgeEntry* entry = store_.find_entry(hit.path);
        if (!entry) continue;
        const auto& state = entry->lifecycle;
        double recency_value =
            now >= state.updated_at ? akl::recency(state.updated_at, now) : 1.0;
        double score = akl::compound_score(hit.normalized_score, state.importance,
                                           recency_value, config_.weights);
        ranked.push_back({&hit, entry, score});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.hit->path < b.hit->path;
    });
    if (ranked.size() > config_.direct_answer_docs) ranked.resize(config_.direct_answer_docs);

    QueryOutcome outcome;
    outcome.tier = 2;
    for (const auto& item : ranked) {
        if (!outcome.answer.empty()) outcome.answer += "\n\n";
        outcome.answer +=
            "## " + item.entry->title + " [" + item.hit->path + "]\n" +
            make_document(*item.entry).content;
        outcome.sources.push_back(item.hit->path);
    }
    return outcome;
}

QueryOutcome RetrievalEngine::one_shot(const std::string& q, const SearchResult& filtered,
                                       bool& escalate) {
    if (!adapter_) {
        raise(Errc::adapter_unavailable, "tier 3 requires an adapter; none configured");
    }

    std::string prompt =
        "Answer the question using only the context below. If the context does not "
        "contain the answer, reply INSUFFICIENT_CONTEXT.\n\nQuestion: " +
        q + "\n\nContext:\n";
    std::vector<std::string> prefetched;
    {
        std::lock_guard lock(access_mutex_); // lifecycle read via serialize
        for (const auto& hit : filtered.hits) {
            if (prefetched.size() >= config_.prefetch_docs) break;
            const KnowledgeEntry* entry = store_.find_entry(hit.path);
            if (!entry) continue;
            prompt += "\n## " + hit.path + "\n" + serialize_entry(*entry);
            prefetched.push_back(hit.path);
        }
    }

    AdapterVerdict verdict;
    try {
        verdict = adapter_->complete({prompt, kDirectMaxOutputTokens, kDirectTemperature});
    } catch (const Error& e) {
        if (e.code() == Errc::adapter_timeout) {
            escalate = true;
            return {};
        }
        throw;
    }
    if (verdict.kind != VerdictKind::Answer) {
        // Insufficient context, or a tool request a single-shot call
        // cannot honor: the agentic tier takes over.
        escalate = true;
        return {};
    }

    QueryOutcome outcome;
    outcome.answer = verdict.text;
    outcome.tier = 3;
    outcome.sources = std::move(prefetched);
    return outcome;
}

QueryOutcome RetrievalEngine::agentic(const std::string& q, bool& cacheable) {
    if (!adapter_) {
        raise(Errc::adapter_unavailable, "tier 4 requires an adapter; none configured");
    }
    LoopResult loop = run_tool_loop(*adapter_, q, make_tool_bindings());

    QueryOutcome outcome;
    outcome.answer = loop.answer;
    outcome.tier = 4;
    std::set<std::string> seen;
    for (const auto& path : loop.read_paths) {
        if (seen.insert(path).second) outcome.sources.push_back(path);
    }
    // A capped loop produced a best-effort answer; never freeze it.
    cacheable = !loop.iteration_limit_hit;
    return outcome;
}

ToolBindings RetrievalEngine::make_tool_bindings() {
    ToolBindings tools;
    tools.search_knowledge = [this](const Json& args) -> Json {
        if (!args.is_object() || !args.contains("query") || !args["query"].is_string()) {
            raise(Errc::tool_validation, "search_knowledge needs {\"query\": string}");
        }
        SearchResult result =
            index_.search(args["query"].get<std::string>(), config_.search_options);
        Json hits = Json::array();
        for (const auto& hit : result.hits) {
            hits.push_back({{"path", hit.path}, {"score", hit.normalized_score}});
        }
        return Json{{"hits", hits}};
    };
    tools.read_entry = [this](const Json& args) -> Json {
        if (!args.is_object() || !args.contains("path") || !args["path"].is_string()) {
            raise(Errc::tool_validation, "read_entry needs {\"path\": string}");
        }
        const std::string path = args["path"].get<std::string>();
        std::lock_guard lock(access_mutex_); // lifecycle read via serialize
        const KnowledgeEntry* entry = store_.find_entry(path);
        if (!entry) raise(Errc::unknown_path, "no entry at " + path);
        return Json{{"path", path}, {"content", serialize_entry(*entry)}};
    };
    tools.list_tree = [this](const Json&) -> Json {
        return Json{{"tree", store_.render_tree_overview()}};
    };
    tools.curate = curate_tool_;
    return tools;
}

void RetrievalEngine::record_access(const std::vector<std::string>& sources,
                                    std::int64_t now) {
    std::lock_guard lock(access_mutex_);
    for (const auto& path : sources) {
        KnowledgeEntry* entry = store_.find_entry_mutable(path);
        if (!entry) continue;
        try {
            entry->lifecycle =
                akl::apply_event(entry->lifecycle, {akl::EventKind::Access, now}, now);
        } catch (const Error&) {
            // An entry stamped ahead of the wall clock keeps its state;
            // retrieval must not fail over one bad timestamp.
        }
    }
}

} // namespace brv
