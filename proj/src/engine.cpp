// SPDX-License-Identifier: Apache-2.0
#include "brv/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "brv/errors.hpp"

namespace brv {

namespace {

[[noreturn]] void bad_config(const std::string& what) {
    raise(Errc::invalid_config, "config: " + what);
}

double as_number(const Json& section, const std::string& key) {
    const Json& value = section.at(key);
    if (!value.is_number()) bad_config(key + " must be a number");
    return value.get<double>();
}

double as_unit_interval(const Json& section, const std::string& key) {
    double v = as_number(section, key);
    if (v < 0.0 || v > 1.0) bad_config(key + " must be within [0, 1]");
    return v;
}

std::int64_t as_integer(const Json& section, const std::string& key) {
    const Json& value = section.at(key);
    if (!value.is_number_integer()) bad_config(key + " must be an integer");
    return value.get<std::int64_t>();
}

std::size_t as_count(const Json& section, const std::string& key) {
    std::int64_t v = as_integer(section, key);
    if (v < 0) bad_config(key + " must not be negative");
    return static_cast<std::size_t>(v);
}

bool as_bool(const Json& section, const std::string& key) {
    const Json& value = section.at(key);
    if (!value.is_boolean()) bad_config(key + " must be a boolean");
    return value.get<bool>();
}

std::string as_string(const Json& section, const std::string& key) {
    const Json& value = section.at(key);
    if (!value.is_string()) bad_config(key + " must be a string");
    return value.get<std::string>();
}

const Json& as_section(const Json& root, const std::string& key) {
    const Json& value = root.at(key);
    if (!value.is_object()) bad_config(key + " must be an object");
    return value;
}

/// Rejects unknown keys so config typos fail loudly instead of being
/// silently ignored.
void check_keys(const Json& section, const std::string& name,
                std::initializer_list<const char*> known) {
    for (const auto& [key, value] : section.items()) {
        (void)value;
        bool found = false;
        for (const char* k : known)
            if (key == k) found = true;
        if (!found) bad_config("unknown key \"" + key + "\" in " + name);
    }
}

std::filesystem::path resolve_against(const std::filesystem::path& base,
                                      const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

} // namespace

EngineConfig EngineConfig::defaults(std::filesystem::path project_root) {
    EngineConfig cfg;
    cfg.project_root = std::move(project_root);
    cfg.tree_root = cfg.project_root / ".brv" / "context-tree";
    cfg.socket_path = cfg.project_root / ".brv" / "daemon.sock";
    return cfg;
}

EngineConfig EngineConfig::load(const std::filesystem::path& project_root) {
    EngineConfig cfg = defaults(project_root);
    const std::filesystem::path file = project_root / ".brv" / "config.json";
    std::ifstream in(file, std::ios::binary);
    if (!in) return cfg;

    Json root;
    try {
        root = Json::parse(std::string(std::istreambuf_iterator<char>(in), {}));
    } catch (const Json::parse_error& e) {
        bad_config(std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) bad_config("top level must be an object");
    check_keys(root, "config", {"treeRoot", "socketPath", "weights", "thresholds",
                                "search", "retrieval", "cache", "adapter"});

    if (root.contains("treeRoot"))
        cfg.tree_root = resolve_against(project_root, as_string(root, "treeRoot"));
    if (root.contains("socketPath"))
        cfg.socket_path = resolve_against(project_root, as_string(root, "socketPath"));

    if (root.contains("weights")) {
        const Json& w = as_section(root, "weights");
        check_keys(w, "weights", {"relevance", "importance", "recency"});
        auto& weights = cfg.retrieval.weights;
        if (w.contains("relevance")) weights.relevance = as_unit_interval(w, "relevance");
        if (w.contains("importance")) weights.importance = as_unit_interval(w, "importance");
        if (w.contains("recency")) weights.recency = as_unit_interval(w, "recency");
        if (std::abs(weights.relevance + weights.importance + weights.recency - 1.0) > 1e-9)
            bad_config("weights must sum to 1");
    }

    if (root.contains("thresholds")) {
        const Json& t = as_section(root, "thresholds");
        check_keys(t, "thresholds",
                   {"fuzzy", "high", "minDirect", "gap", "med", "ood", "minRelevance"});
        auto& th = cfg.retrieval.thresholds;
        if (t.contains("fuzzy")) th.fuzzy = as_unit_interval(t, "fuzzy");
        if (t.contains("high")) th.high = as_unit_interval(t, "high");
        if (t.contains("minDirect")) th.min_direct = as_unit_interval(t, "minDirect");
        if (t.contains("gap")) th.gap = as_unit_interval(t, "gap");
        if (t.contains("med")) th.med = as_unit_interval(t, "med");
        if (t.contains("ood")) th.ood = as_unit_interval(t, "ood");
        if (t.contains("minRelevance")) th.min_relevance = as_unit_interval(t, "minRelevance");
    }

    if (root.contains("search")) {
        const Json& s = as_section(root, "search");
        check_keys(s, "search", {"prefix", "fuzzy", "maxResults"});
        auto& opts = cfg.retrieval.search_options;
        if (s.contains("prefix")) opts.prefix = as_bool(s, "prefix");
        if (s.contains("fuzzy")) opts.fuzzy = as_bool(s, "fuzzy");
        if (s.contains("maxResults")) opts.max_results = as_count(s, "maxResults");
    }

    if (root.contains("retrieval")) {
        const Json& r = as_section(root, "retrieval");
        check_keys(r, "retrieval", {"directAnswerDocs", "prefetchDocs"});
        if (r.contains("directAnswerDocs"))
            cfg.retrieval.direct_answer_docs = as_count(r, "directAnswerDocs");
        if (r.contains("prefetchDocs"))
            cfg.retrieval.prefetch_docs = as_count(r, "prefetchDocs");
    }

    if (root.contains("cache")) {
        const Json& c = as_section(root, "cache");
        check_keys(c, "cache", {"capacity", "ttlSeconds", "disabled", "fuzzyScanLimit"});
        if (c.contains("capacity")) cfg.cache.capacity = as_count(c, "capacity");
        if (c.contains("ttlSeconds")) cfg.cache.ttl_seconds = as_integer(c, "ttlSeconds");
        if (c.contains("disabled")) cfg.cache.disabled = as_bool(c, "disabled");
        if (c.contains("fuzzyScanLimit"))
            cfg.cache.fuzzy_scan_limit = as_count(c, "fuzzyScanLimit");
    }

    if (root.contains("adapter")) {
        const Json& a = as_section(root, "adapter");
        check_keys(a, "adapter",
                   {"baseUrl", "model", "apiKey", "completeTimeoutS", "loopTurnTimeoutS"});
        if (a.contains("baseUrl")) cfg.adapter.base_url = as_string(a, "baseUrl");
        if (a.contains("model")) cfg.adapter.model = as_string(a, "model");
        if (a.contains("apiKey")) cfg.adapter.api_key = as_string(a, "apiKey");
        if (a.contains("completeTimeoutS"))
            cfg.adapter.complete_timeout_s = static_cast<int>(as_integer(a, "completeTimeoutS"));
        if (a.contains("loopTurnTimeoutS"))
            cfg.adapter.loop_turn_timeout_s =
                static_cast<int>(as_integer(a, "loopTurnTimeoutS"));
    }
    return cfg;
}

namespace {

std::filesystem::path tidy_root(const std::filesystem::path& p) {
    std::filesystem::path out = std::filesystem::absolute(p).lexically_normal();
    if (out.filename().empty() && out.has_parent_path())
        out = out.parent_path(); // drop the trailing slash "." normalization leaves
    return out;
}

} // namespace

std::filesystem::path resolve_project_root(const std::string& flag_value) {
    if (!flag_value.empty()) return tidy_root(flag_value);
    if (const char* env = std::getenv("BRV_PROJECT_ROOT"); env != nullptr && *env != '\0')
        return tidy_root(env);
    return std::filesystem::current_path();
}

MemoryEngine::MemoryEngine(EngineConfig config, std::unique_ptr<Adapter> adapter)
    : config_(std::move(config)),
      adapter_(std::move(adapter)),
      store_(config_.tree_root),
      cache_(config_.cache),
      curation_(store_, adapter_.get()),
      retrieval_(store_, index_, cache_, adapter_.get(), config_.retrieval) {
    curation_.set_after_batch([this] { rebuild_index(); });
    retrieval_.set_curate_tool([this](const Json& args) -> Json {
        if (!args.is_object() || !args.contains("operations"))
            raise(Errc::tool_validation, "curate expects {\"operations\": [...]}");
        std::vector<CurateOperation> ops = parse_operations(args.at("operations"));
        retrieval_.drain();
        return Json(curation_.apply(ops).to_json());
    });
}

void MemoryEngine::load() {
    std::filesystem::create_directories(config_.tree_root);
    store_.load();
    rebuild_index();
}

QueryOutcome MemoryEngine::query(const std::string& q) { return retrieval_.query(q); }

CurateReport MemoryEngine::curate(const std::vector<CurateOperation>& ops) {
    retrieval_.drain();
    return curation_.apply(ops);
}

SearchResult MemoryEngine::search(const std::string& q) {
    return index_.search(q, config_.retrieval.search_options);
}

OrderedJson MemoryEngine::status() const {
    OrderedJson out;
    out["docs"] = store_.entry_count();
    out["fingerprint"] = store_.fingerprint().digest.hex();
    out["cacheEntries"] = cache_.size();
    out["treeRoot"] = config_.tree_root.string();
    out["adapter"] = adapter_ != nullptr;
    return out;
}

void MemoryEngine::rebuild_index() {
    std::vector<IndexableDoc> docs;
    docs.reserve(store_.entry_count());
    for (const auto& path : store_.entry_paths())
        docs.push_back(make_document(*store_.find_entry(path)));
    index_ = SearchIndex::build(std::move(docs));
}

} // namespace brv
