// SPDX-License-Identifier: Apache-2.0
#include "brv/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "brv/errors.hpp"
#include "brv/lifecycle.hpp"

namespace brv {

namespace {

constexpr int kSynthesisMaxOutputTokens = 512;
constexpr double kSynthesisTemperature = 0.2;

std::string ensure_md(std::string path) {
    while (!path.empty() && path.back() == '/') path.pop_back();
    if (!path.ends_with(".md")) path += ".md";
    return path;
}

std::string entry_stem(const std::string& normalized_path) {
    std::string name = normalized_path;
    if (auto slash = name.rfind('/'); slash != std::string::npos) name = name.substr(slash + 1);
    if (name.ends_with(".md")) name.resize(name.size() - 3);
    return name;
}

std::string slurp(const std::filesystem::path& path, bool& ok) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ok = in.good() || in.eof();
    return buf.str();
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

/// Builds the entry an ADD/UPDATE/UPSERT will write. Full files (leading
/// frontmatter fence) parse as-is; bare markdown gets a synthesized
/// title from the file name so canonical sections are still recognized.
KnowledgeEntry materialize_entry(const std::string& content, const std::string& path) {
    const bool full_file = content.starts_with("---\n") || content.starts_with("---\r\n");
    std::string text = full_file
                           ? content
                           : "---\ntitle: " + entry_stem(path) + "\n---\n" + content;
    KnowledgeEntry entry = parse_entry(text);
    if (entry.title.empty()) entry.title = entry_stem(path);
    entry.path = path;
    // Bare prose with no headings at all is meant as the narrative, not as
    // preamble bytes.
    if (!full_file && !entry.has_relations_section && !entry.has_raw_concept &&
        !entry.has_narrative && !entry.has_snippets && !blank(entry.preamble)) {
        entry.narrative = content;
        if (!entry.narrative.ends_with('\n')) entry.narrative += '\n';
        entry.has_narrative = true;
        entry.preamble = "\n";
    }
    return entry;
}

std::vector<std::string> union_keep_order(const std::vector<std::string>& first,
                                          const std::vector<std::string>& second) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto* list : {&first, &second})
        for (const auto& item : *list)
            if (seen.insert(item).second) out.push_back(item);
    return out;
}

std::string join_with_provenance(const std::string& target_body, const std::string& source_body,
                                 const std::string& source_path) {
    if (source_body.empty()) return target_body;
    std::string out = target_body;
    if (!out.empty() && !out.ends_with('\n')) out += '\n';
    out += "\n---\n*Merged from @" + source_path + "*\n\n";
    out += source_body;
    return out;
}

/// Regenerates the related: mirror and Relations body, but only when the
/// entry carries relations in some form; entries without any never grow
/// an empty section.
void sync_relation_mirrors(KnowledgeEntry& entry) {
    if (entry.relations.empty() && entry.related.empty() && !entry.has_relations_section) return;
    entry.refresh_relation_mirrors();
}

AppliedOp failure(const CurateOperation& op, std::string message, CurateTally& tally) {
    tally.failed++;
    return {op.type, op.path, false, std::move(message)};
}

AppliedOp ok(const CurateOperation& op, std::string message = {}) {
    return {op.type, op.path, true, std::move(message)};
}

bool hidden_component(const std::filesystem::path& rel) {
    for (const auto& part : rel) {
        std::string name = part.string();
        if (!name.empty() && name.front() == '.') return true;
    }
    return false;
}

} // namespace

std::string_view to_string(CurateOpType type) {
    switch (type) {
    case CurateOpType::Add: return "ADD";
    case CurateOpType::Update: return "UPDATE";
    case CurateOpType::Upsert: return "UPSERT";
    case CurateOpType::Merge: return "MERGE";
    case CurateOpType::Delete: return "DELETE";
    }
    return "ADD";
}

std::optional<CurateOpType> curate_op_from_string(std::string_view s) {
    std::string upper(s);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "ADD") return CurateOpType::Add;
    if (upper == "UPDATE") return CurateOpType::Update;
    if (upper == "UPSERT") return CurateOpType::Upsert;
    if (upper == "MERGE") return CurateOpType::Merge;
    if (upper == "DELETE") return CurateOpType::Delete;
    return std::nullopt;
}

OrderedJson CurateReport::to_json() const {
    OrderedJson applied_json = OrderedJson::array();
    for (const auto& op : applied) {
        OrderedJson item;
        item["type"] = std::string(to_string(op.type));
        item["path"] = op.path;
        item["status"] = op.success ? "success" : "failed";
        if (!op.message.empty()) item["message"] = op.message;
        applied_json.push_back(std::move(item));
    }
    OrderedJson summary_json;
    summary_json["added"] = summary.added;
    summary_json["deleted"] = summary.deleted;
    summary_json["updated"] = summary.updated;
    summary_json["merged"] = summary.merged;
    summary_json["failed"] = summary.failed;
    OrderedJson out;
    out["applied"] = std::move(applied_json);
    out["summary"] = std::move(summary_json);
    return out;
}

std::vector<CurateOperation> parse_operations(const Json& ops) {
    if (!ops.is_array()) raise(Errc::tool_validation, "operations must be a JSON array");
    std::vector<CurateOperation> out;
    out.reserve(ops.size());
    for (const auto& item : ops) {
        if (!item.is_object()) raise(Errc::tool_validation, "each operation must be an object");
        if (!item.contains("type") || !item["type"].is_string())
            raise(Errc::tool_validation, "operation is missing a string \"type\"");
        auto type = curate_op_from_string(item["type"].get<std::string>());
        if (!type)
            raise(Errc::tool_validation,
                  "unknown operation type: " + item["type"].get<std::string>());
        if (!item.contains("path") || !item["path"].is_string())
            raise(Errc::tool_validation, "operation is missing a string \"path\"");
        CurateOperation op;
        op.type = *type;
        op.path = item["path"].get<std::string>();
        for (const char* key : {"sourcePath", "source"}) {
            if (item.contains(key)) {
                if (!item[key].is_string())
                    raise(Errc::tool_validation, std::string(key) + " must be a string");
                op.source_path = item[key].get<std::string>();
            }
        }
        if (item.contains("content")) {
            if (!item["content"].is_string())
                raise(Errc::tool_validation, "content must be a string");
            op.content = item["content"].get<std::string>();
        }
        if (item.contains("reason")) {
            if (!item["reason"].is_string())
                raise(Errc::tool_validation, "reason must be a string");
            op.reason = item["reason"].get<std::string>();
        }
        out.push_back(std::move(op));
    }
    return out;
}

KnowledgeEntry merge_entries(const KnowledgeEntry& target, const KnowledgeEntry& source) {
    KnowledgeEntry out = target;

    out.tags = union_keep_order(target.tags, source.tags);
    out.keywords = union_keep_order(target.keywords, source.keywords);

    std::vector<RelationRef> relations;
    std::unordered_set<std::string> seen;
    for (const auto* side : {&target.relations, &source.relations}) {
        for (const auto& ref : *side) {
            if (ref.target == target.path || ref.target == source.path) continue;
            if (seen.insert(ref.target).second) relations.push_back(ref);
        }
    }
    out.relations = std::move(relations);
    out.has_relations_section =
        target.has_relations_section || source.has_relations_section || !out.relations.empty();

    out.raw_concept = join_with_provenance(target.raw_concept, source.raw_concept, source.path);
    out.narrative = join_with_provenance(target.narrative, source.narrative, source.path);
    out.snippets = join_with_provenance(target.snippets, source.snippets, source.path);
    out.has_raw_concept = target.has_raw_concept || source.has_raw_concept;
    out.has_narrative = target.has_narrative || source.has_narrative;
    out.has_snippets = target.has_snippets || source.has_snippets;

    const LifecycleState& a = target.lifecycle;
    const LifecycleState& b = source.lifecycle;
    out.lifecycle.importance = std::max(a.importance, b.importance);
    out.lifecycle.access_count = a.access_count + b.access_count;
    out.lifecycle.update_count = a.update_count + b.update_count;
    out.lifecycle.created_at = std::min(a.created_at, b.created_at);
    out.lifecycle.updated_at = std::max(a.updated_at, b.updated_at);
    out.lifecycle.last_touch = std::max(a.last_touch, b.last_touch);
    out.lifecycle.maturity = std::max(a.maturity, b.maturity);
    out.lifecycle.recency = a.updated_at >= b.updated_at ? a.recency : b.recency;
    return out;
}

CurationEngine::CurationEngine(ContextTreeStore& store, Adapter* adapter, Clock clock)
    : store_(store), adapter_(adapter), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return utc_now(); };
}

CurateReport CurationEngine::apply(const std::vector<CurateOperation>& ops) {
    CurateReport report;
    std::set<std::string> affected;
    const UtcSeconds now = clock_();
    for (const auto& op : ops)
        report.applied.push_back(apply_one(op, now, report.summary, affected));

    bool any_success = std::any_of(report.applied.begin(), report.applied.end(),
                                   [](const AppliedOp& a) { return a.success; });
    if (any_success) {
        store_.load();
        store_.regenerate_summaries({affected.begin(), affected.end()});
        if (after_batch_) after_batch_();
    }
    return report;
}

AppliedOp CurationEngine::apply_one(const CurateOperation& op, UtcSeconds now,
                                    CurateTally& tally, std::set<std::string>& affected) {
    if (blank(op.reason)) return failure(op, "Missing reason", tally);
    try {
        switch (op.type) {
        case CurateOpType::Add:
        case CurateOpType::Update:
        case CurateOpType::Upsert:
            return do_upsertable(op, now, tally, affected);
        case CurateOpType::Merge:
            return do_merge(op, now, tally, affected);
        case CurateOpType::Delete:
            return do_delete(op, tally, affected);
        }
        return failure(op, "Unknown operation", tally);
    } catch (const Error& e) {
        return failure(op, e.what(), tally);
    }
}

AppliedOp CurationEngine::do_upsertable(const CurateOperation& op, UtcSeconds now,
                                        CurateTally& tally, std::set<std::string>& affected) {
    const std::string path = ensure_md(op.path);
    if (!is_valid_entry_path(path)) return failure(op, "Invalid path: " + path, tally);

    const std::filesystem::path abs = store_.resolve(path);
    const bool exists = std::filesystem::exists(abs);
    if (op.type == CurateOpType::Add && exists)
        return failure(op, "File already exists", tally);
    if (op.type == CurateOpType::Update && !exists)
        return failure(op, "File not found", tally);

    KnowledgeEntry entry;
    try {
        entry = materialize_entry(op.content, path);
    } catch (const Error& e) {
        return failure(op, std::string("Invalid content: ") + e.what(), tally);
    }

    if (exists) {
        bool readable = true;
        const std::string bytes = slurp(abs, readable);
        if (!readable) return failure(op, "Existing entry is unreadable", tally);
        KnowledgeEntry old;
        try {
            old = parse_entry(bytes);
        } catch (const Error& e) {
            return failure(op, std::string("Existing entry failed to parse: ") + e.what(),
                           tally);
        }
        entry.lifecycle =
            akl::apply_event(old.lifecycle, {akl::EventKind::Update, now}, now);
        tally.updated++;
    } else {
        entry.lifecycle = akl::initial_state(now);
        tally.added++;
    }

    sync_relation_mirrors(entry);
    store_.atomic_write(path, serialize_entry(entry));
    affected.insert(path);
    return ok(op);
}

AppliedOp CurationEngine::do_merge(const CurateOperation& op, UtcSeconds now,
                                   CurateTally& tally, std::set<std::string>& affected) {
    if (blank(op.source_path)) return failure(op, "Missing source path", tally);
    const std::string target_path = ensure_md(op.path);
    const std::string source_path = ensure_md(op.source_path);
    if (!is_valid_entry_path(target_path))
        return failure(op, "Invalid path: " + target_path, tally);
    if (!is_valid_entry_path(source_path))
        return failure(op, "Invalid source path: " + source_path, tally);
    if (source_path == target_path)
        return failure(op, "Source and target are the same file", tally);

    const std::filesystem::path source_abs = store_.resolve(source_path);
    if (!std::filesystem::exists(source_abs))
        return failure(op, "Source file not found", tally);
    const std::filesystem::path target_abs = store_.resolve(target_path);
    if (!std::filesystem::exists(target_abs))
        return failure(op, "Target file not found", tally);

    bool readable = true;
    const std::string source_bytes = slurp(source_abs, readable);
    if (!readable) return failure(op, "Source entry is unreadable", tally);
    bool target_readable = true;
    const std::string target_bytes = slurp(target_abs, target_readable);
    if (!target_readable) return failure(op, "Target entry is unreadable", tally);

    KnowledgeEntry source;
    KnowledgeEntry target;
    try {
        source = parse_entry(source_bytes);
        source.path = source_path;
    } catch (const Error& e) {
        return failure(op, std::string("Source entry failed to parse: ") + e.what(), tally);
    }
    try {
        target = parse_entry(target_bytes);
        target.path = target_path;
    } catch (const Error& e) {
        return failure(op, std::string("Target entry failed to parse: ") + e.what(), tally);
    }

    KnowledgeEntry merged = merge_entries(target, source);
    if (adapter_ && !target.narrative.empty() && !source.narrative.empty()) {
        // Best effort: a configured model may fuse the narratives; any
        // failure keeps the deterministic concatenation.
        try {
            const std::string prompt =
                "Merge these two notes about the same concept into one narrative. "
                "Keep every distinct fact.\n\n## " + target.title + "\n" + target.narrative +
                "\n## " + source.title + "\n" + source.narrative;
            AdapterVerdict verdict =
                adapter_->complete({prompt, kSynthesisMaxOutputTokens, kSynthesisTemperature});
            if (verdict.kind == VerdictKind::Answer && !blank(verdict.text)) {
                merged.narrative = verdict.text;
                if (!merged.narrative.ends_with('\n')) merged.narrative += '\n';
            }
        } catch (const Error&) {
        }
    }

    merged.lifecycle = akl::apply_event(merged.lifecycle, {akl::EventKind::Update, now}, now);
    sync_relation_mirrors(merged);
    store_.atomic_write(target_path, serialize_entry(merged));
    rewrite_inbound_refs(source_path, target_path, affected);
    store_.remove_file(source_path);
    affected.insert(target_path);
    affected.insert(source_path);
    tally.merged++;
    return ok(op);
}

AppliedOp CurationEngine::do_delete(const CurateOperation& op, CurateTally& tally,
                                    std::set<std::string>& affected) {
    std::string raw = op.path;
    while (!raw.empty() && raw.back() == '/') raw.pop_back();
    if (raw.empty()) return failure(op, "Invalid path", tally);

    if (std::filesystem::is_directory(store_.resolve(raw))) {
        std::vector<std::string> removed = store_.remove_subtree(raw);
        std::sort(removed.begin(), removed.end());
        for (const auto& path : removed) affected.insert(path);
        affected.insert(raw + "/context.md");
        tally.deleted++;
        std::string detail = "removed " + std::to_string(removed.size()) + " entries";
        for (std::size_t i = 0; i < removed.size(); i++)
            detail += (i == 0 ? ": " : ", ") + removed[i];
        return ok(op, std::move(detail));
    }

    const std::string path = ensure_md(raw);
    if (!is_valid_entry_path(path)) return failure(op, "Invalid path: " + path, tally);
    if (!store_.remove_file(path)) return failure(op, "File not found", tally);
    affected.insert(path);
    tally.deleted++;
    return ok(op);
}

void CurationEngine::rewrite_inbound_refs(const std::string& from, const std::string& to,
                                          std::set<std::string>& affected) {
    namespace fs = std::filesystem;
    const fs::path root = store_.root();
    for (const auto& dirent : fs::recursive_directory_iterator(root)) {
        if (!dirent.is_regular_file()) continue;
        const fs::path rel_path = fs::relative(dirent.path(), root);
        if (hidden_component(rel_path)) continue;
        const std::string rel = rel_path.generic_string();
        if (!rel.ends_with(".md") || rel_path.filename() == "context.md") continue;
        if (rel == from || rel == to) continue;

        bool readable = true;
        const std::string bytes = slurp(dirent.path(), readable);
        if (!readable || bytes.find(from) == std::string::npos) continue;

        KnowledgeEntry entry;
        try {
            entry = parse_entry(bytes);
        } catch (const Error&) {
            continue;
        }

        std::vector<RelationRef> rewritten;
        std::unordered_set<std::string> seen;
        bool changed = false;
        for (const auto& ref : entry.relations) {
            std::string next = ref.target == from ? to : ref.target;
            if (next != ref.target) changed = true;
            if (seen.insert(next).second) rewritten.push_back({std::move(next)});
        }
        if (!changed) continue;

        entry.relations = std::move(rewritten);
        entry.refresh_relation_mirrors();
        store_.atomic_write(rel, serialize_entry(entry));
        affected.insert(rel);
    }
}

std::vector<SourceFile> preprocess_sources(const std::vector<std::string>& files,
                                           const std::filesystem::path& base) {
    if (files.size() > kMaxSourceFiles)
        raise(Errc::too_many_files, "curate accepts at most " +
                                        std::to_string(kMaxSourceFiles) + " source files, got " +
                                        std::to_string(files.size()));

    static const std::set<std::string> kCodeExtensions = {
        ".c",  ".cc",  ".cpp", ".cxx", ".h",   ".hh",    ".hpp", ".hxx", ".cs",
        ".go", ".java", ".js", ".jsx", ".kt",  ".lua",   ".m",   ".mm",  ".php",
        ".pl", ".py",  ".rb",  ".rs",  ".sh",  ".sql",   ".swift", ".ts", ".tsx"};

    std::vector<SourceFile> out;
    out.reserve(files.size());
    for (const auto& given : files) {
        std::filesystem::path path(given);
        if (path.is_relative()) path = base / path;

        bool readable = true;
        std::string text = slurp(path, readable);
        if (!readable) raise(Errc::file_not_found, "source file not found: " + given);

        const std::size_t probe = std::min<std::size_t>(text.size(), 8192);
        if (probe > 0 && std::memchr(text.data(), '\0', probe) != nullptr)
            raise(Errc::binary_file_rejected, "binary file rejected: " + given);

        std::string ext = path.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (kCodeExtensions.contains(ext)) {
            std::size_t lines = 0;
            std::size_t cut = text.size();
            for (std::size_t i = 0; i < text.size(); i++) {
                if (text[i] != '\n') continue;
                if (++lines == kMaxCodeLines) {
                    cut = i + 1;
                    break;
                }
            }
            text.resize(cut);
        }
        if (text.size() > kMaxSourceChars) text.resize(kMaxSourceChars);
        out.push_back({given, std::move(text)});
    }
    return out;
}

std::size_t count_whitespace_tokens(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            count++;
        }
    }
    return count;
}

std::string_view to_string(CompressionLevel level) {
    switch (level) {
    case CompressionLevel::None: return "none";
    case CompressionLevel::L1: return "L1";
    case CompressionLevel::L2: return "L2";
    case CompressionLevel::L3: return "L3";
    }
    return "none";
}

CompressionResult compress_to_budget(const std::string& text, std::size_t max_tokens,
                                     const TokenCounter& counter, Adapter* adapter) {
    const TokenCounter count = counter ? counter : TokenCounter(count_whitespace_tokens);
    if (max_tokens == 0) return {"", CompressionLevel::L3};
    if (count(text) <= max_tokens) return {text, CompressionLevel::None};

    if (adapter) {
        const int full = static_cast<int>(std::min<std::size_t>(max_tokens, 1 << 20));
        const std::string prompt =
            "Summarize the following content. Preserve every fact, identifier, and "
            "decision; drop filler.\n\n" + text;
        const int budgets[2] = {full, std::max(1, full * 3 / 5)};
        for (int pass = 0; pass < 2; pass++) {
            try {
                AdapterVerdict verdict =
                    adapter->complete({prompt, budgets[pass], kSynthesisTemperature});
                if (verdict.kind == VerdictKind::Answer && !verdict.text.empty() &&
                    count(verdict.text) <= max_tokens)
                    return {verdict.text,
                            pass == 0 ? CompressionLevel::L1 : CompressionLevel::L2};
            } catch (const Error&) {
                break; // adapter down: deterministic truncation below
            }
        }
    }

    // Longest prefix within budget. The full text is known to exceed it,
    // so the search space is [0, size - 1].
    std::string_view view(text);
    std::size_t lo = 0;
    std::size_t hi = text.size() - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (count(view.substr(0, mid)) <= max_tokens)
            lo = mid;
        else
            hi = mid - 1;
    }
    return {text.substr(0, lo), CompressionLevel::L3};
}

} // namespace brv
