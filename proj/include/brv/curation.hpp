// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "brv/adapter.hpp"
#include "brv/entry.hpp"
#include "brv/timeutil.hpp"
#include "brv/tree.hpp"

namespace brv {

enum class CurateOpType { Add, Update, Upsert, Merge, Delete };

std::string_view to_string(CurateOpType type);
std::optional<CurateOpType> curate_op_from_string(std::string_view s);

/// One atomic curation step. `content` carries the new entry text for
/// ADD/UPDATE/UPSERT: either a full file (frontmatter plus body) or bare
/// markdown, in which case the title is derived from the file name.
/// Lifecycle fields inside `content` are ignored; the engine owns them.
/// `source_path` is MERGE-only. `reason` is a required audit string.
struct CurateOperation {
    CurateOpType type = CurateOpType::Add;
    std::string path;
    std::string source_path;
    std::string content;
    std::string reason;
};

struct AppliedOp {
    CurateOpType type = CurateOpType::Add;
    std::string path;      // echoed as given, before .md normalization
    bool success = false;
    std::string message;   // failure cause, or detail on subtree deletes
};

struct CurateTally {
    int added = 0;
    int deleted = 0;
    int updated = 0;
    int merged = 0;
    int failed = 0;

    bool operator==(const CurateTally&) const = default;
};

/// Per-batch feedback: one applied[] element per operation, in request
/// order, plus the summary counts. to_json() emits the wire shape
/// {"applied": [{type, path, status[, message]}], "summary": {...}}
/// with exactly that key order.
struct CurateReport {
    std::vector<AppliedOp> applied;
    CurateTally summary;

    OrderedJson to_json() const;
};

/// Parses a wire-format operation array: [{"type", "path", "content"?,
/// "sourcePath"?, "reason"?}]. Throws Error{tool_validation} on anything
/// malformed.
std::vector<CurateOperation> parse_operations(const Json& ops);

/// Field-level merge of two parsed entries; no write, no lifecycle event.
/// Keeps the target's identity (path, title, preamble, unknown keys),
/// unions tags/keywords/relations target-first, concatenates section
/// bodies with a provenance separator naming the source, and combines
/// lifecycle as max importance / summed counters / earliest createdAt /
/// highest maturity tier. Both entries must have their `path` set.
KnowledgeEntry merge_entries(const KnowledgeEntry& target, const KnowledgeEntry& source);

/// Applies operation batches against one store. Failures are reported
/// in-band and never abort the batch; after a batch with at least one
/// success the store is reloaded, summaries are regenerated once, and the
/// after-batch hook (index rebuild) fires once.
class CurationEngine {
public:
    using Clock = std::function<UtcSeconds()>;

    explicit CurationEngine(ContextTreeStore& store, Adapter* adapter = nullptr,
                            Clock clock = {});

    CurateReport apply(const std::vector<CurateOperation>& ops);

    void set_after_batch(std::function<void()> hook) { after_batch_ = std::move(hook); }

private:
    AppliedOp apply_one(const CurateOperation& op, UtcSeconds now, CurateTally& tally,
                        std::set<std::string>& affected);
    AppliedOp do_upsertable(const CurateOperation& op, UtcSeconds now, CurateTally& tally,
                            std::set<std::string>& affected);
    AppliedOp do_merge(const CurateOperation& op, UtcSeconds now, CurateTally& tally,
                       std::set<std::string>& affected);
    AppliedOp do_delete(const CurateOperation& op, CurateTally& tally,
                        std::set<std::string>& affected);
    void rewrite_inbound_refs(const std::string& from, const std::string& to,
                              std::set<std::string>& affected);

    ContextTreeStore& store_;
    Adapter* adapter_;
    Clock clock_;
    std::function<void()> after_batch_;
};

// -------- source preprocessing --------

struct SourceFile {
    std::string path; // as given
    std::string text; // after line and length caps
};

inline constexpr std::size_t kMaxSourceFiles = 5;
inline constexpr std::size_t kMaxSourceChars = 40'000;
inline constexpr std::size_t kMaxCodeLines = 2'000;

/// Reads and bounds the files attached to a curate request. Relative
/// paths resolve against `base`. Throws Error{too_many_files,
/// file_not_found, binary_file_rejected}.
std::vector<SourceFile> preprocess_sources(const std::vector<std::string>& files,
                                           const std::filesystem::path& base);

// -------- pre-compaction --------

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Default token counter: whitespace-separated word count.
std::size_t count_whitespace_tokens(std::string_view text);

enum class CompressionLevel { None, L1, L2, L3 };

std::string_view to_string(CompressionLevel level);

struct CompressionResult {
    std::string text;
    CompressionLevel level = CompressionLevel::None;
};

/// Fits `text` under `max_tokens`: L1 adapter summarization, L2 a tighter
/// retry at 0.6x the budget, L3 a deterministic binary search for the
/// longest prefix within budget. L3 never fails and needs no adapter.
/// A zero budget yields empty text.
CompressionResult compress_to_budget(const std::string& text, std::size_t max_tokens,
                                     const TokenCounter& counter = {},
                                     Adapter* adapter = nullptr);

} // namespace brv
