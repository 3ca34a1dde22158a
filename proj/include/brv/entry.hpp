// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brv/timeutil.hpp"

namespace brv {

enum class Maturity { Draft, Validated, Core };

std::string_view to_string(Maturity m);
std::optional<Maturity> maturity_from_string(std::string_view s);

/// Lifecycle metadata carried in every entry's frontmatter.
struct LifecycleState {
    double importance = 50.0; // in [0, 100]
    Maturity maturity = Maturity::Draft;
    double recency = 1.0; // derived cache of exp(-days_since_update / 30)
    std::int64_t access_count = 0;
    std::int64_t update_count = 0;
    UtcSeconds created_at = 0;
    UtcSeconds updated_at = 0;
    // In-memory anchor for lazy decay; starts at updated_at after a load
    // and advances with every applied event. Not serialized.
    UtcSeconds last_touch = 0;
};

/// One `@domain/topic/file.md` edge declared in the Relations section.
struct RelationRef {
    std::string target;
    bool operator==(const RelationRef&) const = default;
};

/// Unknown frontmatter key kept verbatim (the full line, or the key line
/// plus its indented block-list lines) so files round-trip.
struct FrontmatterExtra {
    std::string raw;
    bool operator==(const FrontmatterExtra&) const = default;
};

/// One markdown knowledge entry. Section bodies are stored verbatim,
/// byte-for-byte as they appeared between headings.
struct KnowledgeEntry {
    std::string path; // tree-relative; assigned by the store, not the parser
    std::string title;
    std::vector<std::string> tags;
    std::vector<std::string> keywords;
    // Frontmatter `related:` mirror. Parsed as-is; the curation write path
    // regenerates it from `relations` before persisting.
    std::vector<std::string> related;
    std::vector<RelationRef> relations; // parsed from ## Relations, deduplicated
    LifecycleState lifecycle;

    std::string preamble; // bytes between the closing --- and the first section
    std::string relations_body;
    std::string raw_concept;
    std::string narrative;
    std::string snippets;
    bool has_relations_section = false;
    bool has_raw_concept = false;
    bool has_narrative = false;
    bool has_snippets = false;

    std::vector<FrontmatterExtra> extra_frontmatter;
    std::vector<std::string> parse_warnings; // not part of entry identity

    /// Regenerates the frontmatter `related:` mirror and the Relations
    /// section body from the relations list. Called on curation writes.
    void refresh_relation_mirrors();
};

/// Parses one on-disk entry file.
/// Throws Error{malformed_frontmatter | invalid_timestamp |
/// importance_out_of_range}.
KnowledgeEntry parse_entry(std::string_view content);

/// Inverse of parse_entry. Canonical files (see FORMAT.md) reproduce
/// byte-identically.
std::string serialize_entry(const KnowledgeEntry& entry);

/// Re-derives the relation list from the entry's Relations section body:
/// order-preserving, deduplicated, `@` stripped. Malformed lines are
/// skipped and reported through `warnings` when non-null.
std::vector<RelationRef> extract_relations(const KnowledgeEntry& entry,
                                           std::vector<std::string>* warnings = nullptr);

/// True for `domain/topic[/subtopic]/name.md` shapes: 3-4 segments, no
/// `..` or absolute components, `.md` suffix, not a reserved summary name.
bool is_valid_entry_path(std::string_view path);

/// Structural equality ignoring parse warnings and the in-memory
/// last_touch anchor; numeric fields compared at 3 decimal places.
bool entries_equal(const KnowledgeEntry& a, const KnowledgeEntry& b);

/// Canonical number formatting for frontmatter: up to 3 decimals,
/// trailing zeros trimmed (82 -> "82", 0.91 -> "0.91").
std::string format_frontmatter_number(double value);

} // namespace brv
