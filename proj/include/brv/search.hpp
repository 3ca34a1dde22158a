// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "brv/entry.hpp"

namespace brv {

// BM25 parameters and field boosts (see SEARCH.md for the exact scoring
// definition these constants plug into).
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr double kTitleBoost = 5.0;
inline constexpr double kPathBoost = 1.5;
inline constexpr double kContentBoost = 1.0;
inline constexpr double kPrefixWeight = 0.375;
inline constexpr double kFuzzyWeight = 0.45;
inline constexpr double kFuzzyRatio = 0.2;
inline constexpr std::size_t kMaxContentChars = 8000;
inline constexpr std::size_t kDefaultMaxResults = 32;

/// What gets indexed for one entry.
struct IndexableDoc {
    std::string path;
    std::string title;
    std::string content; // body text, frontmatter stripped
};

struct FieldMatches {
    bool title = false;
    bool path = false;
    bool content = false;
    bool operator==(const FieldMatches&) const = default;
};

struct SearchHit {
    std::string path;
    double raw_score = 0.0;
    double normalized_score = 0.0;
    std::set<std::string> matched_terms; // query terms that hit this doc
    FieldMatches fields;
};

/// A ranked result list plus query-level term accounting (the OOD gate
/// needs to know which query terms matched nothing in the whole corpus,
/// not just in the returned page).
struct SearchResult {
    std::vector<SearchHit> hits;
    std::vector<std::string> query_terms;          // deduplicated, query order
    std::set<std::string> matched_query_terms;     // matched anywhere in the corpus
};

struct SearchOptions {
    bool prefix = true;
    bool fuzzy = true;
    std::size_t max_results = kDefaultMaxResults;
};

/// Lowercase alphanumeric tokens; runs of [a-z0-9] plus bytes >= 0x80.
/// Everything else separates.
std::vector<std::string> tokenize(std::string_view text);

/// Query tokens of length >= 4; used by OOD detection.
std::set<std::string> significant_terms(std::string_view query);

/// s / (1 + s). Throws Error{negative_score}.
double normalize_score(double raw);

/// Levenshtein distance, used for fuzzy term matching.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Assembles the indexable text of an entry: section bodies and preamble,
/// headings dropped, truncated to kMaxContentChars.
IndexableDoc make_document(const KnowledgeEntry& entry);

/// Immutable BM25 index over title/path/content fields. Build once,
/// search from any thread.
class SearchIndex {
public:
    [[nodiscard]] static SearchIndex build(std::vector<IndexableDoc> docs);

    /// Ranked search. Per-term matching is exact plus optional prefix and
    /// fuzzy expansion; per-field scores are boost-weighted and summed.
    /// Hits sorted by raw score descending, ties lexicographic by path,
    /// truncated to max_results. Throws Error{empty_query} when the query
    /// is blank.
    SearchResult search(std::string_view query, const SearchOptions& options = {}) const;

    std::size_t doc_count() const { return doc_count_; }

private:
    struct Field {
        // token -> (doc path -> term frequency); ordered so prefix scans
        // and fuzzy expansion enumerate candidates lexicographically.
        std::map<std::string, std::map<std::string, int>> postings;
        std::unordered_map<std::string, int> length;
        double avg_length = 0.0;

        void add(const std::string& doc, const std::vector<std::string>& tokens);
    };

    const Field& field(std::size_t i) const;

    Field title_;
    Field path_;
    Field content_;
    std::size_t doc_count_ = 0;
};

} // namespace brv
