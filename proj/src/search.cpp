// SPDX-License-Identifier: Apache-2.0

#include "brv/search.hpp"

#include <algorithm>
#include <cmath>

#include "brv/errors.hpp"

namespace brv {

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

char lower_byte(unsigned char c) {
    return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

std::size_t max_edit_distance(std::string_view term) {
    return static_cast<std::size_t>(
        std::ceil(kFuzzyRatio * static_cast<double>(term.size())));
}

/// One vocabulary token matched by a query term, with its match weight.
struct TermMatch {
    const std::string* token;
    double weight;
};

double tf_norm(int tf, int len, double avg_len) {
    double norm = avg_len > 0.0 ? static_cast<double>(len) / avg_len : 0.0;
    double denom = static_cast<double>(tf) + kBm25K1 * (1.0 - kBm25B + kBm25B * norm);
    return static_cast<double>(tf) * (kBm25K1 + 1.0) / denom;
}

double idf(std::size_t doc_count, std::size_t df) {
    double n = static_cast<double>(doc_count);
    double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (is_token_byte(c)) {
            current += lower_byte(c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::set<std::string> significant_terms(std::string_view query) {
    std::set<std::string> out;
    for (auto& token : tokenize(query)) {
        if (token.size() >= 4) out.insert(std::move(token));
    }
    return out;
}

double normalize_score(double raw) {
    if (raw < 0.0) {
        raise(Errc::negative_score, "BM25 scores are nonnegative");
    }
    return raw / (1.0 + raw);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); j++) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); i++) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); j++) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

IndexableDoc make_document(const KnowledgeEntry& entry) {
    IndexableDoc doc;
    doc.path = entry.path;
    doc.title = entry.title;
    std::string content = entry.preamble;
    content += entry.relations_body;
    content += entry.raw_concept;
    content += entry.narrative;
    content += entry.snippets;
    if (content.size() > kMaxContentChars) content.resize(kMaxContentChars);
    doc.content = std::move(content);
    return doc;
}

void SearchIndex::Field::add(const std::string& doc, const std::vector<std::string>& tokens) {
    for (const auto& token : tokens) postings[token][doc]++;
    length[doc] = static_cast<int>(tokens.size());
}

const SearchIndex::Field& SearchIndex::field(std::size_t i) const {
    switch (i) {
    case 0: return title_;
    case 1: return path_;
    default: return content_;
    }
}

SearchIndex SearchIndex::build(std::vector<IndexableDoc> docs) {
    SearchIndex index;
    index.doc_count_ = docs.size();
    double title_total = 0, path_total = 0, content_total = 0;
    for (const auto& doc : docs) {
        auto title_tokens = tokenize(doc.title);
        auto path_tokens = tokenize(doc.path);
        std::string_view content(doc.content);
        if (content.size() > kMaxContentChars) content = content.substr(0, kMaxContentChars);
        auto content_tokens = tokenize(content);
        title_total += static_cast<double>(title_tokens.size());
        path_total += static_cast<double>(path_tokens.size());
        content_total += static_cast<double>(content_tokens.size());
        index.title_.add(doc.path, title_tokens);
        index.path_.add(doc.path, path_tokens);
        index.content_.add(doc.path, content_tokens);
    }
    if (!docs.empty()) {
        double n = static_cast<double>(docs.size());
        index.title_.avg_length = title_total / n;
        index.path_.avg_length = path_total / n;
        index.content_.avg_length = content_total / n;
    }
    return index;
}

SearchResult SearchIndex::search(std::string_view query, const SearchOptions& options) const {
    bool blank = true;
    for (unsigned char c : query) {
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
            blank = false;
            break;
        }
    }
    if (blank) {
        raise(Errc::empty_query, "query is empty");
    }

    SearchResult result;
    for (auto& token : tokenize(query)) {
        if (std::find(result.query_terms.begin(), result.query_terms.end(), token) ==
            result.query_terms.end()) {
            result.query_terms.push_back(std::move(token));
        }
    }
    if (doc_count_ == 0 || result.query_terms.empty()) return result;

    struct Acc {
        double raw = 0.0;
        std::set<std::string> matched_terms;
        FieldMatches fields;
    };
    std::map<std::string, Acc> accumulators;
    constexpr double kBoosts[3] = {kTitleBoost, kPathBoost, kContentBoost};

    // Accumulation order is part of the scoring contract (SEARCH.md):
    // query term, then field (title, path, content), then matching
    // vocabulary token in lexicographic order. The reference oracle adds
    // in the same order, which makes score comparisons exact.
    for (const auto& term : result.query_terms) {
        for (std::size_t f = 0; f < 3; f++) {
            const Field& fld = field(f);
            std::vector<TermMatch> matches;

            auto exact = fld.postings.find(term);
            if (exact != fld.postings.end()) {
                matches.push_back({&exact->first, 1.0});
            }
            if (options.prefix) {
                for (auto it = fld.postings.lower_bound(term);
                     it != fld.postings.end() && it->first.starts_with(term); ++it) {
                    if (it->first.size() == term.size()) continue; // the exact match
                    double weight = kPrefixWeight * static_cast<double>(term.size()) /
                                    static_cast<double>(it->first.size());
                    matches.push_back({&it->first, weight});
                }
            }
            if (options.fuzzy) {
                std::size_t max_dist = max_edit_distance(term);
                for (const auto& [token, postings] : fld.postings) {
                    if (token == term || token.starts_with(term)) continue; // claimed above
                    if (token.size() + max_dist < term.size() ||
                        term.size() + max_dist < token.size()) {
                        continue; // length gap alone exceeds the budget
                    }
                    std::size_t dist = edit_distance(term, token);
                    if (dist == 0 || dist > max_dist) continue;
                    double sim = 1.0 - static_cast<double>(dist) /
                                           static_cast<double>(std::max(term.size(), token.size()));
                    matches.push_back({&token, kFuzzyWeight * sim});
                }
            }
            std::sort(matches.begin(), matches.end(),
                      [](const TermMatch& a, const TermMatch& b) { return *a.token < *b.token; });

            for (const auto& match : matches) {
                const auto& postings = fld.postings.at(*match.token);
                double token_idf = idf(doc_count_, postings.size());
                for (const auto& [doc, tf] : postings) {
                    Acc& acc = accumulators[doc];
                    acc.raw += kBoosts[f] * match.weight * token_idf *
                               tf_norm(tf, fld.length.at(doc), fld.avg_length);
                    acc.matched_terms.insert(term);
                    if (f == 0) acc.fields.title = true;
                    if (f == 1) acc.fields.path = true;
                    if (f == 2) acc.fields.content = true;
                    result.matched_query_terms.insert(term);
                }
            }
        }
    }

    result.hits.reserve(accumulators.size());
    for (auto& [doc, acc] : accumulators) {
        SearchHit hit;
        hit.path = doc;
        hit.raw_score = acc.raw;
        hit.normalized_score = normalize_score(acc.raw);
        hit.matched_terms = std::move(acc.matched_terms);
        hit.fields = acc.fields;
        result.hits.push_back(std::move(hit));
    }
    std::sort(result.hits.begin(), result.hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.raw_score != b.raw_score) return a.raw_score > b.raw_score;
        return a.path < b.path;
    });
    if (result.hits.size() > options.max_results) result.hits.resize(options.max_results);
    return result;
}

} // namespace brv
