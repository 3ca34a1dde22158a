// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference ranking, written independently of the index
// implementation. O(docs x vocab) per query; no inverted structures.
// Mirrors the scoring definition in SEARCH.md step by step, including
// the accumulation order, so raw scores compare bitwise-equal.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "brv/search.hpp"

namespace brv::testing {

struct OracleHit {
    std::string path;
    double raw = 0.0;
};

namespace oracle_detail {

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> m(a.size() + 1,
                                            std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); i++) m[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); j++) m[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); i++) {
        for (std::size_t j = 1; j <= b.size(); j++) {
            std::size_t best = std::min(m[i - 1][j], m[i][j - 1]) + 1;
            std::size_t sub = m[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            m[i][j] = std::min(best, sub);
        }
    }
    return m[a.size()][b.size()];
}

struct FieldStats {
    std::vector<std::map<std::string, int>> tf; // per doc
    std::vector<int> len;                       // per doc
    double avg = 0.0;
    std::set<std::string> vocab;
    std::map<std::string, std::size_t> df;
};

inline FieldStats field_stats(const std::vector<std::vector<std::string>>& per_doc_tokens) {
    FieldStats stats;
    double total = 0.0;
    for (const auto& tokens : per_doc_tokens) {
        std::map<std::string, int> tf;
        for (const auto& t : tokens) tf[t]++;
        for (const auto& [t, n] : tf) {
            stats.vocab.insert(t);
            stats.df[t]++;
        }
        stats.len.push_back(static_cast<int>(tokens.size()));
        total += static_cast<double>(tokens.size());
        stats.tf.push_back(std::move(tf));
    }
    if (!per_doc_tokens.empty()) stats.avg = total / static_cast<double>(per_doc_tokens.size());
    return stats;
}

} // namespace oracle_detail

inline std::vector<OracleHit> bm25_rank(const std::vector<IndexableDoc>& docs,
                                        const std::string& query, bool prefix, bool fuzzy,
                                        std::size_t max_results = kDefaultMaxResults) {
    using namespace oracle_detail;

    std::vector<std::vector<std::string>> title_tokens, path_tokens, content_tokens;
    for (const auto& doc : docs) {
        title_tokens.push_back(tokenize(doc.title));
        path_tokens.push_back(tokenize(doc.path));
        std::string content = doc.content.substr(0, kMaxContentChars);
        content_tokens.push_back(tokenize(content));
    }
    FieldStats fields[3] = {field_stats(title_tokens), field_stats(path_tokens),
                            field_stats(content_tokens)};
    const double boosts[3] = {kTitleBoost, kPathBoost, kContentBoost};

    std::vector<std::string> terms;
    for (const auto& t : tokenize(query)) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    }

    std::vector<double> raw(docs.size(), 0.0);
    std::vector<bool> touched(docs.size(), false);

    for (const auto& term : terms) {
        for (std::size_t f = 0; f < 3; f++) {
            const FieldStats& fs = fields[f];
            // Single lexicographic pass over the vocabulary classifies
            // every candidate token, so matches come out pre-sorted.
            std::size_t max_dist = static_cast<std::size_t>(
                std::ceil(0.2 * static_cast<double>(term.size())));
            for (const auto& token : fs.vocab) {
                double weight;
                if (token == term) {
                    weight = 1.0;
                } else if (token.compare(0, term.size(), term) == 0 && token.size() > term.size()) {
                    if (!prefix) continue;
                    weight = kPrefixWeight * static_cast<double>(term.size()) /
                             static_cast<double>(token.size());
                } else {
                    if (!fuzzy) continue;
                    std::size_t dist = levenshtein(term, token);
                    if (dist == 0 || dist > max_dist) continue;
                    weight = kFuzzyWeight *
                             (1.0 - static_cast<double>(dist) /
                                        static_cast<double>(std::max(term.size(), token.size())));
                }
                double idf = std::log(1.0 + (static_cast<double>(docs.size()) -
                                             static_cast<double>(fs.df.at(token)) + 0.5) /
                                                (static_cast<double>(fs.df.at(token)) + 0.5));
                for (std::size_t d = 0; d < docs.size(); d++) {
                    auto it = fs.tf[d].find(token);
                    if (it == fs.tf[d].end()) continue;
                    double tf = static_cast<double>(it->second);
                    double norm = fs.avg > 0.0 ? static_cast<double>(fs.len[d]) / fs.avg : 0.0;
                    double tfn = tf * (kBm25K1 + 1.0) /
                                 (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * norm));
                    raw[d] += boosts[f] * weight * idf * tfn;
                    touched[d] = true;
                }
            }
        }
    }

    std::vector<OracleHit> hits;
    for (std::size_t d = 0; d < docs.size(); d++) {
        if (touched[d]) hits.push_back({docs[d].path, raw[d]});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
        if (a.raw != b.raw) return a.raw > b.raw;
        return a.path < b.path;
    });
    if (hits.size() > max_results) hits.resize(max_results);
    return hits;
}

} // namespace brv::testing
