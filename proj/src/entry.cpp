// SPDX-License-Identifier: Apache-2.0

#include "brv/entry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "brv/errors.hpp"

namespace brv {

namespace {

constexpr std::string_view kFrontmatterDelim = "---";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Splits text into lines; each line excludes its terminator. `consumed`
/// reports the offset just past the line's newline.
struct LineCursor {
    std::string_view text;
    std::size_t pos = 0;

    bool next(std::string_view& line, std::size_t& line_start) {
        if (pos >= text.size()) return false;
        line_start = pos;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            line = text.substr(pos);
            pos = text.size();
        } else {
            line = text.substr(pos, nl - pos);
            pos = nl + 1;
        }
        return true;
    }
};

bool parse_number(std::string_view s, double& out) {
    std::string buf(trim(s));
    if (buf.empty()) return false;
    char* end = nullptr;
    out = std::strtod(buf.c_str(), &end);
    return end == buf.c_str() + buf.size();
}

bool parse_count(std::string_view s, std::int64_t& out) {
    std::string buf(trim(s));
    if (buf.empty()) return false;
    char* end = nullptr;
    long long v = std::strtoll(buf.c_str(), &end, 10);
    if (end != buf.c_str() + buf.size() || v < 0) return false;
    out = v;
    return true;
}

std::vector<std::string> parse_flow_list(std::string_view value, bool& ok) {
    std::vector<std::string> items;
    value = trim(value);
    ok = value.size() >= 2 && value.front() == '[' && value.back() == ']';
    if (!ok) return items;
    std::string_view inner = value.substr(1, value.size() - 2);
    if (trim(inner).empty()) return items;
    std::size_t start = 0;
    while (start <= inner.size()) {
        std::size_t comma = inner.find(',', start);
        std::string_view item = comma == std::string_view::npos ? inner.substr(start)
                                                                : inner.substr(start, comma - start);
        items.emplace_back(trim(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return items;
}

bool is_block_item(std::string_view line) {
    std::string_view t = line;
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
    return t.size() >= 2 && t[0] == '-' && t[1] == ' ';
}

std::string block_item_value(std::string_view line) {
    std::string_view t = line;
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
    t.remove_prefix(2); // "- "
    return std::string(trim(t));
}

// Canonical section headings in write order.
struct SectionRef {
    std::string_view canonical;
    std::string* body;
    bool* present;
};

UtcSeconds parse_timestamp_field(std::string_view key, std::string_view value) {
    auto parsed = parse_iso8601(trim(value));
    if (!parsed) {
        raise(Errc::invalid_timestamp,
              "invalid timestamp for '" + std::string(key) + "': " + std::string(trim(value)));
    }
    return *parsed;
}

} // namespace

std::string_view to_string(Maturity m) {
    switch (m) {
    case Maturity::Draft: return "draft";
    case Maturity::Validated: return "validated";
    case Maturity::Core: return "core";
    }
    return "draft";
}

std::optional<Maturity> maturity_from_string(std::string_view s) {
    if (s == "draft") return Maturity::Draft;
    if (s == "validated") return Maturity::Validated;
    if (s == "core") return Maturity::Core;
    return std::nullopt;
}

std::string format_frontmatter_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

bool is_valid_entry_path(std::string_view path) {
    if (path.empty() || path.front() == '/' || path.find('\\') != std::string_view::npos) return false;
    std::vector<std::string_view> segments;
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t slash = path.find('/', start);
        std::string_view seg = slash == std::string_view::npos ? path.substr(start)
                                                               : path.substr(start, slash - start);
        segments.push_back(seg);
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    if (segments.size() < 3 || segments.size() > 4) return false;
    for (std::string_view seg : segments) {
        if (seg.empty() || seg == "." || seg == "..") return false;
        for (unsigned char c : seg) {
            if (c <= 0x20) return false; // control chars and whitespace
        }
    }
    std::string_view file = segments.back();
    if (file.size() <= 3 || !file.ends_with(".md")) return false;
    if (file == "context.md") return false;
    return true;
}

std::vector<RelationRef> extract_relations(const KnowledgeEntry& entry,
                                           std::vector<std::string>* warnings) {
    std::vector<RelationRef> refs;
    LineCursor cursor{entry.relations_body};
    std::string_view line;
    std::size_t at = 0;
    while (cursor.next(line, at)) {
        std::string_view t = trim(line);
        if (t.empty() || t.front() != '@') continue;
        std::string target(trim(t.substr(1)));
        if (!is_valid_entry_path(target)) {
            if (warnings) warnings->push_back("skipped malformed relation line: @" + target);
            continue;
        }
        RelationRef ref{std::move(target)};
        if (std::find(refs.begin(), refs.end(), ref) == refs.end()) refs.push_back(std::move(ref));
    }
    return refs;
}

void KnowledgeEntry::refresh_relation_mirrors() {
    related.clear();
    std::string body;
    for (const auto& ref : relations) {
        related.push_back(ref.target);
        body += "@" + ref.target + "\n";
    }
    body += "\n";
    relations_body = std::move(body);
    has_relations_section = true;
}

KnowledgeEntry parse_entry(std::string_view content) {
    KnowledgeEntry entry;
    LineCursor cursor{content};
    std::string_view line;
    std::size_t line_start = 0;

    if (!cursor.next(line, line_start) || trim(line) != kFrontmatterDelim || line_start != 0) {
        raise(Errc::malformed_frontmatter, "entry does not start with a --- frontmatter block");
    }

    // ---- frontmatter ----
    bool closed = false;
    std::string pending_list_key; // known key awaiting block items
    std::vector<std::string>* pending_list = nullptr;
    FrontmatterExtra* pending_extra = nullptr;
    bool saw_created = false;
    bool saw_updated = false;

    while (cursor.next(line, line_start)) {
        if (trim(line) == kFrontmatterDelim) {
            closed = true;
            break;
        }
        if (is_block_item(line)) {
            if (pending_list) {
                pending_list->push_back(block_item_value(line));
            } else if (pending_extra) {
                pending_extra->raw += "\n" + std::string(line);
            } else {
                raise(Errc::malformed_frontmatter, "stray list item in frontmatter: " + std::string(line));
            }
            continue;
        }
        pending_list = nullptr;
        pending_extra = nullptr;
        std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') {
            entry.extra_frontmatter.push_back({std::string(line)});
            continue;
        }
        std::size_t colon = line.find(':');
        if (colon == std::string_view::npos) {
            raise(Errc::malformed_frontmatter, "frontmatter line without key: " + std::string(line));
        }
        std::string key(trim(line.substr(0, colon)));
        std::string_view value = trim(line.substr(colon + 1));
        if (!value.empty() && (value.front() == '&' || value.front() == '*' || value == "|" || value == ">")) {
            raise(Errc::malformed_frontmatter, "unsupported YAML feature in key '" + key + "'");
        }

        if (key == "title") {
            entry.title = std::string(value);
        } else if (key == "tags" || key == "keywords") {
            auto& dest = key == "tags" ? entry.tags : entry.keywords;
            if (value.empty()) {
                pending_list = &dest;
            } else {
                bool ok = false;
                dest = parse_flow_list(value, ok);
                if (!ok) raise(Errc::malformed_frontmatter, "expected list for '" + key + "'");
            }
        } else if (key == "related") {
            if (value.empty()) {
                pending_list = &entry.related;
            } else {
                bool ok = false;
                entry.related = parse_flow_list(value, ok);
                if (!ok) raise(Errc::malformed_frontmatter, "expected list for 'related'");
            }
        } else if (key == "importance") {
            double v = 0;
            if (!parse_number(value, v)) raise(Errc::malformed_frontmatter, "importance is not a number");
            if (v < 0.0 || v > 100.0) {
                raise(Errc::importance_out_of_range,
                      "importance " + std::string(value) + " outside [0, 100]");
            }
            entry.lifecycle.importance = v;
        } else if (key == "maturity") {
            auto m = maturity_from_string(value);
            if (!m) raise(Errc::malformed_frontmatter, "unknown maturity '" + std::string(value) + "'");
            entry.lifecycle.maturity = *m;
        } else if (key == "recency") {
            double v = 0;
            if (!parse_number(value, v)) raise(Errc::malformed_frontmatter, "recency is not a number");
            entry.lifecycle.recency = std::clamp(v, 0.0, 1.0);
        } else if (key == "accessCount") {
            if (!parse_count(value, entry.lifecycle.access_count)) {
                raise(Errc::malformed_frontmatter, "accessCount is not a nonnegative integer");
            }
        } else if (key == "updateCount") {
            if (!parse_count(value, entry.lifecycle.update_count)) {
                raise(Errc::malformed_frontmatter, "updateCount is not a nonnegative integer");
            }
        } else if (key == "createdAt") {
            entry.lifecycle.created_at = parse_timestamp_field(key, value);
            saw_created = true;
        } else if (key == "updatedAt") {
            entry.lifecycle.updated_at = parse_timestamp_field(key, value);
            saw_updated = true;
        } else {
            entry.extra_frontmatter.push_back({std::string(line)});
            pending_extra = &entry.extra_frontmatter.back();
        }
    }
    if (!closed) raise(Errc::malformed_frontmatter, "frontmatter block is never closed");
    if (saw_created && saw_updated && entry.lifecycle.updated_at < entry.lifecycle.created_at) {
        raise(Errc::invalid_timestamp, "updatedAt precedes createdAt");
    }
    entry.lifecycle.last_touch = entry.lifecycle.updated_at;

    // ---- sections ----
    SectionRef sections[] = {
        {"relations", &entry.relations_body, &entry.has_relations_section},
        {"raw concept", &entry.raw_concept, &entry.has_raw_concept},
        {"narrative", &entry.narrative, &entry.has_narrative},
        {"snippets", &entry.snippets, &entry.has_snippets},
    };

    std::size_t body_start = cursor.pos;
    std::string* current = &entry.preamble;
    std::size_t region_start = body_start;

    auto flush = [&](std::size_t upto) {
        *current += std::string(content.substr(region_start, upto - region_start));
    };

    LineCursor body_cursor{content};
    body_cursor.pos = body_start;
    while (body_cursor.next(line, line_start)) {
        if (line.starts_with("## ")) {
            std::string name = lower(trim(line.substr(3)));
            for (auto& section : sections) {
                if (name == section.canonical && !*section.present) {
                    flush(line_start);
                    *section.present = true;
                    current = section.body;
                    region_start = body_cursor.pos;
                    break;
                }
            }
            // Unmatched or repeated headings stay part of the current body.
        }
    }
    flush(content.size());

    entry.relations = extract_relations(entry, &entry.parse_warnings);
    return entry;
}

std::string serialize_entry(const KnowledgeEntry& entry) {
    std::string out;
    out.reserve(512 + entry.relations_body.size() + entry.raw_concept.size() +
                entry.narrative.size() + entry.snippets.size());
    out += "---\n";
    out += "title: " + entry.title;
    if (entry.title.empty()) out.pop_back(); // no trailing space after bare key
    out += "\n";

    auto flow = [](const std::vector<std::string>& items) {
        std::string s = "[";
        for (std::size_t i = 0; i < items.size(); i++) {
            if (i) s += ", ";
            s += items[i];
        }
        return s + "]";
    };
    out += "tags: " + flow(entry.tags) + "\n";
    out += "keywords: " + flow(entry.keywords) + "\n";
    if (entry.related.empty()) {
        out += "related: []\n";
    } else {
        out += "related:\n";
        for (const auto& r : entry.related) out += "  - " + r + "\n";
    }
    out += "importance: " + format_frontmatter_number(entry.lifecycle.importance) + "\n";
    out += "maturity: " + std::string(to_string(entry.lifecycle.maturity)) + "\n";
    out += "recency: " + format_frontmatter_number(entry.lifecycle.recency) + "\n";
    out += "accessCount: " + std::to_string(entry.lifecycle.access_count) + "\n";
    out += "updateCount: " + std::to_string(entry.lifecycle.update_count) + "\n";
    out += "createdAt: " + format_iso8601(entry.lifecycle.created_at) + "\n";
    out += "updatedAt: " + format_iso8601(entry.lifecycle.updated_at) + "\n";
    for (const auto& extra : entry.extra_frontmatter) out += extra.raw + "\n";
    out += "---\n";

    out += entry.preamble;
    if (entry.has_relations_section) out += "## Relations\n" + entry.relations_body;
    if (entry.has_raw_concept) out += "## Raw Concept\n" + entry.raw_concept;
    if (entry.has_narrative) out += "## Narrative\n" + entry.narrative;
    if (entry.has_snippets) out += "## Snippets\n" + entry.snippets;
    return out;
}

namespace {

bool nearly_equal_3dp(double a, double b) {
    return std::llround(a * 1000.0) == std::llround(b * 1000.0);
}

} // namespace

bool entries_equal(const KnowledgeEntry& a, const KnowledgeEntry& b) {
    return a.path == b.path && a.title == b.title && a.tags == b.tags &&
           a.keywords == b.keywords && a.related == b.related && a.relations == b.relations &&
           a.preamble == b.preamble && a.relations_body == b.relations_body &&
           a.raw_concept == b.raw_concept && a.narrative == b.narrative &&
           a.snippets == b.snippets && a.has_relations_section == b.has_relations_section &&
           a.has_raw_concept == b.has_raw_concept && a.has_narrative == b.has_narrative &&
           a.has_snippets == b.has_snippets && a.extra_frontmatter == b.extra_frontmatter &&
           nearly_equal_3dp(a.lifecycle.importance, b.lifecycle.importance) &&
           a.lifecycle.maturity == b.lifecycle.maturity &&
           nearly_equal_3dp(a.lifecycle.recency, b.lifecycle.recency) &&
           a.lifecycle.access_count == b.lifecycle.access_count &&
           a.lifecycle.update_count == b.lifecycle.update_count &&
           a.lifecycle.created_at == b.lifecycle.created_at &&
           a.lifecycle.updated_at == b.lifecycle.updated_at;
}

} // namespace brv
