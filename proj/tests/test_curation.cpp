// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "brv/curation.hpp"
#include "brv/errors.hpp"
#include "brv/lifecycle.hpp"
#include "doctest.h"
#include "support/corpus.hpp"

using namespace brv;
using namespace brv::testing;
namespace fs = std::filesystem;

namespace {

constexpr UtcSeconds kNow = 1755100000; // well after every fixture timestamp

struct Project {
    TempDir dir;
    ContextTreeStore store{dir.path};
    CurationEngine engine{store, nullptr, [] { return kNow; }};

    Project() { store.load(); }

    void put(const std::string& path, const KnowledgeEntry& entry) {
        store.atomic_write(path, serialize_entry(entry));
    }

    KnowledgeEntry on_disk(const std::string& path) {
        return parse_entry(slurp((dir.path / path).string()));
    }

    bool exists(const std::string& path) const { return fs::exists(dir.path / path); }
};

CurateOperation op(CurateOpType type, std::string path, std::string content = {},
                   std::string reason = "test op") {
    CurateOperation out;
    out.type = type;
    out.path = std::move(path);
    out.content = std::move(content);
    out.reason = std::move(reason);
    return out;
}

CurateOperation merge_op(std::string target, std::string source,
                         std::string reason = "dedupe") {
    CurateOperation out;
    out.type = CurateOpType::Merge;
    out.path = std::move(target);
    out.source_path = std::move(source);
    out.reason = std::move(reason);
    return out;
}

} // namespace

TEST_CASE("wire report matches the documented feedback listing byte for byte") {
    Project p;
    p.put("analysis/semi/report.md", simple_entry("analysis/semi/report.md", "semi report"));
    p.store.load();

    std::vector<CurateOperation> batch;
    batch.push_back(op(CurateOpType::Upsert, "analysis/semi/report",
                       "Revised findings.\n", "refresh stale summary"));
    batch.push_back(merge_op("analysis/energy/balance", "analysis/energy/legacy"));

    CurateReport report = p.engine.apply(batch);
    CHECK(report.to_json().dump() ==
          R"({"applied":[{"type":"UPSERT","path":"analysis/semi/report","status":"success"},)"
          R"({"type":"MERGE","path":"analysis/energy/balance","status":"failed",)"
          R"("message":"Source file not found"}],)"
          R"("summary":{"added":0,"deleted":0,"updated":1,"merged":0,"failed":1}})");

    // The upsert really landed as an update: counters moved, creation stayed.
    KnowledgeEntry after = p.on_disk("analysis/semi/report.md");
    CHECK(after.lifecycle.update_count == 1);
    CHECK(after.lifecycle.created_at == 1750000000);
    CHECK(after.lifecycle.updated_at == kNow);
}

TEST_CASE("ADD creates a draft entry once and refuses the duplicate in the same batch") {
    Project p;
    std::vector<CurateOperation> batch;
    batch.push_back(op(CurateOpType::Add, "ops/runbooks/restore", "How to restore.\n"));
    batch.push_back(op(CurateOpType::Add, "ops/runbooks/restore", "Different text.\n"));

    CurateReport report = p.engine.apply(batch);
    REQUIRE(report.applied.size() == 2);
    CHECK(report.applied[0].success);
    CHECK_FALSE(report.applied[1].success);
    CHECK(report.applied[1].message == "File already exists");
    CHECK(report.summary == CurateTally{1, 0, 0, 0, 1});

    KnowledgeEntry entry = p.on_disk("ops/runbooks/restore.md");
    CHECK(entry.title == "restore");
    CHECK(entry.lifecycle.importance == doctest::Approx(50.0));
    CHECK(entry.lifecycle.maturity == Maturity::Draft);
    CHECK(entry.lifecycle.created_at == kNow);
    CHECK(entry.lifecycle.updated_at == kNow);
    CHECK(entry.narrative == "How to restore.\n");
    CHECK(p.store.find_entry("ops/runbooks/restore.md") != nullptr);
}

TEST_CASE("batches are strictly sequential: add-then-update works, update-then-add does not") {
    Project p;

    CurateReport forward = p.engine.apply({
        op(CurateOpType::Add, "ops/runbooks/failover", "First cut.\n"),
        op(CurateOpType::Update, "ops/runbooks/failover", "Second cut.\n"),
    });
    CHECK(forward.summary == CurateTally{1, 0, 1, 0, 0});
    KnowledgeEntry entry = p.on_disk("ops/runbooks/failover.md");
    CHECK(entry.narrative == "Second cut.\n");
    CHECK(entry.lifecycle.update_count == 1);
    // Same-instant add then update: no decay window, just the +5 bonus.
    CHECK(entry.lifecycle.importance == doctest::Approx(55.0));

    CurateReport backward = p.engine.apply({
        op(CurateOpType::Update, "ops/runbooks/cutover", "Draft.\n"),
        op(CurateOpType::Add, "ops/runbooks/cutover", "Draft.\n"),
    });
    REQUIRE(backward.applied.size() == 2);
    CHECK_FALSE(backward.applied[0].success);
    CHECK(backward.applied[0].message == "File not found");
    CHECK(backward.applied[1].success);
    CHECK(backward.summary == CurateTally{1, 0, 0, 0, 1});
    CHECK(p.on_disk("ops/runbooks/cutover.md").lifecycle.update_count == 0);
}

TEST_CASE("UPDATE replaces content but the engine owns the lifecycle") {
    Project p;
    KnowledgeEntry seed = simple_entry("billing/invoices/dunning.md", "dunning flow");
    seed.lifecycle.access_count = 7;
    p.put("billing/invoices/dunning.md", seed);
    p.store.load();

    // Supplied frontmatter may carry lifecycle numbers; they are ignored.
    const std::string content =
        "---\n"
        "title: dunning flow v2\n"
        "tags: [billing]\n"
        "importance: 99\n"
        "updateCount: 41\n"
        "---\n"
        "\n"
        "## Narrative\n"
        "Retry ladder is now four steps.\n";
    CurateReport report =
        p.engine.apply({op(CurateOpType::Update, "billing/invoices/dunning", content)});
    CHECK(report.summary == CurateTally{0, 0, 1, 0, 0});

    KnowledgeEntry after = p.on_disk("billing/invoices/dunning.md");
    CHECK(after.title == "dunning flow v2");
    CHECK(after.tags == std::vector<std::string>{"billing"});
    CHECK(after.narrative == "Retry ladder is now four steps.\n");
    CHECK(after.lifecycle.access_count == 7);
    CHECK(after.lifecycle.update_count == 1);
    CHECK(after.lifecycle.created_at == 1750000000);
    CHECK(after.lifecycle.updated_at == kNow);

    const double elapsed_days = double(kNow - 1750000000) / 86400.0;
    const double expected = akl::decay_importance(50.0, elapsed_days) + 5.0;
    // Frontmatter stores three decimals, so compare at that granularity.
    CHECK(std::abs(after.lifecycle.importance - expected) <= 5e-4);
}

TEST_CASE("UPSERT lands as added on new paths and updated on existing ones") {
    Project p;
    p.put("notes/scratch/kept.md", simple_entry("notes/scratch/kept.md", "kept"));
    p.store.load();

    CurateReport report = p.engine.apply({
        op(CurateOpType::Upsert, "notes/scratch/fresh", "New note.\n"),
        op(CurateOpType::Upsert, "notes/scratch/kept", "Replaced note.\n"),
    });
    CHECK(report.summary == CurateTally{1, 0, 1, 0, 0});
    CHECK(report.applied[0].type == CurateOpType::Upsert);
    CHECK(report.applied[1].type == CurateOpType::Upsert);
    CHECK(p.on_disk("notes/scratch/fresh.md").lifecycle.update_count == 0);
    CHECK(p.on_disk("notes/scratch/kept.md").lifecycle.update_count == 1);
}

TEST_CASE("MERGE unions fields, rewrites inbound references, and deletes the source") {
    Project p;
    const std::string target_path = "analysis/energy/balance.md";
    const std::string source_path = "analysis/energy/legacy.md";

    KnowledgeEntry target = simple_entry(target_path, "energy balance",
                                         {source_path, "ops/runbooks/restore.md"});
    target.tags = {"energy", "balance"};
    target.keywords = {"flux"};
    target.lifecycle.importance = 62.0;
    target.lifecycle.access_count = 4;
    target.lifecycle.update_count = 2;
    target.refresh_relation_mirrors();
    target.narrative = "Target narrative.\n";

    KnowledgeEntry source = simple_entry(source_path, "legacy energy",
                                         {target_path, "ops/runbooks/archive.md"});
    source.tags = {"balance", "legacy"};
    source.keywords = {"flux", "joule"};
    source.lifecycle.importance = 81.0;
    source.lifecycle.maturity = Maturity::Validated;
    source.lifecycle.access_count = 3;
    source.lifecycle.update_count = 1;
    source.lifecycle.created_at = 1749000000;
    source.refresh_relation_mirrors();
    source.narrative = "Source narrative.\n";

    KnowledgeEntry referrer =
        simple_entry("ops/runbooks/pointer.md", "pointer", {source_path});

    p.put(target_path, target);
    p.put(source_path, source);
    p.put("ops/runbooks/pointer.md", referrer);
    p.store.load();

    CurateReport report = p.engine.apply({merge_op("analysis/energy/balance",
                                                   "analysis/energy/legacy")});
    CHECK(report.summary == CurateTally{0, 0, 0, 1, 0});

    CHECK_FALSE(p.exists(source_path));
    KnowledgeEntry merged = p.on_disk(target_path);
    CHECK(merged.title == "energy balance");
    CHECK(merged.tags == std::vector<std::string>{"energy", "balance", "legacy"});
    CHECK(merged.keywords == std::vector<std::string>{"flux", "joule"});
    // Self and source references drop out of the union.
    REQUIRE(merged.relations.size() == 2);
    CHECK(merged.relations[0].target == "ops/runbooks/restore.md");
    CHECK(merged.relations[1].target == "ops/runbooks/archive.md");

    CHECK(merged.narrative.find("Target narrative.") != std::string::npos);
    CHECK(merged.narrative.find("*Merged from @analysis/energy/legacy.md*") !=
          std::string::npos);
    CHECK(merged.narrative.find("Source narrative.") != std::string::npos);

    CHECK(merged.lifecycle.access_count == 7);
    CHECK(merged.lifecycle.update_count == 4); // 2 + 1 + the merge event
    CHECK(merged.lifecycle.created_at == 1749000000);
    CHECK(merged.lifecycle.updated_at == kNow);
    const double elapsed_days = double(kNow - 1750000000) / 86400.0;
    const double expected_importance = akl::decay_importance(81.0, elapsed_days) + 5.0;
    CHECK(std::abs(merged.lifecycle.importance - expected_importance) <= 5e-4);
    CHECK(merged.lifecycle.maturity ==
          akl::evaluate_maturity(Maturity::Validated, expected_importance));

    // The referrer now points at the merge target, on disk and in the index.
    KnowledgeEntry pointer = p.on_disk("ops/runbooks/pointer.md");
    REQUIRE(pointer.relations.size() == 1);
    CHECK(pointer.relations[0].target == target_path);
    const auto& backward = p.store.references().backward;
    REQUIRE(backward.contains(target_path));
    CHECK(backward.at(target_path).contains("ops/runbooks/pointer.md"));
    CHECK_FALSE(backward.contains(source_path));

    // Topic summary no longer lists the deleted source.
    const std::string summary = slurp((p.dir.path / "analysis/energy/context.md").string());
    CHECK(summary.find("balance.md") != std::string::npos);
    CHECK(summary.find("legacy.md") == std::string::npos);
}

TEST_CASE("MERGE failure modes stay in-band") {
    Project p;
    p.put("a/b/target.md", simple_entry("a/b/target.md", "target"));
    p.put("a/b/source.md", simple_entry("a/b/source.md", "source"));
    p.store.load();

    CurateReport report = p.engine.apply({
        merge_op("a/b/target", "a/b/target"),
        merge_op("a/b/missing", "a/b/source"),
        merge_op("a/b/target", "a/b/ghost"),
        merge_op("a/b/target", ""),
    });
    REQUIRE(report.applied.size() == 4);
    CHECK(report.applied[0].message == "Source and target are the same file");
    CHECK(report.applied[1].message == "Target file not found");
    CHECK(report.applied[2].message == "Source file not found");
    CHECK(report.applied[3].message == "Missing source path");
    CHECK(report.summary == CurateTally{0, 0, 0, 0, 4});
    CHECK(p.exists("a/b/source.md")); // nothing was deleted
}

TEST_CASE("DELETE removes one entry or a whole subtree as a single operation") {
    Project p;
    p.put("ops/legacy/a.md", simple_entry("ops/legacy/a.md", "a"));
    p.put("ops/legacy/b.md", simple_entry("ops/legacy/b.md", "b"));
    p.put("ops/runbooks/restore.md", simple_entry("ops/runbooks/restore.md", "restore"));
    p.store.load();

    CurateReport report = p.engine.apply({
        op(CurateOpType::Delete, "ops/legacy", {}, "retired"),
        op(CurateOpType::Delete, "ops/runbooks/restore", {}, "superseded"),
        op(CurateOpType::Delete, "ops/runbooks/restore", {}, "again"),
    });
    REQUIRE(report.applied.size() == 3);
    CHECK(report.applied[0].success);
    CHECK(report.applied[0].message == "removed 2 entries: ops/legacy/a.md, ops/legacy/b.md");
    CHECK(report.applied[1].success);
    CHECK_FALSE(report.applied[2].success);
    CHECK(report.applied[2].message == "File not found");
    CHECK(report.summary == CurateTally{0, 2, 0, 0, 1});

    CHECK_FALSE(fs::exists(p.dir.path / "ops/legacy"));
    CHECK_FALSE(p.exists("ops/runbooks/restore.md"));
    CHECK(p.store.entry_count() == 0);
}

TEST_CASE("invalid shapes, escapes, and missing reasons fail per-op without aborting") {
    Project p;
    CurateReport report = p.engine.apply({
        op(CurateOpType::Add, "../outside/x", "Escape attempt.\n"),
        op(CurateOpType::Add, "too/shallow.md", "Two segments.\n"),
        op(CurateOpType::Add, "a/b/context.md", "Reserved name.\n"),
        op(CurateOpType::Delete, "../etc", {}, "escape"),
        op(CurateOpType::Add, "a/b/valid", "Fine.\n", ""),
        op(CurateOpType::Add, "a/b/valid", "Fine.\n"),
    });
    REQUIRE(report.applied.size() == 6);
    CHECK(report.applied[0].message.find("Invalid path") != std::string::npos);
    CHECK(report.applied[1].message.find("Invalid path") != std::string::npos);
    CHECK(report.applied[2].message.find("Invalid path") != std::string::npos);
    CHECK_FALSE(report.applied[3].success); // resolve() rejects the traversal
    CHECK(report.applied[4].message == "Missing reason");
    CHECK(report.applied[5].success);
    CHECK(report.summary == CurateTally{1, 0, 0, 0, 5});
    CHECK(p.store.entry_count() == 1);
}

TEST_CASE("bare content synthesizes an entry; full files keep their shape") {
    Project p;
    const std::string bare = "## Narrative\nBody text only.\n";
    const std::string full =
        "---\n"
        "title: full entry\n"
        "x-origin: manual\n"
        "---\n"
        "\n"
        "## Raw Concept\n"
        "**Task:** keep custom keys.\n"
        "\n"
        "## Narrative\n"
        "Full file body.\n";

    CurateReport report = p.engine.apply({
        op(CurateOpType::Add, "notes/inbox/bare", bare),
        op(CurateOpType::Add, "notes/inbox/full", full),
        op(CurateOpType::Add, "notes/inbox/broken", "---\ntitle: x\nimportance: 200\n---\n"),
    });
    CHECK(report.summary == CurateTally{2, 0, 0, 0, 1});
    CHECK(report.applied[2].message.find("Invalid content") != std::string::npos);

    KnowledgeEntry from_bare = p.on_disk("notes/inbox/bare.md");
    CHECK(from_bare.title == "bare");
    CHECK(from_bare.has_narrative);
    CHECK(from_bare.narrative == "Body text only.\n");

    KnowledgeEntry from_full = p.on_disk("notes/inbox/full.md");
    CHECK(from_full.title == "full entry");
    REQUIRE(from_full.extra_frontmatter.size() == 1);
    CHECK(from_full.extra_frontmatter[0].raw == "x-origin: manual");
    CHECK(from_full.lifecycle.importance == doctest::Approx(50.0)); // engine-owned
}

TEST_CASE("summaries appear at every level and the after-batch hook fires once") {
    Project p;
    int rebuilds = 0;
    p.engine.set_after_batch([&] { rebuilds++; });

    p.engine.apply({op(CurateOpType::Add, "ops/runbooks/restore", "Steps.\n")});
    CHECK(rebuilds == 1);
    CHECK(p.exists("ops/context.md"));
    CHECK(p.exists("ops/runbooks/context.md"));
    const std::string listing = slurp((p.dir.path / "ops/runbooks/context.md").string());
    CHECK(listing.find("restore.md") != std::string::npos);

    // An all-failed batch changes nothing and triggers no rebuild.
    p.engine.apply({op(CurateOpType::Update, "ops/runbooks/ghost", "x")});
    CHECK(rebuilds == 1);
}

TEST_CASE("report accounting holds against a replay oracle on randomized batches") {
    Project p;
    std::mt19937 rng(20260814);
    const std::vector<std::string> pool = {
        "alpha/billing/cycle.md",  "alpha/billing/ledger.md", "alpha/auth/session.md",
        "beta/deploy/rollback.md", "beta/deploy/canary.md",   "beta/cache/evict.md",
    };
    std::set<std::string> shadow;

    for (int round = 0; round < 30; round++) {
        std::vector<CurateOperation> batch;
        std::vector<bool> expect;
        std::set<std::string> next = shadow;
        const int len = std::uniform_int_distribution<int>(1, 12)(rng);
        for (int i = 0; i < len; i++) {
            const auto& path = pool[std::uniform_int_distribution<std::size_t>(
                0, pool.size() - 1)(rng)];
            switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
            case 0:
                batch.push_back(op(CurateOpType::Add, path, "Body.\n"));
                expect.push_back(!next.contains(path));
                next.insert(path);
                break;
            case 1:
                batch.push_back(op(CurateOpType::Update, path, "Body v2.\n"));
                expect.push_back(next.contains(path));
                break;
            case 2:
                batch.push_back(op(CurateOpType::Upsert, path, "Body v3.\n"));
                expect.push_back(true);
                next.insert(path);
                break;
            case 3: {
                const auto& source = pool[std::uniform_int_distribution<std::size_t>(
                    0, pool.size() - 1)(rng)];
                batch.push_back(merge_op(path, source));
                const bool ok =
                    source != path && next.contains(source) && next.contains(path);
                expect.push_back(ok);
                if (ok) next.erase(source);
                break;
            }
            default:
                batch.push_back(op(CurateOpType::Delete, path, {}, "cleanup"));
                expect.push_back(next.contains(path));
                next.erase(path);
                break;
            }
        }

        CurateReport report = p.engine.apply(batch);
        REQUIRE(report.applied.size() == batch.size());

        CurateTally recount;
        for (std::size_t i = 0; i < report.applied.size(); i++) {
            CHECK(report.applied[i].path == batch[i].path);
            CHECK(report.applied[i].success == expect[i]);
            if (!report.applied[i].success) {
                recount.failed++;
                continue;
            }
            switch (report.applied[i].type) {
            case CurateOpType::Add: recount.added++; break;
            case CurateOpType::Update: recount.updated++; break;
            case CurateOpType::Delete: recount.deleted++; break;
            case CurateOpType::Merge: recount.merged++; break;
            case CurateOpType::Upsert:
                (shadow.contains(batch[i].path) ? recount.updated : recount.added)++;
                break;
            }
            // Track intra-batch effects so later upserts classify correctly.
            if (report.applied[i].type == CurateOpType::Delete) shadow.erase(batch[i].path);
            else if (report.applied[i].type == CurateOpType::Merge)
                shadow.erase(batch[i].source_path);
            else shadow.insert(batch[i].path);
        }
        CHECK(report.summary == recount);
        shadow = next;

        std::vector<std::string> present = p.store.entry_paths();
        CHECK(std::set<std::string>(present.begin(), present.end()) == shadow);
    }
}

namespace {
struct SimulatedCrash {};
} // namespace

TEST_CASE("a crash at any write step leaves only whole, parseable files behind") {
    // Count the writes of a clean run first, then re-run the same batch
    // with an injected crash before each one.
    auto seed_tree = [](Project& p) {
        p.put("ops/net/proxy.md", simple_entry("ops/net/proxy.md", "proxy"));
        p.put("ops/net/vpn.md",
              simple_entry("ops/net/vpn.md", "vpn", {"ops/net/proxy.md"}));
        p.store.load();
    };
    auto batch = [] {
        return std::vector<CurateOperation>{
            op(CurateOpType::Add, "ops/net/dns", "Resolver setup.\n"),
            op(CurateOpType::Update, "ops/net/vpn", "Rotated keys.\n"),
            merge_op("ops/net/vpn", "ops/net/proxy"),
            op(CurateOpType::Delete, "ops/net/dns", {}, "rollback"),
        };
    };

    std::size_t total_steps = 0;
    {
        Project p;
        seed_tree(p);
        p.store.set_write_step_hook([&](WriteStep, const fs::path&) { total_steps++; });
        p.engine.apply(batch());
        REQUIRE(total_steps > 0);
    }

    for (std::size_t crash_at = 0; crash_at < total_steps; crash_at++) {
        Project p;
        seed_tree(p);
        std::size_t step = 0;
        p.store.set_write_step_hook([&](WriteStep, const fs::path&) {
            if (step++ == crash_at) throw SimulatedCrash{};
        });
        CHECK_THROWS_AS(p.engine.apply(batch()), SimulatedCrash);

        ContextTreeStore recovered(p.dir.path);
        recovered.load();
        CHECK(recovered.load_issues().empty());
        for (const auto& path : recovered.entry_paths())
            CHECK_NOTHROW(parse_entry(slurp((p.dir.path / path).string())));
    }
}

TEST_CASE("operation arrays parse from the wire and reject malformed shapes") {
    Json ok_ops = Json::array();
    ok_ops.push_back({{"type", "add"},
                      {"path", "a/b/c"},
                      {"content", "Body.\n"},
                      {"reason", "seed"}});
    ok_ops.push_back({{"type", "MERGE"},
                      {"path", "a/b/c"},
                      {"source", "a/b/d"},
                      {"reason", "dedupe"}});
    std::vector<CurateOperation> parsed = parse_operations(ok_ops);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].type == CurateOpType::Add);
    CHECK(parsed[0].content == "Body.\n");
    CHECK(parsed[1].type == CurateOpType::Merge);
    CHECK(parsed[1].source_path == "a/b/d");

    CHECK_THROWS_WITH_AS(parse_operations(Json::object()),
                         "operations must be a JSON array", Error);
    CHECK_THROWS_AS(parse_operations(Json::array({Json::object()})), Error);
    CHECK_THROWS_AS(
        parse_operations(Json::array({{{"type", "EXPLODE"}, {"path", "a/b/c"}}})), Error);
    CHECK_THROWS_AS(parse_operations(Json::array({{{"type", "ADD"}, {"path", 7}}})), Error);
}

TEST_CASE("MERGE narrative synthesis defers to a configured adapter and survives refusal") {
    Project p;
    p.put("a/b/t.md", simple_entry("a/b/t.md", "t", {}, "Target text."));
    p.put("a/b/s.md", simple_entry("a/b/s.md", "s", {}, "Source text."));
    p.put("a/b/s2.md", simple_entry("a/b/s2.md", "s2", {}, "Second source."));
    p.store.load();

    StubAdapter stub({AdapterVerdict::answer("Fused narrative."),
                      AdapterVerdict::insufficient_context()});
    CurationEngine engine(p.store, &stub, [] { return kNow; });

    engine.apply({merge_op("a/b/t", "a/b/s")});
    CHECK(p.on_disk("a/b/t.md").narrative == "Fused narrative.\n");
    REQUIRE(stub.calls() == 1);
    CHECK(stub.transcript()[0].prompt.find("Target text.") != std::string::npos);
    CHECK(stub.transcript()[0].prompt.find("Source text.") != std::string::npos);

    // A refusal falls back to the deterministic concatenation.
    engine.apply({merge_op("a/b/t", "a/b/s2")});
    const std::string narrative = p.on_disk("a/b/t.md").narrative;
    CHECK(narrative.find("Fused narrative.") != std::string::npos);
    CHECK(narrative.find("*Merged from @a/b/s2.md*") != std::string::npos);
    CHECK(narrative.find("Second source.") != std::string::npos);
}

TEST_CASE("preprocess_sources enforces the documented caps") {
    TempDir dir;
    auto write = [&](const std::string& name, const std::string& bytes) {
        std::ofstream out(dir.path / name, std::ios::binary);
        out << bytes;
    };

    SUBCASE("more than five files") {
        std::vector<std::string> six;
        for (int i = 0; i < 6; i++) {
            std::string name = "f" + std::to_string(i) + ".txt";
            write(name, "text");
            six.push_back(name);
        }
        CHECK_THROWS_AS(preprocess_sources(six, dir.path), Error);
        try {
            preprocess_sources(six, dir.path);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::too_many_files);
        }
    }

    SUBCASE("missing and binary files") {
        write("bin.dat", std::string("head\0tail", 9));
        try {
            preprocess_sources({"nope.txt"}, dir.path);
            FAIL("expected file_not_found");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::file_not_found);
        }
        try {
            preprocess_sources({"bin.dat"}, dir.path);
            FAIL("expected binary_file_rejected");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::binary_file_rejected);
        }
    }

    SUBCASE("character cap and code line cap") {
        write("big.txt", std::string(50'000, 'x'));
        std::string code;
        for (int i = 0; i < 3'000; i++) code += "line " + std::to_string(i) + "\n";
        write("gen.py", code);
        write("prose.md", std::string(2'500, 'y') + "\n" + std::string(2'500, 'z'));

        auto out = preprocess_sources({"big.txt", "gen.py", "prose.md"}, dir.path);
        REQUIRE(out.size() == 3);
        CHECK(out[0].text.size() == kMaxSourceChars);
        CHECK(std::count(out[1].text.begin(), out[1].text.end(), '\n') == 2'000);
        CHECK(out[1].text.ends_with("line 1999\n"));
        CHECK(out[2].text.size() == 5'001); // prose is not line-truncated
    }
}

TEST_CASE("compression escalates L1 to L2 to L3 and always lands within budget") {
    std::string text;
    for (int i = 0; i < 200; i++) text += "w" + std::to_string(i) + " ";

    SUBCASE("within budget is untouched") {
        auto result = compress_to_budget(text, 500);
        CHECK(result.level == CompressionLevel::None);
        CHECK(result.text == text);
    }

    SUBCASE("L1 summary accepted when it fits") {
        StubAdapter stub({AdapterVerdict::answer("tight summary of the content")});
        auto result = compress_to_budget(text, 50, {}, &stub);
        CHECK(result.level == CompressionLevel::L1);
        CHECK(count_whitespace_tokens(result.text) <= 50);
        REQUIRE(stub.calls() == 1);
        CHECK(stub.transcript()[0].max_output_tokens == 50);
    }

    SUBCASE("refused L1 escalates to L2 at 0.6x budget") {
        StubAdapter stub({AdapterVerdict::insufficient_context(),
                          AdapterVerdict::answer("short")});
        auto result = compress_to_budget(text, 50, {}, &stub);
        CHECK(result.level == CompressionLevel::L2);
        CHECK(result.text == "short");
        REQUIRE(stub.calls() == 2);
        CHECK(stub.transcript()[1].max_output_tokens == 30);
    }

    SUBCASE("adapter failure drops to deterministic truncation") {
        StubAdapter stub; // empty script: the first call throws
        auto result = compress_to_budget(text, 50, {}, &stub);
        CHECK(result.level == CompressionLevel::L3);
        CHECK(count_whitespace_tokens(result.text) == 50);
    }
}

TEST_CASE("L3 truncation equals the linear-scan oracle within a logarithmic probe bound") {
    auto oracle = [](const std::string& text, std::size_t budget,
                     const TokenCounter& count) {
        std::size_t best = 0;
        for (std::size_t len = 0; len <= text.size(); len++)
            if (count(text.substr(0, len)) <= budget) best = len;
        return text.substr(0, best);
    };

    std::mt19937 rng(7);
    for (int trial = 0; trial < 25; trial++) {
        const std::string text = random_paragraphs(rng, 8, 30);
        const std::size_t budget = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
        if (count_whitespace_tokens(text) <= budget) continue;

        std::size_t probes = 0;
        TokenCounter counting = [&](std::string_view s) {
            probes++;
            return count_whitespace_tokens(s);
        };
        auto result = compress_to_budget(text, budget, counting, nullptr);
        CHECK(result.level == CompressionLevel::L3);
        CHECK(result.text == oracle(text, budget, count_whitespace_tokens));
        CHECK(count_whitespace_tokens(result.text) <= budget);
        // One up-front full count plus the binary search probes.
        const auto bound =
            1 + static_cast<std::size_t>(std::ceil(std::log2(double(text.size()))));
        CHECK(probes <= bound);
    }

    SUBCASE("degenerate budgets") {
        CHECK(compress_to_budget("alpha beta", 1).text == "alpha ");
        CHECK(compress_to_budget("alpha beta", 0).text.empty());
        CHECK(compress_to_budget("", 5).level == CompressionLevel::None);
    }

    SUBCASE("a custom counter plugs in") {
        TokenCounter chars = [](std::string_view s) { return s.size(); };
        auto result = compress_to_budget("abcdef", 3, chars, nullptr);
        CHECK(result.level == CompressionLevel::L3);
        CHECK(result.text == "abc");
    }
}
