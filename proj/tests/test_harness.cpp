#include "lidx/attack.hpp"
#include "lidx/harness.hpp"

#include <gtest/gtest.h>

#include <optional>

using namespace lidx;

namespace {

auto counter(std::uint64_t n, std::uint64_t step = 1, std::uint64_t start = 0) {
    return [i = std::uint64_t{0}, n, step, start]() mutable -> std::optional<std::uint64_t> {
        if (i == n) return std::nullopt;
        return start + step * i++;
    };
}

} // namespace

TEST(Csv, RoundTrip) {
    std::vector<Measurement> rows{
        {0, Structure::Pgm, 0, 0, 1024, 0, 1, ""},
        {3, Structure::Alex, 1000, 5321, 99999, 123456, 4, "split=2;doubling=1"},
        {7, Structure::BTree, 2000, 1, 2, 3, 2, "budget_exceeded=1"},
    };
    const std::string text = to_csv(rows);
    EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
    EXPECT_EQ(parse_csv(text), rows);
}

TEST(Csv, HeaderOnlyIsEmpty) {
    EXPECT_TRUE(parse_csv(std::string(kCsvHeader) + "\n").empty());
    EXPECT_EQ(to_csv({}), std::string(kCsvHeader) + "\n");
}

TEST(Csv, MalformedInputThrows) {
    const std::string h = std::string(kCsvHeader) + "\n";
    EXPECT_THROW(parse_csv("trial,structure\n"), FormatError);
    EXPECT_THROW(parse_csv(h + "0,pgm,1,2,3,4\n"), FormatError);
    EXPECT_THROW(parse_csv(h + "0,pgm,1,2,3,4,5,x,y\n"), FormatError);
    EXPECT_THROW(parse_csv(h + "0,pgm,1,-2,3,4,5,\n"), FormatError);
    EXPECT_THROW(parse_csv(h + "0,pgm,1,,3,4,5,\n"), FormatError);
    EXPECT_THROW(parse_csv(h + "0,heap,1,2,3,4,5,\n"), Error);
    try {
        parse_csv(h + "0,pgm,1,2,3,4,5,\n0,pgm,1,2,3,4,q,\n");
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_EQ(e.offset(), 3u);
    }
}

TEST(Csv, NsStrippedForComparison) {
    std::vector<Measurement> a{{0, Structure::Pgm, 0, 1, 2, 55, 1, ""}}, b = a;
    b[0].ns = 99;
    EXPECT_NE(to_csv(a), to_csv(b));
    EXPECT_EQ(csv_without_ns(a), csv_without_ns(b));
}

TEST(Events, PackSkipsZeroTagsInOrder) {
    EventCounts e;
    EXPECT_EQ(e.pack(), "");
    e.add(Tag::Doubling, 2);
    e.add(Tag::Split);
    EXPECT_EQ(e.pack(), "split=1;doubling=2");
    EventCounts f;
    f.add(Tag::Split, 4);
    e.merge(f);
    EXPECT_EQ(e.get(Tag::Split), 5u);
    e.clear();
    EXPECT_EQ(e.pack(), "");
}

TEST(Budget, ZeroCapRejected) {
    EXPECT_THROW(MemoryBudget(0, BudgetAction::Stop), Error);
}

TEST(Workload, EmptyStreamGivesOneRow) {
    PgmSubject<std::uint64_t> s(8);
    const auto rows = run_workload(s, counter(0), WorkloadConfig{});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].op_index, 0u);
    EXPECT_EQ(rows[0].ops, 0u);
}

TEST(Workload, RowCadenceAndOpsAccounting) {
    AlexSubject<std::uint64_t> s;
    std::vector<std::uint64_t> base;
    for (std::uint64_t k = 0; k < 1000; ++k) base.push_back(k * 100);
    s.load(base);
    WorkloadConfig cfg;
    cfg.sample_every = 100;
    cfg.trial = 4;
    WorkloadSummary sum;
    const auto rows = run_workload(s, counter(350, 97, 13), cfg, &sum);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows.back().op_index, 350u);
    std::uint64_t ops = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].trial, 4u);
        EXPECT_EQ(rows[i].structure, Structure::Alex);
        if (i + 1 < rows.size()) EXPECT_EQ(rows[i].op_index, 100 * i);
        ops += rows[i].ops;
    }
    EXPECT_GT(ops, 350u);
    EXPECT_EQ(sum.inserts, 350u);
    EXPECT_EQ(sum.final_bytes, rows.back().bytes);
    EXPECT_EQ(sum.final_bytes, s.bytes());
}

// PGM is excluded: a merge can refit into fewer segments.
TEST(Workload, BytesNeverShrinkUnderInserts) {
    WorkloadConfig cfg;
    cfg.sample_every = 50;
    AlexSubject<std::uint64_t> a;
    a.load(std::vector<std::uint64_t>{0, 30000000});
    BTreeSubject<std::uint64_t> b(8);
    for (const auto &rows : {run_workload(a, counter(3000, 7919, 1), cfg), run_workload(b, counter(3000, 7919), cfg)})
        for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].bytes, rows[i - 1].bytes);
}

TEST(Workload, BudgetStopEndsWithTaggedRow) {
    BTreeSubject<std::uint64_t> s(8);
    WorkloadConfig cfg;
    cfg.sample_every = 10;
    cfg.budget = MemoryBudget(20000, BudgetAction::Stop);
    WorkloadSummary sum;
    const auto rows = run_workload(s, counter(100000), cfg, &sum);
    EXPECT_TRUE(sum.budget_hit);
    EXPECT_LT(sum.inserts, 100000u);
    EXPECT_EQ(sum.budget_hit_at, sum.inserts);
    EXPECT_EQ(rows.back().op_index, sum.inserts);
    EXPECT_GT(rows.back().bytes, 20000u);
    EXPECT_NE(rows.back().event.find("budget_exceeded=1"), std::string::npos);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) EXPECT_LE(rows[i].bytes, 20000u);
}

TEST(Workload, BudgetErrorEmitsRowThenThrows) {
    BTreeSubject<std::uint64_t> s(8);
    WorkloadConfig cfg;
    cfg.budget = MemoryBudget(20000, BudgetAction::Error);
    std::vector<Measurement> rows;
    try {
        run_workload(s, counter(100000), cfg, [&](const Measurement &m) { rows.push_back(m); });
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
    }
    ASSERT_FALSE(rows.empty());
    EXPECT_NE(rows.back().event.find("budget_exceeded"), std::string::npos);
}

TEST(Workload, ZeroSampleIntervalRejected) {
    PgmSubject<std::uint64_t> s(8);
    WorkloadConfig cfg;
    cfg.sample_every = 0;
    EXPECT_THROW(run_workload(s, counter(1), cfg), Error);
}

TEST(Workload, DuplicatesCountedButNotInserted) {
    PgmSubject<std::uint64_t> s(8);
    s.load(std::vector<std::uint64_t>{0, 1, 2});
    WorkloadSummary sum;
    run_workload(s, counter(5), WorkloadConfig{}, &sum);
    EXPECT_EQ(sum.inserts, 5u);
    EXPECT_EQ(sum.inserted, 2u);
}

TEST(Workload, DeterministicApartFromTiming) {
    const auto once = [] {
        AlexSubject<std::uint64_t> s;
        s.load(std::vector<std::uint64_t>{0, 1000000});
        AlexAttackStream<std::uint64_t> a(AlexAttackConfig<std::uint64_t>{200, 1, 0, 1000000, 4000, 5});
        WorkloadConfig cfg;
        cfg.sample_every = 500;
        return csv_without_ns(run_workload(s, [&] { return a.next(); }, cfg));
    };
    EXPECT_EQ(once(), once());
}

TEST(Workload, AlexEventsMatchSummary) {
    AlexSubject<std::uint64_t> s;
    s.load(std::vector<std::uint64_t>{0, 1000000});
    AlexAttackStream<std::uint64_t> a(AlexAttackConfig<std::uint64_t>{500, 1, 0, 1000000, 20000, 9});
    WorkloadConfig cfg;
    cfg.sample_every = 1000;
    cfg.track_doublings = true;
    WorkloadSummary sum;
    const auto rows = run_workload(s, [&] { return a.next(); }, cfg, &sum);
    EventCounts from_rows;
    for (const auto &r : rows) {
        std::string_view ev = r.event;
        while (!ev.empty()) {
            const auto semi = ev.find(';');
            const auto item = ev.substr(0, semi);
            const auto eq = item.find('=');
            for (std::size_t t = 0; t < kTagNames.size(); ++t)
                if (item.substr(0, eq) == kTagNames[t])
                    from_rows.add(static_cast<Tag>(t), std::stoull(std::string(item.substr(eq + 1))));
            ev = semi == std::string_view::npos ? std::string_view{} : ev.substr(semi + 1);
        }
    }
    EXPECT_EQ(from_rows.n, sum.events.n);
    std::size_t doublings = 0;
    for (const auto &[node, lens] : sum.doubling_lengths) doublings += lens.size();
    EXPECT_EQ(doublings, sum.events.get(Tag::Doubling));
    EXPECT_GT(sum.events.get(Tag::Split) + sum.events.get(Tag::SplitDown), 0u);
}

TEST(DoublingChain, LongestRunPerNode) {
    std::map<std::uint64_t, std::vector<std::size_t>> m;
    EXPECT_EQ(longest_doubling_chain(m), 0u);
    m[1] = {4, 8, 16, 16, 32, 64, 128, 256};
    m[2] = {2, 4};
    EXPECT_EQ(longest_doubling_chain(m), 5u);
    m[3] = {8};
    m[1] = {4, 4};
    EXPECT_EQ(longest_doubling_chain(m), 2u);
}

TEST(Structures, NamesRoundTrip) {
    for (auto s : {Structure::Pgm, Structure::Alex, Structure::BTree, Structure::Bandit, Structure::Pla})
        EXPECT_EQ(parse_structure(to_string(s)), s);
    EXPECT_THROW(parse_structure("heap"), Error);
}
