#pragma once

#include "lidx/alex.hpp"
#include "lidx/btree.hpp"
#include "lidx/error.hpp"
#include "lidx/key.hpp"
#include "lidx/pgm.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lidx {

enum class Structure { Pgm, Alex, BTree, Bandit, Pla };

const char *to_string(Structure s) noexcept;
Structure parse_structure(std::string_view name);

/// One sampled row. `ops` covers the operations since the previous row.
struct Measurement {
    std::uint64_t trial = 0;
    Structure structure = Structure::Pgm;
    std::uint64_t op_index = 0;
    std::uint64_t ops = 0;
    std::uint64_t bytes = 0;
    std::uint64_t ns = 0;
    std::uint64_t height = 0;
    std::string event; ///< semicolon-separated tags, e.g. "split=2;doubling=1"

    bool operator==(const Measurement &) const = default;
};

// ---- CSV ---------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "trial,structure,op_index,ops,bytes,ns,height,event";

void write_csv_header(std::ostream &out);
void write_csv_row(std::ostream &out, const Measurement &m);
void write_csv(std::ostream &out, std::span<const Measurement> rows);
std::string to_csv(std::span<const Measurement> rows);

/// Throws FormatError on a bad header, a wrong column count or a bad number.
std::vector<Measurement> parse_csv(std::istream &in);
std::vector<Measurement> parse_csv(std::string_view text);

/// CSV text with every ns cell zeroed; what determinism checks compare.
std::string csv_without_ns(std::span<const Measurement> rows);

// ---- events ------------------------------------------------------------------

enum class Tag : std::size_t { Split, SplitDown, Doubling, InnerSplit, Expand, Merge, Retrain, BudgetExceeded, Count };

inline constexpr std::array<const char *, static_cast<std::size_t>(Tag::Count)> kTagNames = {
    "split", "split_down", "doubling", "inner_split", "expand", "merge", "retrain", "budget_exceeded"};

struct EventCounts {
    std::array<std::uint64_t, static_cast<std::size_t>(Tag::Count)> n{};

    void add(Tag t, std::uint64_t k = 1) noexcept { n[static_cast<std::size_t>(t)] += k; }
    std::uint64_t get(Tag t) const noexcept { return n[static_cast<std::size_t>(t)]; }
    void merge(const EventCounts &o) noexcept {
        for (std::size_t i = 0; i < n.size(); ++i) n[i] += o.n[i];
    }
    void clear() noexcept { n.fill(0); }
    /// Non-zero tags in declaration order.
    std::string pack() const;
};

// ---- budget ------------------------------------------------------------------

enum class BudgetAction { Stop, Error };

struct MemoryBudget {
    std::uint64_t cap = 0;
    BudgetAction action = BudgetAction::Stop;

    MemoryBudget() = default;
    MemoryBudget(std::uint64_t cap_bytes, BudgetAction a) : cap(cap_bytes), action(a) {
        if (cap == 0) throw Error(ErrorCode::PreconditionViolation, "budget cap must be positive");
    }
};

// ---- subjects ----------------------------------------------------------------

struct InsertOutcome {
    bool inserted = false;
    std::uint64_t ops = 0;
    EventCounts events;
    std::span<const DoublingEvent> doublings;
};

template <IndexKey K>
class PgmSubject {
public:
    explicit PgmSubject(std::size_t epsilon) : idx_(epsilon) {}
    static constexpr Structure kind = Structure::Pgm;
    void load(std::span<const K> keys) { idx_.bulk_load(std::vector<K>(keys.begin(), keys.end())); }
    InsertOutcome insert(K k) {
        const PgmInsertReport r = idx_.insert(k);
        InsertOutcome o{r.inserted, r.ops, {}, {}};
        if (r.inserted && r.slot > 0) o.events.add(Tag::Merge);
        return o;
    }
    std::uint64_t bytes() const { return idx_.memory_bytes(); }
    std::uint64_t height() const { return idx_.height(); }
    const DynamicPgm<K> &index() const { return idx_; }

private:
    DynamicPgm<K> idx_;
};

template <IndexKey K>
class AlexSubject {
public:
    explicit AlexSubject(AlexConfig cfg = {}) : idx_(cfg) {}
    static constexpr Structure kind = Structure::Alex;
    void load(std::span<const K> keys) { idx_.bulk_load(keys); }
    InsertOutcome insert(K k) {
        last_ = idx_.insert(k, next_payload_++);
        InsertOutcome o{last_.inserted, last_.ops, {}, last_.doublings};
        for (const auto &s : last_.splits) o.events.add(s.downward ? Tag::SplitDown : Tag::Split);
        o.events.add(Tag::Doubling, last_.doublings.size());
        o.events.add(Tag::InnerSplit, last_.inner_splits.size());
        o.events.add(Tag::Expand, last_.expansions);
        return o;
    }
    std::uint64_t bytes() const { return idx_.memory_bytes(); }
    std::uint64_t height() const { return idx_.depth(); }
    const AlexIndex<K> &index() const { return idx_; }

private:
    AlexIndex<K> idx_;
    AlexInsertReport last_;
    Payload next_payload_ = 0;
};

template <IndexKey K>
class BTreeSubject {
public:
    explicit BTreeSubject(std::size_t branching = 64) : idx_(branching) {}
    static constexpr Structure kind = Structure::BTree;
    void load(std::span<const K> keys) {
        Payload p = 0;
        for (K k : keys) idx_.insert(k, p++);
    }
    InsertOutcome insert(K k) {
        // descent cost; splits show up as node-count growth
        const std::uint64_t ops = idx_.lookup(k).ops;
        const std::size_t nodes = idx_.node_count();
        InsertOutcome o{idx_.insert(k, idx_.size()), ops, {}, {}};
        o.events.add(Tag::Split, idx_.node_count() - nodes);
        return o;
    }
    std::uint64_t bytes() const { return idx_.memory_bytes(); }
    std::uint64_t height() const { return idx_.height(); }
    const BTree<K> &index() const { return idx_; }

private:
    BTree<K> idx_;
};

// ---- workload ----------------------------------------------------------------

struct WorkloadConfig {
    std::uint64_t trial = 0;
    std::uint64_t sample_every = 1000;
    std::optional<MemoryBudget> budget;
    bool track_doublings = false;
};

struct WorkloadSummary {
    std::uint64_t inserts = 0;   ///< stream keys consumed
    std::uint64_t inserted = 0;  ///< of those, new keys
    std::uint64_t final_bytes = 0;
    std::uint64_t peak_bytes = 0;
    std::uint64_t max_step_bytes = 0; ///< largest growth caused by a single insert
    bool budget_hit = false;
    std::uint64_t budget_hit_at = 0;
    EventCounts events;
    /// Per inner node, the pointer-array lengths after each doubling, in order.
    std::map<std::uint64_t, std::vector<std::size_t>> doubling_lengths;
};

/// Longest run of doublings on one node where every event doubles the length
/// left by the previous one.
std::size_t longest_doubling_chain(const std::map<std::uint64_t, std::vector<std::size_t>> &lengths);

using MeasurementSink = std::function<void(const Measurement &)>;

/// Replays `next()` into `subject` (already loaded). Emits an initial row, a row
/// every `sample_every` inserts and a final row for a partial window. When the
/// accounted bytes exceed the budget the terminal row carries budget_exceeded;
/// with BudgetAction::Error a BudgetExceeded error follows it.
template <typename Subject, typename Stream>
WorkloadSummary run_workload(Subject &subject, Stream &&next, const WorkloadConfig &cfg, const MeasurementSink &sink) {
    using Clock = std::chrono::steady_clock;
    if (cfg.sample_every == 0) throw Error(ErrorCode::PreconditionViolation, "sample_every must be positive");
    WorkloadSummary sum;
    EventCounts window;
    std::uint64_t window_ops = 0;
    std::uint64_t last_row = 0;
    auto t0 = Clock::now();
    const auto emit = [&](std::uint64_t at) {
        const auto now = Clock::now();
        Measurement m;
        m.trial = cfg.trial;
        m.structure = Subject::kind;
        m.op_index = at;
        m.ops = window_ops;
        m.bytes = subject.bytes();
        m.ns = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(now - t0).count());
        m.height = subject.height();
        m.event = window.pack();
        sink(m);
        window_ops = 0;
        window.clear();
        last_row = at;
        t0 = Clock::now();
    };

    sum.peak_bytes = sum.final_bytes = subject.bytes();
    emit(0);
    while (auto k = next()) {
        const std::uint64_t before = subject.bytes();
        const InsertOutcome o = subject.insert(*k);
        const std::uint64_t after = subject.bytes();
        ++sum.inserts;
        sum.inserted += o.inserted;
        window_ops += o.ops;
        window.merge(o.events);
        sum.events.merge(o.events);
        if (after > before) sum.max_step_bytes = std::max(sum.max_step_bytes, after - before);
        sum.peak_bytes = std::max(sum.peak_bytes, after);
        sum.final_bytes = after;
        if (cfg.track_doublings)
            for (const auto &d : o.doublings) sum.doubling_lengths[d.node_id].push_back(d.new_len);
        if (cfg.budget && after > cfg.budget->cap) {
            sum.budget_hit = true;
            sum.budget_hit_at = sum.inserts;
            window.add(Tag::BudgetExceeded);
            sum.events.add(Tag::BudgetExceeded);
            emit(sum.inserts);
            if (cfg.budget->action == BudgetAction::Error)
                throw Error(ErrorCode::BudgetExceeded, "accounted memory " + std::to_string(after) +
                                                           " exceeds cap " + std::to_string(cfg.budget->cap));
            return sum;
        }
        if (sum.inserts % cfg.sample_every == 0) emit(sum.inserts);
    }
    if (sum.inserts != last_row) emit(sum.inserts);
    return sum;
}

template <typename Subject, typename Stream>
std::vector<Measurement> run_workload(Subject &subject, Stream &&next, const WorkloadConfig &cfg,
                                      WorkloadSummary *summary = nullptr) {
    std::vector<Measurement> rows;
    WorkloadSummary s = run_workload(subject, std::forward<Stream>(next), cfg,
                                     MeasurementSink([&](const Measurement &m) { rows.push_back(m); }));
    if (summary) *summary = std::move(s);
    return rows;
}

} // namespace lidx
