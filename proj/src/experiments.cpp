#include "lidx/experiments.hpp"

#include "lidx/datasets.hpp"
#include "lidx/oracles.hpp"
#include "lidx/pla.hpp"
#include "lidx/trials.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

namespace lidx::exp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

template <IndexKey K>
std::vector<K> random_pla_keys(std::size_t m, Rng &rng) {
    std::vector<K> keys;
    if constexpr (std::same_as<K, std::uint64_t>) {
        static constexpr std::uint64_t kWidths[] = {1, 4, 1000, std::uint64_t{1} << 40};
        const std::uint64_t width = kWidths[rng.below(4)] * m;
        const std::uint64_t base = rng.below(std::uint64_t{1} << 62);
        for (auto v : sample_indices(width, m, rng)) keys.push_back(base + v);
    } else {
        const bool clumped = rng.below(2) == 0;
        std::set<double> seen;
        while (seen.size() < m) {
            const double centre = clumped ? static_cast<double>(rng.below(4)) * 100.0 : 0.0;
            seen.insert(centre + sample_real(DistSpec::normal(0, clumped ? 0.5 : 50.0), rng));
        }
        keys.assign(seen.begin(), seen.end());
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

struct PlaCase {
    std::size_t segments = 0;
    std::size_t optimum = 0;
    std::size_t keys = 0;
    std::size_t epsilon = 0;
    bool real = false;
};

PlaCase pla_case(std::size_t i, std::size_t max_keys, std::uint64_t seed) {
    static constexpr std::size_t kEps[] = {1, 2, 4};
    Rng rng(derive_seed(seed, i));
    PlaCase c;
    c.epsilon = kEps[i % 3];
    c.real = i % 2 == 1;
    const std::size_t m = 1 + rng.below(max_keys);
    c.keys = m;
    if (c.real) {
        const auto keys = random_pla_keys<double>(m, rng);
        c.segments = fit_segments(std::span<const double>(keys), c.epsilon).segments.size();
        c.optimum = oracle::min_segments(std::span<const double>(keys), c.epsilon);
    } else {
        const auto keys = random_pla_keys<std::uint64_t>(m, rng);
        c.segments = fit_segments(std::span<const std::uint64_t>(keys), c.epsilon).segments.size();
        c.optimum = oracle::min_segments(std::span<const std::uint64_t>(keys), c.epsilon);
    }
    return c;
}

// The ALEX root range is fixed by the loaded keys, so held-out keys beyond
// them cannot be replayed.
template <IndexKey K>
std::vector<K> within(std::vector<K> held, const Dataset<K> &load) {
    std::erase_if(held, [&](K k) { return k < load.keys.front() || load.keys.back() < k; });
    return held;
}

Measurement row(std::uint64_t trial, Structure s, std::uint64_t op_index, std::uint64_t ops, std::uint64_t bytes,
                std::uint64_t height, std::string event) {
    Measurement m;
    m.trial = trial;
    m.structure = s;
    m.op_index = op_index;
    m.ops = ops;
    m.bytes = bytes;
    m.height = height;
    m.event = std::move(event);
    return m;
}

} // namespace

// ---- PLA -----------------------------------------------------------------------

PlaSuiteResult pla_optimality(std::size_t instances, std::size_t max_keys, std::uint64_t seed, int jobs) {
    if (max_keys == 0 || max_keys > oracle::kMaxOracleKeys)
        throw Error(ErrorCode::OracleTooLarge, "instance size outside the oracle's range");
    const auto cases = run_trials(instances, [&](std::size_t i) { return pla_case(i, max_keys, seed); }, jobs);
    PlaSuiteResult r;
    r.instances = instances;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const PlaCase &c = cases[i];
        if (c.segments != c.optimum) {
            if (r.mismatches++ == 0)
                r.first_mismatch = "instance " + std::to_string(i) + ": " + std::to_string(c.segments) + " segments, optimum " +
                                   std::to_string(c.optimum);
        }
        r.rows.push_back(row(i, Structure::Pla, c.keys, c.segments, 0, c.optimum,
                             "eps=" + std::to_string(c.epsilon) + (c.real ? ";f64" : ";u64")));
    }
    return r;
}

// ---- PGM -----------------------------------------------------------------------

PgmOracleResult pgm_oracle(std::size_t n, std::size_t probes, std::size_t epsilon, std::uint64_t seed) {
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(5e6, 1e6), n, derive_seed(seed, 0));
    const StaticPgm<std::uint64_t> idx(ds.keys, epsilon);
    const std::span<const std::uint64_t> sorted(ds.keys);
    PgmOracleResult r;
    r.probes = probes;
    r.height = idx.height();
    r.ops_bound = idx.ops_bound();
    Rng rng(derive_seed(seed, 1));
    const std::uint64_t lo = ds.keys.front() - std::min<std::uint64_t>(ds.keys.front(), 1000);
    const std::uint64_t hi = ds.keys.back() + 1000;
    std::uint64_t window_ops = 0;
    for (std::size_t i = 0; i < probes; ++i) {
        const std::uint64_t k = i % 2 == 0 ? ds.keys[rng.below(ds.size())] : lo + rng.below(hi - lo);
        const SearchResult got = idx.lookup(k);
        const auto [found, pos] = oracle::sorted_lookup(sorted, k);
        r.disagreements += got.found != found || got.position != pos;
        r.bound_violations += got.ops > r.ops_bound;
        r.window_violations += !idx.window_sound(k);
        r.max_ops = std::max(r.max_ops, got.ops);
        window_ops += got.ops;
        if ((i + 1) % 1000 == 0 || i + 1 == probes) {
            r.rows.push_back(row(0, Structure::Pgm, i + 1, window_ops, idx.memory_bytes(), r.height, ""));
            window_ops = 0;
        }
    }
    return r;
}

PgmDynamicResult pgm_dynamic(std::size_t steps, std::size_t n_max, std::size_t epsilon, std::uint64_t seed) {
    PgmDynamicResult r;
    r.steps = steps;
    const DistSpec spec = DistSpec::normal(5e6, 1e6);
    {
        DynamicPgm<std::uint64_t> idx(epsilon);
        std::set<std::uint64_t> ref;
        Rng rng(derive_seed(seed, 0));
        const auto draw = [&] { return static_cast<std::uint64_t>(std::max(0.0, std::round(sample_real(spec, rng)))); };
        for (std::size_t i = 0; i < steps; ++i) {
            const std::uint64_t k = draw();
            const bool fresh = ref.insert(k).second;
            const PgmInsertReport rep = idx.insert(k);
            r.mismatches += rep.inserted != fresh;
            // probe a known key or a fresh draw, alternately
            const std::uint64_t q = i % 2 == 0 ? k : draw();
            const DynSearchResult got = idx.lookup(q);
            const bool present = ref.contains(q);
            r.mismatches += got.found != present;
            if (!present)
                r.mismatches += got.position != static_cast<std::size_t>(std::distance(ref.begin(), ref.lower_bound(q)));
        }
        std::vector<std::uint64_t> all;
        for (const auto &c : idx.components())
            if (c) all.insert(all.end(), c->keys().begin(), c->keys().end());
        std::sort(all.begin(), all.end());
        r.final_set_equal = idx.size() == ref.size() && std::equal(all.begin(), all.end(), ref.begin(), ref.end());
    }

    const auto ds = gen_dataset<std::uint64_t>(spec, n_max, derive_seed(seed, 1));
    std::vector<std::uint64_t> order = ds.keys;
    std::shuffle(order.begin(), order.end(), Rng(derive_seed(seed, 2)));
    DynamicPgm<std::uint64_t> idx(epsilon);
    std::uint64_t total = 0, window = 0;
    const std::uint64_t step = std::max<std::uint64_t>(1, n_max / 10);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::uint64_t ops = idx.insert(order[i]).ops;
        total += ops;
        window += ops;
        const std::uint64_t n = i + 1;
        if (n % step == 0) {
            r.amortized.emplace_back(n, static_cast<double>(total) / static_cast<double>(n));
            r.rows.push_back(row(0, Structure::Pgm, n, window, idx.memory_bytes(), idx.height(), ""));
            window = 0;
        }
    }
    double num = 0, den = 0;
    for (const auto &[n, a] : r.amortized) {
        const double l = std::log2(static_cast<double>(n));
        num += a * l;
        den += l * l;
    }
    r.c = den > 0 ? num / den : 0;
    for (const auto &[n, a] : r.amortized)
        r.worst_ratio = std::max(r.worst_ratio, a / (r.c * std::log2(static_cast<double>(n))));
    return r;
}

namespace {

struct LeakInstance {
    ProbeStats pgm;
    ProbeStats btree;
    std::uint64_t pgm_bytes = 0;
    std::uint64_t btree_bytes = 0;
};

LeakInstance leak_instance(const PgmLeakageConfig &cfg, Label label, std::uint64_t seed) {
    const double mu = 5e6, sigma = 1e6;
    const DistSpec spec = label == Label::A ? DistSpec::normal(mu, sigma) : DistSpec::mixture(mu, sigma, 50);
    auto victim = gen_dataset<std::uint64_t>(spec, cfg.n, derive_seed(seed, 0));
    const auto mine = gen_attacker_keys<std::uint64_t>(static_cast<std::uint64_t>(mu - 2 * sigma),
                                                       static_cast<std::uint64_t>(mu + 2 * sigma), cfg.attacker_keys,
                                                       derive_seed(seed, 1));
    std::vector<std::uint64_t> keys;
    keys.reserve(victim.size() + mine.size());
    std::set_union(victim.keys.begin(), victim.keys.end(), mine.begin(), mine.end(), std::back_inserter(keys));

    LeakInstance out;
    const StaticPgm<std::uint64_t> pgm(keys, cfg.epsilon);
    out.pgm = pgm_probe(pgm, std::span<const std::uint64_t>(mine));
    out.pgm_bytes = pgm.memory_bytes();
    // the control is filled in arrival order; sorted inserts would leave every
    // node half full except the right spine and tie lookup cost to key rank
    std::vector<std::uint64_t> arrival = keys;
    std::shuffle(arrival.begin(), arrival.end(), Rng(derive_seed(seed, 2)));
    BTree<std::uint64_t> bt(cfg.btree_branching);
    for (std::size_t i = 0; i < arrival.size(); ++i) bt.insert(arrival[i], i);
    out.btree = pgm_probe(bt, std::span<const std::uint64_t>(mine));
    out.btree_bytes = bt.memory_bytes();
    return out;
}

std::uint64_t sum_ops(const ProbeStats &s) {
    std::uint64_t t = 0;
    for (auto v : s.per_key_ops) t += v;
    return t;
}

} // namespace

PgmLeakageResult pgm_leakage(const PgmLeakageConfig &cfg, int jobs) {
    // instance i < 2 * calibration: calibration (A, B alternating on a shared
    // seed index); the rest: test instances, A then B alternating
    const std::size_t cal_n = 2 * cfg.calibration;
    const std::size_t total = cal_n + cfg.test;
    const auto label_of = [&](std::size_t i) { return i % 2 == 0 ? Label::A : Label::B; };
    const auto seed_of = [&](std::size_t i) {
        return i < cal_n ? derive_seed(cfg.seed, i / 2) : derive_seed(cfg.seed ^ 0x7e57, i - cal_n);
    };
    const auto inst = run_trials(total, [&](std::size_t i) { return leak_instance(cfg, label_of(i), seed_of(i)); }, jobs);

    PgmLeakageResult r;
    std::vector<ProbeStats> pa, pb, ba, bb;
    for (std::size_t i = 0; i < cal_n; i += 2) {
        pa.push_back(inst[i].pgm);
        pb.push_back(inst[i + 1].pgm);
        ba.push_back(inst[i].btree);
        bb.push_back(inst[i + 1].btree);
        ++r.pairs;
        r.taller_a += inst[i].pgm.height > inst[i + 1].pgm.height;
        r.ties += inst[i].pgm.height == inst[i + 1].pgm.height;
    }
    r.cal = calibrate(pa, pb);
    try {
        r.btree_cal = calibrate(ba, bb);
    } catch (const Error &e) {
        if (e.code() != ErrorCode::AmbiguousCalibration) throw;
        r.btree_ambiguous = true;
    }
    for (std::size_t i = cal_n; i < total; ++i) {
        const Label truth = label_of(i);
        ++r.tested;
        r.correct += pgm_classify(inst[i].pgm, r.cal) == truth;
        // an undecidable control always answers A
        const Label bt = r.btree_ambiguous ? Label::A : pgm_classify(inst[i].btree, r.btree_cal);
        r.btree_correct += bt == truth;
    }
    for (std::size_t i = 0; i < total; ++i) {
        const std::string tag = std::string(to_string(label_of(i))) + (i < cal_n ? ";calibrate" : ";test");
        r.rows.push_back(row(i, Structure::Pgm, cfg.attacker_keys, sum_ops(inst[i].pgm), inst[i].pgm_bytes,
                             inst[i].pgm.height, tag));
        r.rows.push_back(row(i, Structure::BTree, cfg.attacker_keys, sum_ops(inst[i].btree), inst[i].btree_bytes,
                             inst[i].btree.height, tag));
    }
    return r;
}

// ---- ALEX ----------------------------------------------------------------------

AlexBlowupResult alex_blowup(const AlexBlowupConfig &cfg) {
    AlexBlowupResult r;
    const std::size_t holdout = std::max<std::size_t>(1, cfg.n / 10);
    const auto full = gen_dataset<double>(DistSpec::normal(0, 1), cfg.n + holdout, derive_seed(cfg.seed, 0));
    auto [load, held] = split_holdout(full, holdout, derive_seed(cfg.seed, 1));
    const std::span<const double> existing(load.keys);
    AlexConfig acfg;
    acfg.max_node_bytes = cfg.max_node_bytes;

    {
        const auto [lo, hi] = sample_range_estimate(load, std::min(cfg.range_sample, load.size()), derive_seed(cfg.seed, 2));
        AlexAttackConfig<double> att;
        att.per_location = cfg.per_location;
        att.delta = AlexAttackConfig<double>::default_delta();
        att.lo = lo;
        att.hi = hi;
        att.total = cfg.max_inserts;
        att.seed = derive_seed(cfg.seed, 3);
        AlexAttackStream<double> stream(att, existing);
        AlexSubject<double> subject(acfg);
        subject.load(existing);
        r.initial_bytes = subject.bytes();
        WorkloadConfig wc;
        wc.trial = 0;
        wc.sample_every = cfg.sample_every;
        wc.budget = MemoryBudget(cfg.budget, BudgetAction::Stop);
        wc.track_doublings = true;
        auto rows = run_workload(subject, [&] { return stream.next(); }, wc, &r.attack);
        r.rows.insert(r.rows.end(), rows.begin(), rows.end());
        r.clusters = stream.clusters();
        r.longest_chain = longest_doubling_chain(r.attack.doubling_lengths);
    }
    {
        BenignStream<double> stream(within(std::move(held), load), load.keys.front(), load.keys.back(), r.attack.inserts,
                                    derive_seed(cfg.seed, 4), existing);
        AlexSubject<double> subject(acfg);
        subject.load(existing);
        WorkloadConfig wc;
        wc.trial = 1;
        wc.sample_every = cfg.sample_every;
        auto rows = run_workload(subject, [&] { return stream.next(); }, wc, &r.benign);
        r.rows.insert(r.rows.end(), rows.begin(), rows.end());
    }
    return r;
}

namespace {

struct BoundsWorkload {
    const char *name;
    bool real;
    DistSpec dist;
    std::size_t n;
    std::size_t node_bytes;
    bool attack;
    std::size_t inserts;
    std::size_t per_location;
};

template <IndexKey K>
AlexBoundsRow bounds_run(const BoundsWorkload &w, std::uint64_t seed, std::vector<Measurement> &rows, std::uint64_t trial) {
    const std::size_t holdout = w.n / 10;
    const auto full = gen_dataset<K>(w.dist, w.n + holdout, derive_seed(seed, 0));
    auto [load, held] = split_holdout(full, holdout, derive_seed(seed, 1));
    AlexConfig cfg;
    cfg.max_node_bytes = w.node_bytes;
    AlexSubject<K> subject(cfg);
    subject.load(std::span<const K>(load.keys));
    std::set<K> ref(load.keys.begin(), load.keys.end());
    WorkloadConfig wc;
    wc.trial = trial;
    wc.sample_every = std::max<std::size_t>(1, w.inserts / 20);
    const auto record = [&](auto &stream) {
        return [&stream, &ref]() -> std::optional<K> {
            auto k = stream.next();
            if (k) ref.insert(*k);
            return k;
        };
    };
    std::vector<Measurement> got;
    if (w.attack) {
        const auto [lo, hi] = sample_range_estimate(load, std::min<std::size_t>(1000, load.size()), derive_seed(seed, 2));
        AlexAttackConfig<K> att;
        att.per_location = w.per_location;
        att.delta = AlexAttackConfig<K>::default_delta();
        att.lo = lo;
        att.hi = hi;
        att.total = w.inserts;
        att.seed = derive_seed(seed, 3);
        AlexAttackStream<K> stream(att, std::span<const K>(load.keys));
        got = run_workload(subject, record(stream), wc);
    } else {
        BenignStream<K> stream(within(std::move(held), load), load.keys.front(), load.keys.back(), w.inserts, derive_seed(seed, 4),
                               std::span<const K>(load.keys));
        got = run_workload(subject, record(stream), wc);
    }
    rows.insert(rows.end(), got.begin(), got.end());

    const AlexIndex<K> &idx = subject.index();
    const std::vector<K> keys(ref.begin(), ref.end());
    AlexBoundsRow out;
    out.name = w.name;
    out.keys = keys.size();
    out.depth = idx.depth();
    std::tie(out.partitions, out.bound) = alex_depth_bound(idx, std::span<const K>(keys));
    out.keys_equal = idx.keys_in_order() == keys;
    out.lookups_ok = std::all_of(keys.begin(), keys.end(), [&](K k) { return idx.lookup(k).found; });
    out.invalid = idx.validate();
    return out;
}

} // namespace

AlexBoundsResult alex_bounds(std::uint64_t seed, int jobs) {
    const std::vector<BoundsWorkload> ws = {
        {"normal-f64-benign", true, DistSpec::normal(0, 1), 100000, 64 * 1024, false, 100000, 0},
        {"normal-f64-benign-small-nodes", true, DistSpec::normal(0, 1), 50000, 2048, false, 100000, 0},
        {"mixture-u64-benign", false, DistSpec::mixture(5e6, 1e6, 50), 50000, 4096, false, 100000, 0},
        {"uniform-u64-benign", false, DistSpec::uniform(0, 1e9), 20000, 1024, false, 50000, 0},
        {"normal-u64-attack", false, DistSpec::normal(5e6, 1e6), 100000, 4096, true, 200000, 1000},
        {"normal-u64-attack-wide-nodes", false, DistSpec::normal(5e6, 1e6), 100000, 64 * 1024, true, 200000, 10000},
    };
    std::vector<std::vector<Measurement>> rows(ws.size());
    const auto out = run_trials(ws.size(), [&](std::size_t i) {
        const std::uint64_t s = derive_seed(seed, i);
        return ws[i].real ? bounds_run<double>(ws[i], s, rows[i], i) : bounds_run<std::uint64_t>(ws[i], s, rows[i], i);
    }, jobs);
    AlexBoundsResult r;
    r.workloads = out;
    for (auto &v : rows) r.rows.insert(r.rows.end(), v.begin(), v.end());
    return r;
}

// ---- bandit --------------------------------------------------------------------

BanditCampaignResult bandit_campaign(const bandit::CampaignConfig &cfg, int jobs) {
    bandit::UniverseConfig ucfg;
    ucfg.queries = cfg.universe;
    ucfg.arms = cfg.optimizer.arms;
    ucfg.dim = cfg.optimizer.dim;
    ucfg.separation = cfg.separation;
    ucfg.seed = derive_seed(cfg.seed, 0);
    const auto universe = bandit::gen_query_universe(ucfg);
    if (cfg.targets > universe.size()) throw Error(ErrorCode::InsufficientData, "more targets than queries");
    Rng rng(derive_seed(cfg.seed, 1));
    auto targets = sample_indices(universe.size(), cfg.targets, rng);
    std::sort(targets.begin(), targets.end());

    BanditCampaignResult r;
    r.targets = run_trials(targets.size(), [&](std::size_t i) {
        return bandit::run_target(universe, targets[i], cfg, derive_seed(cfg.seed, 100 + targets[i]));
    }, jobs);
    r.table = bandit::group_table(r.targets);
    std::size_t checks = 0, matches = 0, verdicts = 0, correct = 0, high = 0;
    double tv = 0, null_tv = 0;
    for (const auto &t : r.targets) {
        checks += t.arm_checks;
        matches += t.arm_matches;
        verdicts += t.verdicts;
        correct += t.verdicts_correct;
        tv += t.tv;
        null_tv += t.null_tv;
        high += bandit::precision_group(t.member_precision) >= 3 || bandit::precision_group(t.nonmember_precision) >= 3;
    }
    const auto n = static_cast<double>(std::max<std::size_t>(1, r.targets.size()));
    r.arm_accuracy = checks ? static_cast<double>(matches) / static_cast<double>(checks) : 0;
    r.verdict_accuracy = verdicts ? static_cast<double>(correct) / static_cast<double>(verdicts) : 0;
    r.mean_tv = tv / n;
    r.mean_null_tv = null_tv / n;
    r.high_precision_share = static_cast<double>(high) / n;
    return r;
}

std::string group_table_csv(const std::vector<bandit::GroupRow> &table) {
    std::ostringstream os;
    os << "precision_group,member_pct,member_recall,nonmember_pct,nonmember_recall\n";
    for (const auto &g : table)
        os << g.group << ',' << fmt(g.member_pct, 2) << ',' << fmt(g.member_recall) << ',' << fmt(g.nonmember_pct, 2)
           << ',' << fmt(g.nonmember_recall) << '\n';
    return os.str();
}

std::string targets_csv(const std::vector<bandit::TargetResult> &targets) {
    const auto dist = [](const std::vector<double> &d) {
        std::string s;
        for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ";" : "") + fmt(d[i], 2);
        return s;
    };
    std::ostringstream os;
    os << "query,tv,null_tv,member_arm,member_precision,member_recall,nonmember_arm,nonmember_precision,nonmember_recall,"
          "arm_matches,arm_checks,verdicts_correct,verdicts,member_dist,nonmember_dist\n";
    for (const auto &t : targets)
        os << t.query_id << ',' << fmt(t.tv) << ',' << fmt(t.null_tv) << ',' << t.member_rule.arm << ',' << fmt(t.member_precision) << ','
           << fmt(t.member_recall) << ',' << t.nonmember_rule.arm << ',' << fmt(t.nonmember_precision) << ','
           << fmt(t.nonmember_recall) << ',' << t.arm_matches << ',' << t.arm_checks << ',' << t.verdicts_correct << ','
           << t.verdicts << ',' << dist(t.member_dist) << ',' << dist(t.nonmember_dist) << '\n';
    return os.str();
}

// ---- oracle suites -------------------------------------------------------------

namespace {

std::string pgm_suite_case(std::size_t i, std::uint64_t seed) {
    Rng rng(derive_seed(seed, i));
    const std::size_t n = 1 + rng.below(3000);
    const std::size_t eps = 1 + rng.below(64);
    const DistSpec spec = rng.below(2) ? DistSpec::normal(1e6, 1e5) : DistSpec::mixture(1e6, 1e5, 8);
    const auto ds = gen_dataset<std::uint64_t>(spec, n, rng());
    const StaticPgm<std::uint64_t> idx(ds.keys, eps);
    const std::span<const std::uint64_t> sorted(ds.keys);
    for (std::size_t q = 0; q < 2 * n; ++q) {
        const std::uint64_t k = q < n ? ds.keys[q] : ds.keys.front() / 2 + rng.below(ds.keys.back());
        const SearchResult got = idx.lookup(k);
        const auto [found, pos] = oracle::sorted_lookup(sorted, k);
        if (got.found != found || got.position != pos) return "lookup(" + std::to_string(k) + ") disagrees";
        if (got.ops > idx.ops_bound()) return "ops above bound for " + std::to_string(k);
    }
    return {};
}

std::string alex_suite_case(std::size_t i, std::uint64_t seed) {
    Rng rng(derive_seed(seed, i));
    const std::size_t n = 1 + rng.below(5000);
    const auto ds = gen_dataset<std::uint64_t>(DistSpec::normal(1e6, 1e5), n, rng());
    AlexConfig cfg;
    cfg.max_node_bytes = std::size_t{512} << rng.below(4);
    AlexIndex<std::uint64_t> idx(cfg);
    idx.bulk_load(std::span<const std::uint64_t>(ds.keys));
    std::set<std::uint64_t> ref(ds.keys.begin(), ds.keys.end());
    const std::uint64_t lo = idx.root_lo(), hi = idx.root_hi();
    const std::size_t inserts = rng.below(4 * n + 1);
    const bool clustered = rng.below(2) == 0;
    std::uint64_t x = lo + rng.below(hi - lo);
    for (std::size_t j = 0; j < inserts; ++j) {
        if (!clustered || j % 200 == 0) x = lo + rng.below(hi - lo);
        else if (x > lo) --x;
        const bool fresh = ref.insert(x).second;
        if (idx.insert(x, x).inserted != fresh) return "insert(" + std::to_string(x) + ") disagrees on novelty";
    }
    const std::vector<std::uint64_t> keys(ref.begin(), ref.end());
    if (idx.keys_in_order() != keys) return "key set differs";
    if (auto v = idx.validate(); !v.empty()) return v;
    if (idx.memory_bytes() != idx.recount_bytes()) return "byte accounting drifted";
    for (auto k : keys)
        if (!idx.lookup(k).found) return "lost key " + std::to_string(k);
    const auto [p, bound] = alex_depth_bound(idx, std::span<const std::uint64_t>(keys));
    if (idx.depth() > bound) return "depth " + std::to_string(idx.depth()) + " above bound " + std::to_string(bound);
    return {};
}

std::string btree_suite_case(std::size_t i, std::uint64_t seed) {
    Rng rng(derive_seed(seed, i));
    const std::size_t b = 4 + 2 * rng.below(7);
    BTree<std::uint64_t> t(b);
    std::set<std::uint64_t> ref;
    const std::size_t n = rng.below(4000);
    const std::uint64_t width = 1 + rng.below(3 * n + 2);
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t k = rng.below(width);
        if (t.insert(k, k) != ref.insert(k).second) return "insert novelty disagrees";
    }
    const std::vector<std::uint64_t> keys(ref.begin(), ref.end());
    if (t.keys_in_order() != keys) return "key order differs";
    if (!t.balanced()) return "unbalanced";
    for (std::uint64_t k = 0; k <= width; ++k) {
        const SearchResult got = t.lookup(k);
        const auto [found, pos] = oracle::sorted_lookup(std::span<const std::uint64_t>(keys), k);
        if (got.found != found || got.position != pos) return "lookup(" + std::to_string(k) + ") disagrees";
    }
    // a B-tree of n keys is at most 1 + log_{ceil(B/2)}((n + 1) / 2) levels tall
    const double min_fan = static_cast<double>((t.branching() + 1) / 2);
    const double limit = keys.empty() ? 1 : 1 + std::log((static_cast<double>(keys.size()) + 1) / 2) / std::log(min_fan);
    if (static_cast<double>(t.height()) > limit + 1e-9) return "height above the B-tree bound";
    return {};
}

} // namespace

OracleCheckResult oracle_check(std::string_view suite, std::size_t instances, std::uint64_t seed) {
    OracleCheckResult r;
    r.instances = instances;
    if (suite == "pla") {
        const auto s = pla_optimality(instances, 64, seed, 0);
        r.mismatches = s.mismatches;
        r.first_failure = s.first_mismatch;
        return r;
    }
    std::string (*one)(std::size_t, std::uint64_t) = nullptr;
    if (suite == "pgm") one = pgm_suite_case;
    else if (suite == "alex") one = alex_suite_case;
    else if (suite == "btree") one = btree_suite_case;
    else throw Error(ErrorCode::PreconditionViolation, "unknown oracle suite '" + std::string(suite) + "'");
    const auto out = run_trials(instances, [&](std::size_t i) { return one(i, seed); }, 0);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!out[i].empty() && r.mismatches++ == 0) r.first_failure = "instance " + std::to_string(i) + ": " + out[i];
    return r;
}

// ---- acceptance ----------------------------------------------------------------

namespace {

void check(CriterionReport &rep, const char *clause, bool ok) {
    if (!ok) rep.failed.emplace_back(clause);
}

} // namespace

CriterionReport run_criterion(int id, const AcceptanceOptions &opt) {
    CriterionReport rep;
    rep.id = id;
    const std::uint64_t seed = derive_seed(opt.seed, static_cast<std::uint64_t>(id));
    const auto t0 = Clock::now();
    std::ostringstream detail;
    switch (id) {
    case 1: {
        rep.name = "PLA optimality";
        const auto r = pla_optimality(1000, 64, seed, opt.jobs);
        rep.seconds = seconds_since(t0);
        check(rep, "optimal", r.mismatches == 0);
        check(rep, "runtime", rep.seconds < 10);
        detail << r.instances - r.mismatches << "/" << r.instances << " optimal";
        if (!r.first_mismatch.empty()) detail << "; " << r.first_mismatch;
        rep.fingerprint = csv_without_ns(r.rows);
        break;
    }
    case 2: {
        rep.name = "PGM lookups vs oracle";
        const auto r = pgm_oracle(100000, 10000, 64, seed);
        rep.seconds = seconds_since(t0);
        check(rep, "agreement", r.disagreements == 0);
        check(rep, "ops_bound", r.bound_violations == 0 && r.window_violations == 0);
        detail << r.probes - r.disagreements << "/" << r.probes << " agree, max ops " << r.max_ops << " <= bound "
               << r.ops_bound << " (height " << r.height << "), bound violations " << r.bound_violations;
        rep.fingerprint = csv_without_ns(r.rows);
        break;
    }
    case 3: {
        rep.name = "PGM dynamic inserts";
        const auto r = pgm_dynamic(10000, 100000, 64, seed);
        rep.seconds = seconds_since(t0);
        check(rep, "reference_set", r.mismatches == 0 && r.final_set_equal);
        check(rep, "log_growth", r.worst_ratio <= 1.2);
        detail << "mismatches " << r.mismatches << ", set equal " << (r.final_set_equal ? "yes" : "no")
               << ", amortized ops ~ " << fmt(r.c, 2) << " * log2(n), worst ratio " << fmt(r.worst_ratio, 3);
        rep.fingerprint = csv_without_ns(r.rows);
        break;
    }
    case 4: {
        rep.name = "PGM distribution leakage";
        PgmLeakageConfig cfg;
        cfg.seed = seed;
        const auto r = pgm_leakage(cfg, opt.jobs);
        rep.seconds = seconds_since(t0);
        check(rep, "height", r.height_fraction() >= 0.9);
        check(rep, "accuracy", r.accuracy() >= 0.95);
        check(rep, "btree_control", r.btree_accuracy() <= 0.6);
        check(rep, "runtime", rep.seconds < 300);
        detail << "height(A)>height(B) " << r.taller_a << "/" << r.pairs << " (ties " << r.ties << "), accuracy "
               << fmt(r.accuracy(), 3) << ", B-tree control " << fmt(r.btree_accuracy(), 3) << ", mean ops A "
               << fmt(r.cal.mean_a, 2) << " B " << fmt(r.cal.mean_b, 2);
        rep.fingerprint = csv_without_ns(r.rows);
        break;
    }
    case 5: {
        rep.name = "ALEX memory blowup";
        AlexBlowupConfig cfg;
        cfg.seed = seed;
        const auto r = alex_blowup(cfg);
        rep.seconds = seconds_since(t0);
        const double benign_share = static_cast<double>(r.benign.peak_bytes) / static_cast<double>(cfg.budget);
        check(rep, "attack_budget", r.attack.budget_hit);
        check(rep, "benign_below_10pct", benign_share < 0.1);
        check(rep, "doubling_chain", r.longest_chain >= 10);
        check(rep, "runtime", rep.seconds < 120);
        detail << "attack " << (r.attack.budget_hit ? "hit" : "missed") << " budget after " << r.attack.inserts
               << " inserts (" << r.clusters << " clusters), benign peak " << fmt(benign_share * 100, 1)
               << "% of budget, longest doubling chain " << r.longest_chain;
        rep.fingerprint = csv_without_ns(r.rows);
        break;
    }
    case 6: {
        rep.name = "ALEX depth bound and key set";
        const auto r = alex_bounds(seed, opt.jobs);
        rep.seconds = seconds_since(t0);
        check(rep, "bounds", std::all_of(r.workloads.begin(), r.workloads.end(), [](const AlexBoundsRow &w) { return w.ok(); }));
        std::ostringstream fp;
        for (const auto &w : r.workloads) {
            if (&w != &r.workloads.front()) detail << "; ";
            detail << w.name << " D=" << w.depth << "<=" << w.bound << (w.ok() ? "" : " FAILED");
            fp << w.name << ',' << w.keys << ',' << w.depth << ',' << w.partitions << ',' << w.bound << ','
               << w.keys_equal << ',' << w.lookups_ok << ',' << w.invalid << '\n';
        }
        rep.fingerprint = fp.str() + csv_without_ns(r.rows);
        break;
    }
    case 7: {
        rep.name = "Bandit membership inference";
        bandit::CampaignConfig cfg;
        cfg.seed = seed;
        const auto r = bandit_campaign(cfg, opt.jobs);
        rep.seconds = seconds_since(t0);
        check(rep, "arm_inference", r.arm_accuracy >= 0.99);
        check(rep, "tv", r.mean_tv > 0.1);
        check(rep, "precision_groups", r.high_precision_share >= 0.2);
        check(rep, "runtime", rep.seconds < 600);
        detail << "arm inference " << fmt(r.arm_accuracy, 4) << ", mean TV " << fmt(r.mean_tv, 3) << " (null "
               << fmt(r.mean_null_tv, 3) << ")"
               << ", targets with a rule in a group >= 0.8: " << fmt(100 * r.high_precision_share, 1)
               << "%, verdict accuracy " << fmt(r.verdict_accuracy, 3);
        rep.fingerprint = group_table_csv(r.table) + targets_csv(r.targets);
        break;
    }
    default:
        throw Error(ErrorCode::PreconditionViolation, "no criterion " + std::to_string(id));
    }
    rep.pass = rep.failed.empty();
    for (const auto &f : rep.failed) detail << "; failed: " << f;
    detail << " [" << fmt(rep.seconds, 1) << " s]";
    rep.detail = detail.str();
    return rep;
}

} // namespace lidx::exp
