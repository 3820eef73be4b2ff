// lidx: dataset generation, workload replay and attack campaigns.
//
// Exit codes: 0 success, 1 memory budget exceeded with --budget-action error,
// 2 usage or input error, 3 assertion failure (oracle mismatch, broken invariant).

#include "lidx/attack.hpp"
#include "lidx/datasets.hpp"
#include "lidx/experiments.hpp"
#include "lidx/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>

namespace {

using namespace lidx;

constexpr int kExitBudget = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAssert = 3;

struct Output {
    std::ofstream file;
    std::ostream *os = &std::cout;

    explicit Output(const std::string &path) {
        if (path.empty() || path == "-") return;
        file.open(path);
        if (!file) throw Error(ErrorCode::PreconditionViolation, "cannot open " + path + " for writing");
        os = &file;
    }
};

// ---- gen-data --------------------------------------------------------------

struct GenArgs {
    std::string dist = "normal";
    std::string key = "u64";
    std::size_t n = 100000;
    std::uint64_t seed = 1;
    std::string out;
    double mu = 5e6, sigma = 1e6, lo = 0, hi = 1e9;
    std::uint32_t components = 50;
};

int gen_data(const GenArgs &a) {
    DistSpec spec;
    if (a.dist == "normal") spec = DistSpec::normal(a.mu, a.sigma);
    else if (a.dist == "mixture") spec = DistSpec::mixture(a.mu, a.sigma, a.components);
    else spec = DistSpec::uniform(a.lo, a.hi);
    if (a.key == "u64") write_dataset(gen_dataset<std::uint64_t>(spec, a.n, a.seed), a.out);
    else write_dataset(gen_dataset<double>(spec, a.n, a.seed), a.out);
    std::cerr << "wrote " << a.n << " " << a.key << " keys to " << a.out << "\n";
    return 0;
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
    std::string index = "alex";
    std::string load;
    std::string ops = "benign";
    std::uint64_t total = 100000;
    std::uint64_t budget = 0;
    std::string budget_action = "stop";
    std::uint64_t sample_every = 10000;
    std::size_t epsilon = 64;
    std::string csv;
    std::uint64_t seed = 1;
    std::size_t per_location = 10000;
    double delta = 0;
    std::size_t max_node_bytes = 64 * 1024;
    std::size_t branching = 64;
    std::size_t holdout = 0;
    std::size_t range_sample = 1000;
};

template <IndexKey K, typename Subject>
int replay(Subject &subject, const RunArgs &a, Dataset<K> load, std::vector<K> held) {
    subject.load(std::span<const K>(load.keys));
    Output out(a.csv);
    write_csv_header(*out.os);
    WorkloadConfig wc;
    wc.sample_every = a.sample_every;
    wc.track_doublings = false;
    if (a.budget > 0)
        wc.budget = MemoryBudget(a.budget, a.budget_action == "error" ? BudgetAction::Error : BudgetAction::Stop);
    const MeasurementSink sink = [&](const Measurement &m) { write_csv_row(*out.os, m); };
    const std::span<const K> existing(load.keys);
    WorkloadSummary s;
    try {
        if (a.ops == "benign") {
            BenignStream<K> stream(std::move(held), load.keys.front(), load.keys.back(), a.total, a.seed, existing);
            s = run_workload(subject, [&] { return stream.next(); }, wc, sink);
        } else {
            const auto [lo, hi] = sample_range_estimate(load, std::min(a.range_sample, load.size()), derive_seed(a.seed, 1));
            AlexAttackConfig<K> att;
            att.per_location = a.per_location;
            att.delta = a.delta > 0 ? static_cast<K>(a.delta) : AlexAttackConfig<K>::default_delta();
            att.lo = lo;
            att.hi = hi;
            att.total = a.total;
            att.seed = derive_seed(a.seed, 2);
            AlexAttackStream<K> stream(att, existing);
            s = run_workload(subject, [&] { return stream.next(); }, wc, sink);
        }
    } catch (const Error &e) {
        out.os->flush();
        if (e.code() != ErrorCode::BudgetExceeded) throw;
        std::cerr << e.what() << "\n";
        return kExitBudget;
    }
    out.os->flush();
    std::cerr << s.inserts << " inserts, " << s.final_bytes << " bytes" << (s.budget_hit ? " (budget reached)" : "")
              << "\n";
    return 0;
}

template <IndexKey K>
int run_typed(const RunArgs &a) {
    Dataset<K> full = read_dataset<K>(a.load);
    if (full.size() < 2) throw Error(ErrorCode::InsufficientData, "dataset needs at least two keys");
    const std::size_t holdout =
        a.ops == "benign" ? (a.holdout ? a.holdout : std::min<std::size_t>(a.total, full.size() / 10)) : 0;
    auto [load, held] = split_holdout(full, holdout, derive_seed(a.seed, 0));
    std::erase_if(held, [&](K k) { return k < load.keys.front() || load.keys.back() < k; });
    if (a.index == "pgm") {
        PgmSubject<K> s(a.epsilon);
        return replay<K>(s, a, std::move(load), std::move(held));
    }
    if (a.index == "btree") {
        BTreeSubject<K> s(a.branching);
        return replay<K>(s, a, std::move(load), std::move(held));
    }
    AlexConfig cfg;
    cfg.max_node_bytes = a.max_node_bytes;
    AlexSubject<K> s(cfg);
    return replay<K>(s, a, std::move(load), std::move(held));
}

int run(const RunArgs &a) {
    return peek_key_type(a.load) == KeyType::U64 ? run_typed<std::uint64_t>(a) : run_typed<double>(a);
}

// ---- attacks ---------------------------------------------------------------

int attack_pgm(const exp::PgmLeakageConfig &cfg, std::size_t trials, const std::string &csv, int jobs) {
    exp::PgmLeakageConfig c = cfg;
    c.calibration = trials;
    c.test = 2 * trials;
    const auto r = exp::pgm_leakage(c, jobs);
    Output out(csv);
    write_csv(*out.os, r.rows);
    std::cerr << "calibration mean ops A " << r.cal.mean_a << " B " << r.cal.mean_b << ", threshold " << r.cal.threshold
              << "\nheight(A) > height(B) in " << r.taller_a << "/" << r.pairs << " pairs (" << r.ties << " ties)"
              << "\naccuracy " << r.accuracy() << " on " << r.tested << " fresh instances"
              << "\nB-tree control accuracy " << r.btree_accuracy() << "\n";
    return 0;
}

int attack_bandit(const bandit::CampaignConfig &cfg, const std::string &csv, const std::string &targets_csv, int jobs) {
    const auto r = exp::bandit_campaign(cfg, jobs);
    const std::string table = exp::group_table_csv(r.table);
    Output out(csv);
    *out.os << table;
    if (!targets_csv.empty()) {
        Output t(targets_csv);
        *t.os << exp::targets_csv(r.targets);
    }
    if (!csv.empty() && csv != "-") std::cerr << table;
    std::cerr << "arm inference " << r.arm_accuracy << ", mean TV " << r.mean_tv << " (null " << r.mean_null_tv
              << "), verdict accuracy " << r.verdict_accuracy << "\n";
    return 0;
}

int oracle_check(const std::string &suite, std::size_t instances, std::uint64_t seed) {
    const auto r = exp::oracle_check(suite, instances, seed);
    std::cout << suite << ": " << r.instances - r.mismatches << "/" << r.instances << " instances agree\n";
    if (r.mismatches) {
        std::cout << "first failure: " << r.first_failure << "\n";
        return kExitAssert;
    }
    return 0;
}

int exit_for(const Error &e) {
    switch (e.code()) {
    case ErrorCode::BudgetExceeded:
        return kExitBudget;
    case ErrorCode::FormatError:
    case ErrorCode::PreconditionViolation:
    case ErrorCode::ClusterTooWide:
    case ErrorCode::InsufficientData:
    case ErrorCode::DomainTooSmall:
    case ErrorCode::OracleTooLarge:
    case ErrorCode::OutOfRootRange:
        return kExitUsage;
    default:
        return kExitAssert;
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"learned index attack harness"};
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads for trial loops (0 = OpenMP default)");

    GenArgs gen;
    auto *g = app.add_subcommand("gen-data", "generate a dataset file");
    g->add_option("--dist", gen.dist)->check(CLI::IsMember({"normal", "mixture", "uniform"}));
    g->add_option("--key", gen.key, "key type")->check(CLI::IsMember({"u64", "f64"}));
    g->add_option("--n", gen.n)->required();
    g->add_option("--seed", gen.seed);
    g->add_option("--out", gen.out)->required();
    g->add_option("--mu", gen.mu);
    g->add_option("--sigma", gen.sigma);
    g->add_option("--components", gen.components);
    g->add_option("--lo", gen.lo, "uniform lower bound");
    g->add_option("--hi", gen.hi, "uniform upper bound (exclusive)");

    RunArgs ra;
    auto *r = app.add_subcommand("run", "replay a workload and emit sampled measurements");
    r->add_option("--index", ra.index)->check(CLI::IsMember({"pgm", "alex", "btree"}));
    r->add_option("--load", ra.load)->required()->check(CLI::ExistingFile);
    r->add_option("--ops", ra.ops)->check(CLI::IsMember({"benign", "attack-alex"}));
    r->add_option("--total", ra.total);
    r->add_option("--budget", ra.budget, "cap in bytes, 0 = none");
    r->add_option("--budget-action", ra.budget_action)->check(CLI::IsMember({"stop", "error"}));
    r->add_option("--sample-every", ra.sample_every)->check(CLI::PositiveNumber);
    r->add_option("--epsilon", ra.epsilon)->check(CLI::PositiveNumber);
    r->add_option("--csv", ra.csv, "output file, stdout when absent");
    r->add_option("--seed", ra.seed);
    r->add_option("--per-location", ra.per_location, "attack keys per guessed location");
    r->add_option("--delta", ra.delta, "attack key spacing (default 1 for u64, 1e-13 for f64)");
    r->add_option("--max-node-bytes", ra.max_node_bytes);
    r->add_option("--branching", ra.branching, "B-tree fan-out");
    r->add_option("--holdout", ra.holdout, "keys held out of the load for the benign stream");

    exp::PgmLeakageConfig pc;
    std::size_t pgm_trials = 50;
    std::string pgm_csv;
    auto *ap = app.add_subcommand("attack-pgm", "distinguish key distributions through PGM lookup cost");
    ap->add_option("--epsilon", pc.epsilon)->check(CLI::PositiveNumber);
    ap->add_option("--n", pc.n)->check(CLI::PositiveNumber);
    ap->add_option("--trials", pgm_trials, "calibration instances per distribution")->check(CLI::PositiveNumber);
    ap->add_option("--seed", pc.seed);
    ap->add_option("--csv", pgm_csv);

    bandit::CampaignConfig bc;
    std::string bandit_csv, bandit_targets;
    auto *ab = app.add_subcommand("attack-bandit", "membership inference against the simulated optimizer");
    ab->add_option("--targets", bc.targets)->check(CLI::PositiveNumber);
    ab->add_option("--trials", bc.trainings, "trainings per label")->check(CLI::PositiveNumber);
    ab->add_option("--arms", bc.optimizer.arms)->check(CLI::PositiveNumber);
    ab->add_option("--batch", bc.optimizer.batch)->check(CLI::PositiveNumber);
    ab->add_option("--universe", bc.universe)->check(CLI::PositiveNumber);
    ab->add_option("--separation", bc.separation)->check(CLI::PositiveNumber);
    ab->add_option("--seed", bc.seed);
    ab->add_option("--csv", bandit_csv, "precision-group table");
    ab->add_option("--targets-csv", bandit_targets, "per-target detail");

    std::string suite;
    std::size_t instances = 200;
    std::uint64_t oracle_seed = 1;
    auto *oc = app.add_subcommand("oracle-check", "compare implementations with brute-force oracles");
    oc->add_option("--suite", suite)->required()->check(CLI::IsMember({"pla", "pgm", "alex", "btree"}));
    oc->add_option("--instances", instances)->check(CLI::PositiveNumber);
    oc->add_option("--seed", oracle_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*g) return gen_data(gen);
        if (*r) return run(ra);
        if (*ap) return attack_pgm(pc, pgm_trials, pgm_csv, jobs);
        if (*ab) return attack_bandit(bc, bandit_csv, bandit_targets, jobs);
        if (*oc) return oracle_check(suite, instances, oracle_seed);
    } catch (const Error &e) {
        std::cerr << "lidx: " << e.what() << "\n";
        return exit_for(e);
    } catch (const std::exception &e) {
        std::cerr << "lidx: " << e.what() << "\n";
        return kExitAssert;
    }
    return kExitUsage;
}
