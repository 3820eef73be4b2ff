#pragma once

// End-to-end experiments shared by the CLI and the acceptance runner. Every
// function is deterministic given its seed; wall-clock fields are informational.

#include "lidx/attack.hpp"
#include "lidx/harness.hpp"
#include "lidx/optimizer.hpp"
#include "lidx/oracles.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lidx::exp {

// ---- PLA -----------------------------------------------------------------------

struct PlaSuiteResult {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
    std::vector<Measurement> rows; ///< one per instance: ops = segments, height = oracle segments
};

/// Random instances of 1..max_keys keys (u64 and f64 alternating), epsilon
/// cycling through {1, 2, 4}; segment count of fit_segments vs the DP oracle.
PlaSuiteResult pla_optimality(std::size_t instances, std::size_t max_keys, std::uint64_t seed, int jobs);

// ---- PGM -----------------------------------------------------------------------

struct PgmOracleResult {
    std::size_t probes = 0;
    std::size_t disagreements = 0;
    std::size_t bound_violations = 0;
    std::size_t window_violations = 0;
    std::uint64_t max_ops = 0;
    std::uint64_t ops_bound = 0;
    std::size_t height = 0;
    std::vector<Measurement> rows;
};

/// Static PGM over n normal u64 keys; half the probes are stored keys, half
/// uniform over a slightly widened key range.
PgmOracleResult pgm_oracle(std::size_t n, std::size_t probes, std::size_t epsilon, std::uint64_t seed);

struct PgmDynamicResult {
    std::size_t steps = 0;
    std::size_t mismatches = 0;
    bool final_set_equal = false;
    std::vector<std::pair<std::uint64_t, double>> amortized; ///< (n, ops per insert so far)
    double c = 0;          ///< least-squares fit of amortized ~ c * log2(n)
    double worst_ratio = 0; ///< max amortized / (c * log2 n)
    std::vector<Measurement> rows;
};

/// `steps` interleaved insert + lookup rounds against std::set, then a growth
/// run to `n_max` inserts sampled at ten evenly spaced points of its last decade.
PgmDynamicResult pgm_dynamic(std::size_t steps, std::size_t n_max, std::size_t epsilon, std::uint64_t seed);

struct PgmLeakageConfig {
    std::size_t epsilon = 128;
    std::size_t n = 100000;
    std::size_t calibration = 50; ///< instances per distribution
    std::size_t test = 100;       ///< fresh instances, half per distribution
    std::size_t attacker_keys = 100;
    std::size_t btree_branching = 64;
    std::uint64_t seed = 0;
};

struct PgmLeakageResult {
    std::size_t pairs = 0;
    std::size_t taller_a = 0; ///< paired calibration seeds with height(A) > height(B)
    std::size_t ties = 0;
    std::size_t correct = 0;
    std::size_t tested = 0;
    std::size_t btree_correct = 0;
    bool btree_ambiguous = false; ///< control calibration had equal means
    Calibration cal;
    Calibration btree_cal;
    std::vector<Measurement> rows;

    double height_fraction() const { return pairs ? static_cast<double>(taller_a) / static_cast<double>(pairs) : 0; }
    double accuracy() const { return tested ? static_cast<double>(correct) / static_cast<double>(tested) : 0; }
    double btree_accuracy() const {
        return tested ? static_cast<double>(btree_correct) / static_cast<double>(tested) : 0;
    }
};

/// A = normal(5e6, 1e6), B = 50-component mixture over the same span, u64
/// keys. Each victim instance also holds the attacker's keys, drawn uniformly
/// from [mu - 2 sigma, mu + 2 sigma).
PgmLeakageResult pgm_leakage(const PgmLeakageConfig &cfg, int jobs);

// ---- ALEX ----------------------------------------------------------------------

struct AlexBlowupConfig {
    std::size_t n = 1000000;
    std::size_t max_node_bytes = 64 * 1024;
    std::size_t per_location = 10000;
    std::uint64_t budget = 512ull << 20;
    std::uint64_t max_inserts = 50000000; ///< guard when the budget is never reached
    std::uint64_t sample_every = 100000;
    std::size_t range_sample = 1000; ///< keys the attacker samples to estimate the range
    std::uint64_t seed = 0;
};

struct AlexBlowupResult {
    WorkloadSummary attack;
    WorkloadSummary benign;
    std::uint64_t initial_bytes = 0;
    std::size_t longest_chain = 0;
    std::uint64_t clusters = 0;
    std::vector<Measurement> rows; ///< trial 0 = attack, trial 1 = benign
};

/// Bulk-loads n normal(0, 1) real keys, replays the attack stream until the
/// budget (or max_inserts), then a benign stream of the same length on a fresh
/// copy. The benign run is only checked against the budget, never stopped.
AlexBlowupResult alex_blowup(const AlexBlowupConfig &cfg);

struct AlexBoundsRow {
    std::string name;
    std::size_t keys = 0;
    std::size_t depth = 0;
    std::uint64_t partitions = 0;
    std::size_t bound = 0;
    bool keys_equal = false;
    bool lookups_ok = false;
    std::string invalid; ///< validate() message, empty when fine

    bool ok() const { return depth <= bound && keys_equal && lookups_ok && invalid.empty(); }
};

struct AlexBoundsResult {
    std::vector<AlexBoundsRow> workloads;
    std::vector<Measurement> rows;
};

/// Several bulk-load + insert workloads at small node sizes; depth against
/// ceil(log_m p) + 1 with m the inner fan-out limit and p from the partition
/// oracle at capacity max_leaf_slots * d_hi.
AlexBoundsResult alex_bounds(std::uint64_t seed, int jobs);

/// (p, ceil(log_m p) + 1) for an index holding the sorted `keys`.
template <IndexKey K>
std::pair<std::uint64_t, std::size_t> alex_depth_bound(const AlexIndex<K> &idx, std::span<const K> keys) {
    const AlexConfig &c = idx.config();
    const auto cap = static_cast<std::uint64_t>(static_cast<double>(c.max_leaf_slots()) * c.d_hi);
    const std::uint64_t p = oracle::min_equal_width_partitions(keys, idx.root_lo(), idx.root_hi(), cap);
    return {p, static_cast<std::size_t>(oracle::ceil_log(c.max_inner_len(), p)) + 1};
}

// ---- bandit --------------------------------------------------------------------

struct BanditCampaignResult {
    std::vector<bandit::TargetResult> targets;
    std::vector<bandit::GroupRow> table;
    double arm_accuracy = 0;
    double mean_tv = 0;
    double mean_null_tv = 0; ///< same statistic between two nonmember samples
    double verdict_accuracy = 0;
    double high_precision_share = 0; ///< targets with a member or nonmember rule in a group >= 0.8
};

BanditCampaignResult bandit_campaign(const bandit::CampaignConfig &cfg, int jobs);

std::string group_table_csv(const std::vector<bandit::GroupRow> &table);
std::string targets_csv(const std::vector<bandit::TargetResult> &targets);

// ---- oracle suites -------------------------------------------------------------

struct OracleCheckResult {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    std::string first_failure;
};

/// suite is one of pla, pgm, alex, btree; throws PreconditionViolation otherwise.
OracleCheckResult oracle_check(std::string_view suite, std::size_t instances, std::uint64_t seed);

// ---- acceptance ----------------------------------------------------------------

struct CriterionReport {
    int id = 0;
    std::string name;
    bool pass = false;
    std::vector<std::string> failed; ///< names of the failed clauses
    std::string detail;
    std::string fingerprint; ///< everything the run produced except wall-clock
    double seconds = 0;
};

struct AcceptanceOptions {
    std::uint64_t seed = 20240917;
    int jobs = 0;
};

/// Criteria 1..7.
CriterionReport run_criterion(int id, const AcceptanceOptions &opt);

} // namespace lidx::exp
