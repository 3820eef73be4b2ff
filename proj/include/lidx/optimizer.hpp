#pragma once

// Simulated online-learned query optimizer: per-arm Bayesian linear regression
// of log latency on query features, Thompson sampling over arms, retraining on
// each batch of N executed queries; plus the latency-based membership attack.

#include "lidx/error.hpp"
#include "lidx/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lidx::bandit {

struct Query {
    std::uint32_t id = 0;
    Eigen::VectorXd features;
    std::vector<double> latency; ///< true latency per arm
};

struct UniverseConfig {
    std::size_t queries = 1000;
    std::size_t arms = 5;
    std::size_t dim = 8;
    double separation = 1.0;    ///< arms differ by at least this factor of the faster one
    double idiosyncratic = 0.5; ///< sd of the per-(query, arm) log-latency term features do not explain
    std::uint64_t seed = 0;
};

/// Log latency per arm is linear in the features plus an arm offset; sorted
/// per-query latencies are then pushed apart to the separation. Regenerates
/// (fresh derived seed) until every arm is fastest for >= 5% of queries.
std::vector<Query> gen_query_universe(const UniverseConfig &cfg);

/// Minimum share of queries for which each arm must be the fastest.
inline constexpr double kMinBestArmShare = 0.05;

/// Index of the fastest arm.
std::size_t best_arm(const Query &q);

/// Relative execution noise: zero-mean normal with sd separation/40, clamped to
/// +-separation/4, so any observation lies in (1 +- s/4) * true.
double simulate_execution(const Query &q, std::size_t arm, double separation, Rng &rng);
double simulate_execution(const Query &q, std::size_t arm, double separation, std::uint64_t noise_seed);

struct Experience {
    Eigen::VectorXd features;
    std::size_t arm = 0;
    double latency = 0;
};

struct OptimizerConfig {
    std::size_t arms = 5;
    std::size_t dim = 8;
    std::size_t batch = 100;
    double prior_precision = 1.0; ///< alpha: weights ~ N(0, I / alpha)
    double noise_precision = 4;   ///< beta: log latency ~ N(w.x, 1 / beta)
    std::size_t warmup_batches = 1; ///< batches processed before the training set of interest
};

struct ArmPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd chol; ///< lower Cholesky factor of cov
    std::size_t observations = 0;
};

class OptimizerState {
public:
    explicit OptimizerState(OptimizerConfig cfg);

    const OptimizerConfig &config() const noexcept { return cfg_; }
    const ArmPosterior &posterior(std::size_t arm) const { return arms_.at(arm); }

    /// Samples one weight vector per arm from its posterior and returns the arm
    /// whose sampled log latency for `features` is lowest.
    std::size_t thompson_choose(const Eigen::VectorXd &features, Rng &rng) const;

    /// Resets every arm to the prior, then conditions each arm on the batch
    /// experiences that used it.
    void train_batch(std::span<const Experience> batch);

    /// Number of retrainings so far.
    std::size_t generation() const noexcept { return generation_; }

private:
    void reset_prior();

    OptimizerConfig cfg_;
    std::vector<ArmPosterior> arms_;
    std::size_t generation_ = 0;
};

/// Executes queries one at a time and retrains on the last `batch` experiences
/// whenever the processed count reaches a multiple of `batch`.
class OnlineOptimizer {
public:
    OnlineOptimizer(OptimizerConfig cfg, double separation, std::uint64_t seed);

    struct Step {
        std::size_t arm;
        double latency;
        bool retrained;
    };

    Step process(const Query &q);
    /// Arm choice without executing or recording anything.
    std::size_t peek_choice(const Query &q);
    const OptimizerState &state() const noexcept { return state_; }
    std::size_t processed() const noexcept { return processed_; }

private:
    OptimizerState state_;
    double separation_;
    Rng rng_;
    std::vector<Experience> buffer_;
    std::size_t processed_ = 0;
};

// ---- attack ------------------------------------------------------------------

/// Averaged offline latency of `q` under every arm.
std::vector<double> attack_build_arm_map(const Query &q, double separation, std::size_t repetitions, Rng &rng);

/// Nearest map entry by absolute latency. Throws AmbiguousArm when two entries'
/// noise intervals (1 +- s/4) overlap.
std::size_t attack_infer_arm(double latency, std::span<const double> arm_map, double separation);

enum class Membership { Member, Nonmember };
inline const char *to_string(Membership m) { return m == Membership::Member ? "member" : "nonmember"; }

/// Groups (0.5, 0.6], ..., (0.9, 1.0]; index 0..4. Precision at or below 0.5
/// falls into the lowest group.
inline constexpr std::array<const char *, 5> kPrecisionGroups = {"0.5-0.6", "0.6-0.7", "0.7-0.8", "0.8-0.9", "0.9-1.0"};
std::size_t precision_group(double precision);

struct ArmRule {
    Membership label = Membership::Member;
    std::size_t arm = 0;
    double precision = 0.5; ///< P(label | observed arm) with equal priors
    double recall = 0;      ///< P(observed arm | label)
};

/// Best single-arm rule for predicting `label`: the arm maximizing precision,
/// ties to higher recall then lower arm index.
ArmRule best_rule(std::span<const double> member_dist, std::span<const double> nonmember_dist, Membership label);

struct MembershipVerdict {
    Membership predicted = Membership::Member;
    std::size_t arm_observed = 0;
    ArmRule rule;
    std::size_t group = 0;
};

/// Uses the highest-precision rule over both labels: predicts the rule's label
/// when the observed arm is the rule's arm and the other label otherwise.
MembershipVerdict attack_membership(std::span<const double> member_dist, std::span<const double> nonmember_dist,
                                    std::size_t observed_arm);

/// Total-variation distance between two arm distributions.
double tv_distance(std::span<const double> p, std::span<const double> q);

// ---- campaign ----------------------------------------------------------------

struct CampaignConfig {
    std::size_t targets = 100;
    std::size_t trainings = 50; ///< per label, for calibration; as many again for evaluation
    std::size_t universe = 1000;
    std::size_t map_repetitions = 5;
    OptimizerConfig optimizer;
    double separation = 1.0;
    std::uint64_t seed = 0;
};

struct TargetResult {
    std::uint32_t query_id = 0;
    std::vector<double> member_dist;
    std::vector<double> nonmember_dist;
    double tv = 0;
    double null_tv = 0; ///< TV between two independent nonmember samples of the same size
    ArmRule member_rule;    ///< chosen on calibration trainings
    ArmRule nonmember_rule;
    double member_precision = 0; ///< measured on evaluation trainings
    double member_recall = 0;
    double nonmember_precision = 0;
    double nonmember_recall = 0;
    std::size_t arm_checks = 0;
    std::size_t arm_matches = 0; ///< latency-inferred arm equals the victim's actual arm
    std::size_t verdicts_correct = 0;
    std::size_t verdicts = 0;
};

/// One victim training: a fresh optimizer runs `warmup_batches` random batches,
/// then one more (the target swapped in for one of its queries when `member`)
/// and retrains; returns the arm chosen for the target afterwards.
std::size_t train_and_choose(std::span<const Query> universe, std::size_t target, bool member,
                             const OptimizerConfig &cfg, double separation, Rng &rng);

TargetResult run_target(std::span<const Query> universe, std::size_t target, const CampaignConfig &cfg,
                        std::uint64_t seed);

struct GroupRow {
    std::string group;
    double member_pct = 0, member_recall = 0;
    double nonmember_pct = 0, nonmember_recall = 0;
};

/// Table rows per precision group using the evaluation-set precision.
std::vector<GroupRow> group_table(std::span<const TargetResult> results);

} // namespace lidx::bandit
