#include "lidx/optimizer.hpp"

#include "lidx/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lidx::bandit {

namespace {

double std_normal(Rng &rng) { return sample_real(DistSpec::normal(0, 1), rng); }

Eigen::VectorXd augmented(const Eigen::VectorXd &x) {
    Eigen::VectorXd a(x.size() + 1);
    a.head(x.size()) = x;
    a[x.size()] = 1.0;
    return a;
}

constexpr std::size_t kMaxUniverseAttempts = 100;

} // namespace

std::size_t best_arm(const Query &q) {
    return static_cast<std::size_t>(std::min_element(q.latency.begin(), q.latency.end()) - q.latency.begin());
}

std::vector<Query> gen_query_universe(const UniverseConfig &cfg) {
    if (cfg.arms < 1 || cfg.dim < 1 || cfg.queries < 1)
        throw Error(ErrorCode::PreconditionViolation, "universe needs >= 1 query, arm and feature");
    if (!(cfg.separation > 0)) throw Error(ErrorCode::PreconditionViolation, "separation must be positive");
    for (std::size_t attempt = 0; attempt < kMaxUniverseAttempts; ++attempt) {
        Rng rng(derive_seed(cfg.seed, attempt));
        std::vector<double> offset(cfg.arms);
        std::vector<Eigen::VectorXd> weight(cfg.arms, Eigen::VectorXd(cfg.dim));
        for (std::size_t a = 0; a < cfg.arms; ++a) {
            offset[a] = std::log(10.0) + 0.3 * std_normal(rng);
            for (std::size_t d = 0; d < cfg.dim; ++d) weight[a][d] = 0.4 * std_normal(rng);
        }
        std::vector<Query> out(cfg.queries);
        std::vector<std::size_t> best_count(cfg.arms, 0);
        std::vector<std::size_t> order(cfg.arms);
        for (std::size_t i = 0; i < cfg.queries; ++i) {
            Query &q = out[i];
            q.id = static_cast<std::uint32_t>(i);
            q.features.resize(cfg.dim);
            for (std::size_t d = 0; d < cfg.dim; ++d) q.features[d] = std_normal(rng);
            q.latency.resize(cfg.arms);
            for (std::size_t a = 0; a < cfg.arms; ++a)
                q.latency[a] = std::exp(offset[a] + weight[a].dot(q.features) + cfg.idiosyncratic * std_normal(rng));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return q.latency[x] < q.latency[y]; });
            for (std::size_t j = 1; j < cfg.arms; ++j) {
                const double floor = (1 + cfg.separation) * q.latency[order[j - 1]];
                q.latency[order[j]] = std::max(q.latency[order[j]], floor);
            }
            ++best_count[order[0]];
        }
        const bool spread = std::all_of(best_count.begin(), best_count.end(), [&](std::size_t c) {
            return static_cast<double>(c) >= kMinBestArmShare * static_cast<double>(cfg.queries);
        });
        if (spread || cfg.arms == 1) return out;
    }
    throw Error(ErrorCode::DomainTooSmall, "could not generate a universe where every arm is sometimes best");
}

double simulate_execution(const Query &q, std::size_t arm, double separation, Rng &rng) {
    const double bound = separation / 4;
    const double eta = std::clamp(std_normal(rng) * separation / 40, -bound, bound);
    return q.latency.at(arm) * (1 + eta);
}

double simulate_execution(const Query &q, std::size_t arm, double separation, std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    return simulate_execution(q, arm, separation, rng);
}

OptimizerState::OptimizerState(OptimizerConfig cfg) : cfg_(cfg) {
    if (cfg_.arms < 1 || cfg_.dim < 1 || cfg_.batch < 1)
        throw Error(ErrorCode::PreconditionViolation, "optimizer needs >= 1 arm, feature and batch entry");
    if (!(cfg_.prior_precision > 0) || !(cfg_.noise_precision > 0))
        throw Error(ErrorCode::PreconditionViolation, "precisions must be positive");
    reset_prior();
}

void OptimizerState::reset_prior() {
    const auto p = static_cast<Eigen::Index>(cfg_.dim + 1);
    arms_.assign(cfg_.arms, ArmPosterior{});
    for (auto &a : arms_) {
        a.mean = Eigen::VectorXd::Zero(p);
        a.cov = Eigen::MatrixXd::Identity(p, p) / cfg_.prior_precision;
        a.chol = Eigen::MatrixXd::Identity(p, p) / std::sqrt(cfg_.prior_precision);
        a.observations = 0;
    }
}

std::size_t OptimizerState::thompson_choose(const Eigen::VectorXd &features, Rng &rng) const {
    const Eigen::VectorXd x = augmented(features);
    std::size_t best = 0;
    double best_value = 0;
    Eigen::VectorXd z(x.size());
    for (std::size_t a = 0; a < arms_.size(); ++a) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std_normal(rng);
        const Eigen::VectorXd w = arms_[a].mean + arms_[a].chol * z;
        const double v = w.dot(x);
        if (a == 0 || v < best_value) {
            best = a;
            best_value = v;
        }
    }
    return best;
}

void OptimizerState::train_batch(std::span<const Experience> batch) {
    reset_prior();
    ++generation_;
    const auto p = static_cast<Eigen::Index>(cfg_.dim + 1);
    for (std::size_t a = 0; a < arms_.size(); ++a) {
        Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(p, p) * cfg_.prior_precision;
        Eigen::VectorXd xy = Eigen::VectorXd::Zero(p);
        std::size_t n = 0;
        for (const auto &e : batch) {
            if (e.arm != a) continue;
            const Eigen::VectorXd x = augmented(e.features);
            precision.noalias() += cfg_.noise_precision * x * x.transpose();
            xy += cfg_.noise_precision * std::log(e.latency) * x;
            ++n;
        }
        if (n == 0) continue;
        ArmPosterior &post = arms_[a];
        post.cov = precision.inverse();
        post.cov = (post.cov + post.cov.transpose()) / 2;
        post.mean = post.cov * xy;
        post.chol = Eigen::LLT<Eigen::MatrixXd>(post.cov).matrixL();
        post.observations = n;
    }
}

OnlineOptimizer::OnlineOptimizer(OptimizerConfig cfg, double separation, std::uint64_t seed)
    : state_(cfg), separation_(separation), rng_(seed) {}

OnlineOptimizer::Step OnlineOptimizer::process(const Query &q) {
    Step s{};
    s.arm = state_.thompson_choose(q.features, rng_);
    s.latency = simulate_execution(q, s.arm, separation_, rng_);
    buffer_.push_back({q.features, s.arm, s.latency});
    ++processed_;
    const std::size_t n = state_.config().batch;
    if (processed_ % n == 0) {
        state_.train_batch(std::span<const Experience>(buffer_).last(n));
        buffer_.clear();
        s.retrained = true;
    }
    return s;
}

std::size_t OnlineOptimizer::peek_choice(const Query &q) { return state_.thompson_choose(q.features, rng_); }

std::vector<double> attack_build_arm_map(const Query &q, double separation, std::size_t repetitions, Rng &rng) {
    if (repetitions < 1) throw Error(ErrorCode::PreconditionViolation, "repetitions must be >= 1");
    std::vector<double> map(q.latency.size(), 0.0);
    for (std::size_t a = 0; a < map.size(); ++a) {
        for (std::size_t r = 0; r < repetitions; ++r) map[a] += simulate_execution(q, a, separation, rng);
        map[a] /= static_cast<double>(repetitions);
    }
    return map;
}

std::size_t attack_infer_arm(double latency, std::span<const double> arm_map, double separation) {
    if (arm_map.empty()) throw Error(ErrorCode::PreconditionViolation, "empty arm map");
    const double b = separation / 4;
    for (std::size_t i = 0; i < arm_map.size(); ++i)
        for (std::size_t j = i + 1; j < arm_map.size(); ++j) {
            const double lo = std::min(arm_map[i], arm_map[j]), hi = std::max(arm_map[i], arm_map[j]);
            if (lo * (1 + b) >= hi * (1 - b)) throw Error(ErrorCode::AmbiguousArm, "arm latencies within noise bound");
        }
    std::size_t best = 0;
    for (std::size_t i = 1; i < arm_map.size(); ++i)
        if (std::abs(latency - arm_map[i]) < std::abs(latency - arm_map[best])) best = i;
    return best;
}

std::size_t precision_group(double precision) {
    if (precision <= 0.6) return 0;
    if (precision <= 0.7) return 1;
    if (precision <= 0.8) return 2;
    if (precision <= 0.9) return 3;
    return 4;
}

ArmRule best_rule(std::span<const double> member_dist, std::span<const double> nonmember_dist, Membership label) {
    if (member_dist.size() != nonmember_dist.size() || member_dist.empty())
        throw Error(ErrorCode::PreconditionViolation, "arm distributions must be non-empty and of equal length");
    ArmRule best;
    best.label = label;
    bool have = false;
    for (std::size_t a = 0; a < member_dist.size(); ++a) {
        const double hit = label == Membership::Member ? member_dist[a] : nonmember_dist[a];
        const double miss = label == Membership::Member ? nonmember_dist[a] : member_dist[a];
        const double precision = hit + miss > 0 ? hit / (hit + miss) : 0.0;
        if (!have || precision > best.precision || (precision == best.precision && hit > best.recall)) {
            best.arm = a;
            best.precision = precision;
            best.recall = hit;
            have = true;
        }
    }
    return best;
}

MembershipVerdict attack_membership(std::span<const double> member_dist, std::span<const double> nonmember_dist,
                                    std::size_t observed_arm) {
    const ArmRule m = best_rule(member_dist, nonmember_dist, Membership::Member);
    const ArmRule n = best_rule(member_dist, nonmember_dist, Membership::Nonmember);
    MembershipVerdict v;
    v.rule = n.precision > m.precision || (n.precision == m.precision && n.recall > m.recall) ? n : m;
    v.arm_observed = observed_arm;
    const Membership other = v.rule.label == Membership::Member ? Membership::Nonmember : Membership::Member;
    v.predicted = observed_arm == v.rule.arm ? v.rule.label : other;
    v.group = precision_group(v.rule.precision);
    return v;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error(ErrorCode::PreconditionViolation, "distributions differ in length");
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return s / 2;
}

std::size_t train_and_choose(std::span<const Query> universe, std::size_t target, bool member,
                             const OptimizerConfig &cfg, double separation, Rng &rng) {
    if (universe.size() <= cfg.batch) throw Error(ErrorCode::InsufficientData, "universe must exceed the batch size");
    OnlineOptimizer opt(cfg, separation, rng());
    for (std::size_t b = 0; b <= cfg.warmup_batches; ++b) {
        // batches drawn from everything but the target; the last one is the
        // training set the target may have joined
        auto picks = sample_indices(universe.size() - 1, cfg.batch, rng);
        for (auto &p : picks)
            if (p >= target) ++p;
        if (member && b == cfg.warmup_batches) picks[rng.below(picks.size())] = target;
        for (auto p : picks) opt.process(universe[p]);
    }
    return opt.peek_choice(universe[target]);
}

namespace {

std::vector<double> arm_distribution(std::span<const Query> universe, std::size_t target, bool member,
                                     const CampaignConfig &cfg, Rng &rng, std::vector<std::size_t> *arms_out) {
    std::vector<double> dist(cfg.optimizer.arms, 0.0);
    for (std::size_t t = 0; t < cfg.trainings; ++t) {
        const std::size_t arm = train_and_choose(universe, target, member, cfg.optimizer, cfg.separation, rng);
        dist[arm] += 1;
        if (arms_out) arms_out->push_back(arm);
    }
    for (auto &d : dist) d /= static_cast<double>(cfg.trainings);
    return dist;
}

} // namespace

TargetResult run_target(std::span<const Query> universe, std::size_t target, const CampaignConfig &cfg,
                        std::uint64_t seed) {
    Rng rng(seed);
    TargetResult r;
    r.query_id = universe[target].id;
    r.member_dist = arm_distribution(universe, target, true, cfg, rng, nullptr);
    r.nonmember_dist = arm_distribution(universe, target, false, cfg, rng, nullptr);
    r.tv = tv_distance(r.member_dist, r.nonmember_dist);
    r.member_rule = best_rule(r.member_dist, r.nonmember_dist, Membership::Member);
    r.nonmember_rule = best_rule(r.member_dist, r.nonmember_dist, Membership::Nonmember);

    // Victims: fresh trainings the attacker never saw. Each victim executes the
    // target once; the attacker infers the arm from the observed latency.
    const std::vector<double> arm_map = attack_build_arm_map(universe[target], cfg.separation, cfg.map_repetitions, rng);
    std::size_t m_hits = 0, m_flagged = 0, n_hits = 0, n_flagged = 0;
    for (int label = 0; label < 2; ++label) {
        const bool member = label == 0;
        for (std::size_t t = 0; t < cfg.trainings; ++t) {
            const std::size_t arm = train_and_choose(universe, target, member, cfg.optimizer, cfg.separation, rng);
            const double observed = simulate_execution(universe[target], arm, cfg.separation, rng);
            const std::size_t inferred = attack_infer_arm(observed, arm_map, cfg.separation);
            ++r.arm_checks;
            r.arm_matches += inferred == arm;
            if (inferred == r.member_rule.arm) {
                ++m_flagged;
                m_hits += member;
            }
            if (inferred == r.nonmember_rule.arm) {
                ++n_flagged;
                n_hits += !member;
            }
            const MembershipVerdict v = attack_membership(r.member_dist, r.nonmember_dist, inferred);
            ++r.verdicts;
            r.verdicts_correct += (v.predicted == Membership::Member) == member;
        }
    }
    const auto n = static_cast<double>(cfg.trainings);
    r.member_precision = m_flagged ? static_cast<double>(m_hits) / static_cast<double>(m_flagged) : 0.0;
    r.member_recall = static_cast<double>(m_hits) / n;
    r.nonmember_precision = n_flagged ? static_cast<double>(n_hits) / static_cast<double>(n_flagged) : 0.0;
    r.nonmember_recall = static_cast<double>(n_hits) / n;
    r.null_tv = tv_distance(r.nonmember_dist, arm_distribution(universe, target, false, cfg, rng, nullptr));
    return r;
}

std::vector<GroupRow> group_table(std::span<const TargetResult> results) {
    std::vector<GroupRow> rows(kPrecisionGroups.size());
    std::vector<std::size_t> m_count(rows.size(), 0), n_count(rows.size(), 0);
    for (std::size_t g = 0; g < rows.size(); ++g) rows[g].group = kPrecisionGroups[g];
    for (const auto &r : results) {
        const std::size_t gm = precision_group(r.member_precision);
        ++m_count[gm];
        rows[gm].member_recall += r.member_recall;
        const std::size_t gn = precision_group(r.nonmember_precision);
        ++n_count[gn];
        rows[gn].nonmember_recall += r.nonmember_recall;
    }
    const double total = results.empty() ? 1.0 : static_cast<double>(results.size());
    for (std::size_t g = 0; g < rows.size(); ++g) {
        rows[g].member_pct = 100.0 * static_cast<double>(m_count[g]) / total;
        rows[g].nonmember_pct = 100.0 * static_cast<double>(n_count[g]) / total;
        if (m_count[g]) rows[g].member_recall /= static_cast<double>(m_count[g]);
        if (n_count[g]) rows[g].nonmember_recall /= static_cast<double>(n_count[g]);
    }
    return rows;
}

} // namespace lidx::bandit
