#include "lidx/experiments.hpp"
#include "lidx/trials.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

using namespace lidx;

TEST(Trials, SerialMatchesParallel) {
    const auto f = [](std::size_t i) {
        Rng rng(derive_seed(99, i));
        double s = 0;
        for (int k = 0; k < 1000; ++k) s += rng.uniform();
        return s;
    };
    const auto serial = run_trials_serial(64, f);
    EXPECT_EQ(run_trials_parallel(64, f, 4), serial);
    EXPECT_EQ(run_trials_parallel(64, f, 0), serial);
    EXPECT_EQ(run_trials(64, f, 1), serial);
    EXPECT_TRUE(run_trials_parallel(0, f, 4).empty());
}

TEST(Trials, EveryIndexRunsOnce) {
    std::vector<std::atomic<int>> hits(200);
    run_trials_parallel(200, [&](std::size_t i) { return ++hits[i]; }, 8);
    for (auto &h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Trials, ExceptionPropagates) {
    const auto f = [](std::size_t i) -> int {
        if (i == 17) throw Error(ErrorCode::PreconditionViolation, "boom");
        return static_cast<int>(i);
    };
    EXPECT_THROW(run_trials_parallel(40, f, 4), Error);
    EXPECT_THROW(run_trials_serial(40, f), Error);
}

TEST(Trials, PlaSuiteSameUnderThreads) {
    const auto a = exp::pla_optimality(60, 64, 5, 1);
    const auto b = exp::pla_optimality(60, 64, 5, 0);
    EXPECT_EQ(a.mismatches, 0u);
    EXPECT_EQ(csv_without_ns(a.rows), csv_without_ns(b.rows));
}

TEST(Trials, PgmLeakageSameUnderThreads) {
    exp::PgmLeakageConfig cfg;
    cfg.n = 5000;
    cfg.epsilon = 16;
    cfg.calibration = 4;
    cfg.test = 8;
    cfg.seed = 3;
    const auto a = exp::pgm_leakage(cfg, 1);
    const auto b = exp::pgm_leakage(cfg, 4);
    EXPECT_EQ(a.correct, b.correct);
    EXPECT_EQ(a.taller_a, b.taller_a);
    EXPECT_EQ(a.btree_correct, b.btree_correct);
    EXPECT_EQ(csv_without_ns(a.rows), csv_without_ns(b.rows));
}

TEST(Trials, BanditCampaignSameUnderThreads) {
    bandit::CampaignConfig cfg;
    cfg.targets = 4;
    cfg.trainings = 6;
    cfg.universe = 300;
    cfg.seed = 8;
    const auto a = exp::bandit_campaign(cfg, 1);
    const auto b = exp::bandit_campaign(cfg, 3);
    EXPECT_EQ(exp::targets_csv(a.targets), exp::targets_csv(b.targets));
    EXPECT_EQ(exp::group_table_csv(a.table), exp::group_table_csv(b.table));
}
