#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hetnet/scheduler.hpp"

using namespace hetnet;

namespace {

Matrix make_rates(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t i = 0;
    for (auto r : rows) {
        std::size_t z = 0;
        for (double v : r) m(i, z++) = v;
        ++i;
    }
    return m;
}

Matrix random_rates(std::mt19937_64& g, std::size_t n, std::size_t Z) {
    std::uniform_real_distribution<double> u(1.0, 100.0);
    Matrix m(n, Z);
    for (double& v : m.data()) v = u(g);
    return m;
}

}  // namespace

TEST(FractionRecursion, ScheduledAndIdle) {
    EXPECT_DOUBLE_EQ(next_fraction(0.5, 2, true), 0.75);
    EXPECT_DOUBLE_EQ(next_fraction(0.5, 2, false), 0.25);
    EXPECT_DOUBLE_EQ(next_fraction(0.0, 1, true), 1.0);
    EXPECT_THROW(next_fraction(0.5, 0, true), std::invalid_argument);
}

TEST(PfPick, ArgmaxOfWeightedRatio) {
    const std::vector<double> w{1, 1}, r{100, 100}, h{200, 100};
    EXPECT_EQ(pf_pick(w, h, r), 0u);
}

TEST(PfPick, SingleClientAlwaysPicked) {
    const std::vector<double> w{3}, r{1e6}, h{1};
    EXPECT_EQ(pf_pick(w, h, r), 0u);
    const std::vector<double> w0, r0, h0;
    EXPECT_FALSE(pf_pick(w0, h0, r0).has_value());
}

TEST(PfPick, TiesGoToLowestIndex) {
    const std::vector<double> w{1, 2, 1}, r{10, 20, 10}, h{5, 5, 5};
    for (int rep = 0; rep < 3; ++rep) EXPECT_EQ(pf_pick(w, h, r), 0u);
}

TEST(RoundRobin, RotatesByFrame) {
    EXPECT_EQ(rr_pick(2, 0), 0u);
    EXPECT_EQ(rr_pick(2, 1), 1u);
    EXPECT_EQ(rr_pick(2, 2), 0u);
    EXPECT_EQ(rr_pick(2, 3), 1u);
    for (std::uint64_t k = 0; k < 5; ++k) EXPECT_EQ(rr_pick(1, k), 0u);
    const std::size_t n = 7;
    std::vector<int> count(n, 0);
    for (std::uint64_t k = 0; k < 2 * n; ++k) ++count[rr_pick(n, k)];
    for (int c : count) EXPECT_EQ(c, 2);
    EXPECT_THROW(rr_pick(0, 0), std::invalid_argument);
}

TEST(ScheduleState, FractionsSumToOneAndThroughputMatchesRates) {
    std::mt19937_64 g(7);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 1 + trial % 4, Z = 8 + trial;
        const Matrix H = random_rates(g, n, Z);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 + static_cast<double>(i % 3);
        const auto st = simulate_pf(w, H, 50 + 13 * trial);
        for (std::size_t z = 0; z < Z; ++z) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_GE(st.fraction(i, z), 0.0);
                s += st.fraction(i, z);
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
        const auto r = throughput_of(st.fractions(), H);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(st.throughput()[i], r[i], 1e-9 * r[i]);
    }
}

TEST(ScheduleState, SingleClientGetsEveryBlock) {
    const Matrix H = make_rates({{3, 4, 5}});
    const std::vector<double> w{1};
    const auto st = simulate_pf(w, H, 20);
    for (std::size_t z = 0; z < 3; ++z) EXPECT_DOUBLE_EQ(st.fraction(0, z), 1.0);
    EXPECT_DOUBLE_EQ(st.throughput()[0], 12.0);
}

// Brute-force grid search over (phi_00, phi_01); client 1 takes the rest.
TEST(ScheduleOracle, TwoByTwoMatchesGridSearch) {
    const Matrix H = make_rates({{2, 1}, {1, 2}});
    const std::vector<double> w{1, 1};
    double best = -1e300, arg0 = -1, arg1 = -1;
    for (int a = 0; a <= 100; ++a) {
        for (int b = 0; b <= 100; ++b) {
            const double p0 = a / 100.0, p1 = b / 100.0;
            const double r0 = 2 * p0 + 1 * p1, r1 = 1 * (1 - p0) + 2 * (1 - p1);
            if (r0 <= 0 || r1 <= 0) continue;
            const double v = std::log(r0) + std::log(r1);
            if (v > best) {
                best = v;
                arg0 = p0;
                arg1 = p1;
            }
        }
    }
    ASSERT_DOUBLE_EQ(arg0, 1.0);
    ASSERT_DOUBLE_EQ(arg1, 0.0);

    const auto sol = solve_schedule_oracle(w, H);
    EXPECT_NEAR(sol.fractions(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(sol.fractions(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(sol.fractions(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(sol.pf_value, 2 * std::log(2.0), 1e-12);
    EXPECT_NEAR(sol.pf_value, best, 1e-12);
}

TEST(ScheduleOracle, SingleClientTakesEverything) {
    const Matrix H = make_rates({{1, 2, 3, 4}});
    const std::vector<double> w{2};
    const auto sol = solve_schedule_oracle(w, H);
    EXPECT_DOUBLE_EQ(sol.throughput[0], 10.0);
    for (std::size_t z = 0; z < 4; ++z) EXPECT_DOUBLE_EQ(sol.fractions(0, z), 1.0);
}

TEST(ScheduleOracle, SymmetricClientsSplitEvenly) {
    for (std::size_t n : {2u, 3u, 5u}) {
        Matrix H(n, 6);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t z = 0; z < 6; ++z) H(i, z) = 10.0 + static_cast<double>(z);
        const std::vector<double> w(n, 1.0);
        const auto sol = solve_schedule_oracle(w, H);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(sol.throughput[i], 75.0 / n, 1e-6 * 75.0);
    }
}

TEST(ScheduleOracle, TwoClientExactBeatsFineGrid) {
    std::mt19937_64 g(11);
    const Matrix H = random_rates(g, 2, 3);
    const std::vector<double> w{1.0, 2.0};
    double best = -1e300;
    const int steps = 100;
    for (int a = 0; a <= steps; ++a)
        for (int b = 0; b <= steps; ++b)
            for (int c = 0; c <= steps; ++c) {
                const double p[3] = {a / double(steps), b / double(steps), c / double(steps)};
                double r0 = 0, r1 = 0;
                for (int z = 0; z < 3; ++z) {
                    r0 += p[z] * H(0, z);
                    r1 += (1 - p[z]) * H(1, z);
                }
                if (r0 > 0 && r1 > 0) best = std::max(best, w[0] * std::log(r0) + w[1] * std::log(r1));
            }
    const auto sol = solve_schedule_oracle(w, H);
    EXPECT_GE(sol.pf_value, best - 1e-12);
    EXPECT_LT(sol.pf_value - best, 1e-3);
    EXPECT_LT(sol.kkt_residual, 1e-9);
}

TEST(ScheduleOracle, KktHoldsOnRandomInstances) {
    std::mt19937_64 g(3);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 3 + trial % 4, Z = 16 + 4 * trial;
        const Matrix H = random_rates(g, n, Z);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 + static_cast<double>((i * 7 + trial) % 4);
        const auto sol = solve_schedule_oracle(w, H);
        EXPECT_LT(sol.kkt_residual, 1e-6) << "trial " << trial << " iterations " << sol.iterations;
        for (std::size_t z = 0; z < Z; ++z) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += sol.fractions(i, z);
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
    }
}

TEST(ScheduleOracle, ZeroRateClientIsReported) {
    const Matrix H = make_rates({{1, 2}, {0, 0}});
    const std::vector<double> w{1, 1};
    EXPECT_THROW(solve_schedule_oracle(w, H), std::domain_error);
}

TEST(OnlinePf, ConvergesToOracleOptimum) {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 2 + trial % 3, Z = 12;
        const Matrix H = random_rates(g, n, Z);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 + static_cast<double>(i);
        const auto sol = solve_schedule_oracle(w, H);
        const auto st = simulate_pf(w, H, 10000);
        const double online = pf_value(w, st.throughput());
        EXPECT_LE(std::abs(online - sol.pf_value), 0.01 * std::abs(sol.pf_value));
        EXPECT_LE(online, sol.pf_value + 1e-9);
    }
}
