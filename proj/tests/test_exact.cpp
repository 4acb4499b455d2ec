#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "potts/exact.hpp"

using namespace potts;

TEST(Exact, MatchesConfigurationSumForSmallN) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> f(-1.0, 1.0), t(0.0, 3.0);
    for (int trial = 0; trial < 6; ++trial) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        for (int N = 1; N <= 8; ++N) {
            const auto ref = oracle::brute_force(N, pt.x, pt.y, pt.t);
            const auto got = exact_finite(N, pt);
            EXPECT_NEAR(got.logZ, ref.logZ, 1e-12) << N;
            EXPECT_NEAR(got.m1N, ref.m1, 1e-12) << N;
            EXPECT_NEAR(got.m2N, ref.m2, 1e-12) << N;
            const auto lib = brute_force_finite(N, pt);
            EXPECT_NEAR(lib.logZ, ref.logZ, 1e-12) << N;
        }
    }
}

TEST(Exact, InitialConditionClosedForm) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> f(-3.0, 3.0);
    for (int i = 0; i < 20; ++i) {
        const double x = f(rng), y = f(rng);
        for (int N = 1; N <= 200; ++N) {
            const double closed = initial_partition_closed(N, x, y);
            EXPECT_NEAR(exact_log_partition(N, {x, y, 0.0}), closed, 1e-12 * std::abs(closed));
        }
    }
}

TEST(Exact, SingleSpinMoments) {
    const ThermoPoint pt{0.3, 0.7, 1.1};
    const double z = 1.0 + 2.0 * std::exp(pt.y) * std::cosh(pt.x);
    const auto [m1, m2] = exact_moments(1, pt);
    EXPECT_NEAR(m1, 2.0 * std::exp(pt.y) * std::sinh(pt.x) / z, 1e-15);
    EXPECT_NEAR(m2, 2.0 * std::exp(pt.y) * std::cosh(pt.x) / z, 1e-15);
}

TEST(Exact, ZeroFieldZeroCoupling) {
    for (int N : {1, 10, 100, 1000}) EXPECT_NEAR(exact_finite(N, {0, 0, 0}).F_N, std::log(3.0), 1e-14);
}

TEST(Exact, EvenInLinearField) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> f(-1.0, 1.0), t(0.0, 3.0);
    for (int i = 0; i < 20; ++i) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        const ThermoPoint mirror{-pt.x, pt.y, pt.t};
        for (int N : {3, 17, 120}) {
            const auto a = exact_finite(N, pt), b = exact_finite(N, mirror);
            EXPECT_NEAR(a.logZ, b.logZ, 1e-13 * std::abs(a.logZ));
            EXPECT_NEAR(a.m1N, -b.m1N, 1e-15);
            EXPECT_NEAR(a.m2N, b.m2N, 1e-15);
        }
    }
}

TEST(Exact, MomentsAreFieldDerivativesOfFN) {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> f(-1.0, 1.0), t(0.0, 2.0);
    const double h = 1e-5;
    for (int i = 0; i < 10; ++i) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        for (int N : {5, 60}) {
            const auto r = exact_finite(N, pt);
            const double dx = (exact_finite(N, {pt.x + h, pt.y, pt.t}).F_N - exact_finite(N, {pt.x - h, pt.y, pt.t}).F_N) / (2 * h);
            const double dy = (exact_finite(N, {pt.x, pt.y + h, pt.t}).F_N - exact_finite(N, {pt.x, pt.y - h, pt.t}).F_N) / (2 * h);
            EXPECT_NEAR(r.m1N, dx, 1e-6);
            EXPECT_NEAR(r.m2N, dy, 1e-6);
        }
    }
}

TEST(Exact, MomentInvariants) {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> f(-3.0, 3.0), t(0.0, 4.0);
    for (int i = 0; i < 40; ++i) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        const auto r = exact_finite(50, pt);
        EXPECT_TRUE(std::isfinite(r.F_N));
        EXPECT_LE(std::abs(r.m1N), r.m2N + 1e-15);
        EXPECT_LE(r.m2N, 1.0 + 1e-15);
    }
}

TEST(Exact, LargeNStaysFinite) {
    const auto r = exact_finite(kMaxEnumerationN, {1.0, -1.0, 3.0});
    EXPECT_TRUE(std::isfinite(r.logZ));
    EXPECT_TRUE(std::isfinite(r.m1N));
}

TEST(Exact, SizeErrors) {
    EXPECT_THROW(exact_log_partition(0, {0, 0, 0}), SizeError);
    EXPECT_THROW(exact_log_partition(kMaxEnumerationN + 1, {0, 0, 0}), SizeError);
    EXPECT_THROW(brute_force_finite(kMaxBruteForceN + 1, {0, 0, 0}), SizeError);
    EXPECT_THROW(exact_log_partition(5, {0, 0, -1}), DomainError);
}

TEST(Diffusion, SingleSpinIsIdenticallyZero) {
    EXPECT_LE(diffusion_residual(1, {0.3, 0.7, 1.1}), 1e-12);
}

TEST(Diffusion, ResidualSmallOnRandomPoints) {
    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> f(-1.0, 1.0), t(0.0, 3.0);
    EXPECT_LE(diffusion_residual(50, {-0.5, 0.2, 2.0}), 1e-10);
    for (int i = 0; i < 10; ++i) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        for (int N : {1, 5, 50, 500}) EXPECT_LE(diffusion_residual(N, pt), 1e-10) << N;
    }
}

TEST(Diffusion, WrongCoefficientIsDetected) {
    DiffusionCoefficients wrong;
    wrong.yy = 1.0;
    EXPECT_GT(diffusion_residual(50, {0.1, 0.2, 0.5}, wrong), 1e-3);
    wrong = {};
    wrong.drift = 1.0;
    EXPECT_GT(diffusion_residual(50, {0.1, 0.2, 0.5}, wrong), 1e-3);
}

TEST(Convergence, ZeroPointHasRoundingLevelErrors) {
    const std::vector<int> Ns{10, 100, 1000};
    const auto table = convergence_table(Ns, {0, 0, 0}, std::log(3.0));
    for (const auto& r : table.rows) EXPECT_LE(r.error, 1e-12);
}

TEST(Convergence, ConstantOffsetGrowsLinearly) {
    const std::vector<int> Ns{10, 100};
    const auto t = convergence_table(Ns, {0, 0, 0}, std::log(3.0) + 1e-3);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_NEAR(t.growth_exponent, 1.0, 1e-6);
}
