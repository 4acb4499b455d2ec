#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "potts/mc.hpp"

using namespace potts;

TEST(Metropolis, IncrementalExponentMatchesRecomputation) {
    std::mt19937_64 rng(51);
    const ThermoPoint pt{0.3, -0.4, 1.7};
    const int N = 37;
    MetropolisChain chain(N, pt, 9, StartState::all_zero);
    std::vector<int> state(std::size_t(N), 2);
    std::uniform_int_distribution<int> site(0, N - 1), pick(0, 2);
    for (int i = 0; i < 500; ++i) {
        const auto k = std::size_t(site(rng));
        const int to = pick(rng);
        const double predicted = chain.exponent() + chain.delta_exponent(state[k], to);
        chain.set_spin(k, to);
        state[k] = to;
        EXPECT_NEAR(chain.exponent(), predicted, 1e-9);
        EXPECT_NEAR(chain.exponent_from_spins(), chain.exponent(), 1e-9);
    }
}

TEST(Metropolis, RunningCountsTrackSpinsAfterSweeps) {
    MetropolisChain chain(50, {0.1, 0.2, 1.2}, 3, StartState::all_plus);
    for (int i = 0; i < 100; ++i) {
        chain.sweep();
        EXPECT_NEAR(chain.exponent(), chain.exponent_from_spins(), 1e-9);
        const auto& c = chain.counts();
        EXPECT_EQ(c[0] + c[1] + c[2], 50);
    }
}

TEST(Metropolis, StartStates) {
    const ThermoPoint pt{0, 0, 1};
    EXPECT_EQ(MetropolisChain(10, pt, 1, StartState::all_zero).counts()[2], 10);
    EXPECT_EQ(MetropolisChain(10, pt, 1, StartState::all_plus).counts()[0], 10);
    EXPECT_EQ(chain_start(0), StartState::all_zero);
    EXPECT_EQ(chain_start(1), StartState::all_plus);
    EXPECT_EQ(chain_start(2), StartState::random);
    EXPECT_EQ(chain_start(3), StartState::all_zero);
}

TEST(Metropolis, StationaryDistributionOnThreeSpins) {
    // Occupation classes of 3 spins, weighted by multiplicity and exponent.
    const int N = 3;
    const ThermoPoint pt{0.4, -0.3, 1.1};
    std::map<std::tuple<long, long, long>, double> exact;
    double z = 0;
    const int fact[4] = {1, 1, 2, 6};
    for (int a = 0; a <= N; ++a)
        for (int b = 0; a + b <= N; ++b) {
            const int c = N - a - b;
            const double w = 6.0 / (fact[a] * fact[b] * fact[c]) * std::exp(chain_exponent(a - b, a + b, N, pt));
            exact[{a, b, c}] = w;
            z += w;
        }
    ASSERT_EQ(exact.size(), 10u);
    for (auto& [k, w] : exact) w /= z;

    MetropolisChain chain(N, pt, 77, StartState::random);
    std::map<std::tuple<long, long, long>, long> hist;
    const long steps = 2'000'000;
    for (long i = 0; i < 1000; ++i) chain.step();
    for (long i = 0; i < steps; ++i) {
        chain.step();
        const auto& c = chain.counts();
        ++hist[{c[0], c[1], c[2]}];
    }
    for (const auto& [k, p] : exact) {
        const double f = double(hist[k]) / double(steps);
        EXPECT_NEAR(f, p, 5e-3) << std::get<0>(k) << "," << std::get<1>(k) << "," << std::get<2>(k);
    }
}

TEST(Mc, SameSeedIsBitIdentical) {
    McConfig cfg;
    cfg.N = 40;
    cfg.sweeps = 2000;
    cfg.burn_in = 200;
    const ThermoPoint pt{0.1, 0.2, 0.8};
    const auto a = mc_run(pt, cfg), b = mc_run(pt, cfg);
    EXPECT_EQ(a.mean_m1, b.mean_m1);
    EXPECT_EQ(a.mean_m2, b.mean_m2);
    EXPECT_EQ(a.stderr_m1, b.stderr_m1);
    cfg.threads = 3;
    const auto c = mc_run(pt, cfg);
    EXPECT_EQ(a.mean_m1, c.mean_m1);
    cfg.seed += 1;
    const auto d = mc_run(pt, cfg);
    EXPECT_NE(a.mean_m1, d.mean_m1);
}

TEST(Mc, SeedStreamsDiffer) {
    EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
    EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
    EXPECT_EQ(stream_seed(5, 2), stream_seed(5, 2));
}

TEST(Mc, BatchMeans) {
    const std::vector<double> xs{1, 1, 3, 3, 5, 5, 7, 7};
    const BatchMeans b = batch_means(xs, 4);
    EXPECT_DOUBLE_EQ(b.mean, 4.0);
    // batch means 1,3,5,7: sample variance 20/3, stderr sqrt(20/3/4)
    EXPECT_NEAR(b.stderr_, std::sqrt(20.0 / 3.0 / 4.0), 1e-12);
}

TEST(Mc, ConfigValidation) {
    McConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.burn_in = cfg.sweeps;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = {};
    cfg.N = 0;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = {};
    cfg.thinning = 0;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = {};
    cfg.chains = 0;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = {};
    cfg.batches = 1;
    EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Mc, AgreesWithExactMomentsOnBattery) {
    const McBatteryReport r = mc_battery(standard_mc_battery(), McConfig{});
    EXPECT_EQ(r.pairs, 20);
    EXPECT_GE(r.pass_fraction(), 0.95);
    for (const auto& row : r.rows) EXPECT_FALSE(row.mc.chains_disagree);
}

TEST(Mc, ZScore) {
    EXPECT_DOUBLE_EQ(z_score(1.0, 0.5, 0.25), 2.0);
    EXPECT_EQ(z_score(1.0, 1.0, 0.0), 0.0);
    EXPECT_TRUE(std::isinf(z_score(1.0, 0.5, 0.0)));
}
