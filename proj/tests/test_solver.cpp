#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "potts/solver.hpp"

using namespace potts;

namespace {

int count_maxima(const std::vector<EquilibriumBranch>& bs) {
    int n = 0;
    for (const auto& b : bs) n += b.kind == Stationarity::maximum;
    return n;
}

}  // namespace

TEST(Newton, ConvergesToSymmetricRootAtSmallCoupling) {
    const auto b = damped_newton({0.01, 0.6}, {0.0, 0.0, 0.5});
    ASSERT_TRUE(b.has_value());
    EXPECT_NEAR(b->m.m1, 0.0, 1e-12);
    EXPECT_NEAR(b->m.m2, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(b->kind, Stationarity::maximum);
}

TEST(Newton, ConvergesFromOffCentreStart) {
    const auto b = damped_newton({-0.5, 0.8}, {0.0, 0.0, 2.0});
    ASSERT_TRUE(b.has_value());
    EXPECT_LE(b->residual, 1e-12);
    EXPECT_TRUE(is_interior(b->m));
}

TEST(Newton, CuspPointIsFlaggedAsSingular) {
    // Line I cusp at m2 = 3/4: t = 2, x = y = -1/2 + log(2)/2.
    const double v = -0.5 + 0.5 * std::log(2.0);
    const ThermoPoint pt{v, v, 2.0};
    NewtonOutcome out;
    const auto b = damped_newton({0.26, 0.76}, pt, {}, &out);
    if (b) {
        EXPECT_LT(std::abs(b->fold), 1e-4);
        EXPECT_GT(out.iterations, 5);
    } else {
        EXPECT_FALSE(out.ok());
    }
}

TEST(Newton, RejectsBoundaryStart) {
    NewtonOutcome out;
    EXPECT_FALSE(damped_newton({0.5, 0.5}, {0, 0, 1}, {}, &out).has_value());
    EXPECT_EQ(out.status, NewtonStatus::left_domain);
}

TEST(Branches, SingleBranchBelowCriticalTimes) {
    const auto bs = solve_branches({0.0, 0.0, 0.5});
    ASSERT_EQ(bs.size(), 1u);
    EXPECT_NEAR(bs[0].m.m1, 0.0, 1e-12);
    EXPECT_NEAR(bs[0].m.m2, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(bs[0].F, 0.5 / 3.0 + std::log(3.0), 1e-12);
}

TEST(Branches, SymmetricStateAlwaysPresent) {
    for (double t : {0.0, 0.7, 1.2, 1.45, 1.55, 2.0, 3.0}) {
        const auto bs = solve_branches({0.0, 0.0, t});
        bool found = false;
        for (const auto& b : bs) found = found || (std::abs(b.m.m1) < 1e-9 && std::abs(b.m.m2 - 2.0 / 3.0) < 1e-9);
        EXPECT_TRUE(found) << t;
    }
}

TEST(Branches, SymmetricStateIsAFoldAtOneAndAHalf) {
    EXPECT_NEAR(fold_residual(kSymmetricState, 1.5), 0.0, 1e-12);
    EXPECT_LE(eos_residual_q3(kSymmetricState, {0, 0, 1.5}).norm(), 1e-15);
}

TEST(Branches, SupercriticalZeroFieldHasSeveralMaxima) {
    const auto bs = solve_branches({0.0, 0.0, 2.0});
    EXPECT_GE(count_maxima(bs), 2);
    const Equilibrium eq = select_equilibrium(bs);
    EXPECT_TRUE(eq.coexistence);  // ordered states related by m1 -> -m1 and the third ordered state
}

TEST(Branches, NematicFieldPointWithTwoMaxima) {
    const auto bs = solve_branches({0.08, -0.068, 1.3});
    EXPECT_GE(count_maxima(bs), 2);
}

TEST(Branches, FarNegativeNematicFieldIsSingleBranch) {
    const auto bs = solve_branches({0.08, -0.68, 1.3});
    EXPECT_EQ(bs.size(), 1u);
}

TEST(Branches, InvariantsOnRandomPoints) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> f(-1.0, 1.0), t(0.0, 2.5);
    SolverConfig cfg;
    cfg.grid = 21;
    for (int i = 0; i < 30; ++i) {
        const ThermoPoint pt{f(rng), f(rng), t(rng)};
        const auto bs = solve_branches(pt, cfg);
        ASSERT_FALSE(bs.empty());
        for (std::size_t k = 0; k < bs.size(); ++k) {
            EXPECT_LE(eos_residual_q3(bs[k].m, pt).norm(), 1e-12);
            EXPECT_TRUE(is_interior(bs[k].m));
            if (k) {
                EXPECT_GE(bs[k - 1].F, bs[k].F);
            }
            const auto ev = hessian_eigenvalues(eos_jacobian_q3(bs[k].m, pt.t));
            switch (bs[k].kind) {
                case Stationarity::maximum: EXPECT_LT(ev[1], 0.0); break;
                case Stationarity::minimum: EXPECT_GT(ev[0], 0.0); break;
                case Stationarity::saddle: EXPECT_LE(ev[0], 1e-9); break;
            }
            for (std::size_t j = 0; j < k; ++j) EXPECT_GT(std::hypot(bs[j].m.m1 - bs[k].m.m1, bs[j].m.m2 - bs[k].m.m2), 1e-8);
        }
    }
}

TEST(Branches, UniqueBelowUnitCoupling) {
    SolverConfig cfg;
    cfg.grid = 15;
    for (double t : {0.25, 0.5, 0.9})
        for (int i = -4; i <= 4; ++i)
            for (int j = -4; j <= 4; ++j) {
                const auto bs = solve_branches({0.5 * i, 0.5 * j, t}, cfg);
                EXPECT_EQ(bs.size(), 1u) << "x=" << 0.5 * i << " y=" << 0.5 * j << " t=" << t;
            }
}

TEST(Equilibrium, SingleBranch) {
    const auto bs = solve_branches({0.2, 0.1, 0.5});
    const Equilibrium eq = select_equilibrium(bs);
    EXPECT_FALSE(eq.coexistence);
    EXPECT_EQ(eq.index, 0u);
}

TEST(Equilibrium, NoMaximumIsAnError) {
    EquilibriumBranch s;
    s.kind = Stationarity::saddle;
    const std::vector<EquilibriumBranch> v{s};
    EXPECT_THROW(select_equilibrium(v), SolverError);
    EXPECT_THROW(select_equilibrium(std::vector<EquilibriumBranch>{}), SolverError);
}

TEST(Equilibrium, OddAndEvenUnderLinearFieldReflection) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> f(0.05, 1.0), g(-1.0, 1.0), t(0.0, 2.5);
    for (int i = 0; i < 20; ++i) {
        const double x = f(rng), y = g(rng), tt = t(rng);
        const auto a = equilibrium_at({x, y, tt}), b = equilibrium_at({-x, y, tt});
        EXPECT_NEAR(a.branch.m.m1, -b.branch.m.m1, 1e-10);
        EXPECT_NEAR(a.branch.m.m2, b.branch.m.m2, 1e-10);
    }
}

TEST(Transition, ZeroFieldSwitchAtTwoLogTwo) {
    const TransitionReport r = zero_field_transition();
    EXPECT_NEAR(r.t_star, 2.0 * std::log(2.0), 1e-8);
    EXPECT_NEAR(r.slope_symmetric, 1.0 / 3.0, 1e-12);
    EXPECT_GT(std::abs(r.slope_ordered - r.slope_symmetric), 0.1);
    // Equilibrium F is continuous across the switch.
    const double h = 1e-6;
    EXPECT_NEAR(limit_free_energy({0, 0, r.t_star - h}), limit_free_energy({0, 0, r.t_star + h}), 1e-5);
}

TEST(Sweep, SubcriticalProfileIsSingleValuedWithSymmetry) {
    const SweepResult s = sweep_profile(0.0, -1.0, 1.0, 41, 0.5);
    EXPECT_EQ(s.max_branches, 1u);
    EXPECT_TRUE(s.multivalued.empty());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        const auto& a = s.samples[i];
        const auto& b = s.samples[s.samples.size() - 1 - i];
        EXPECT_NEAR(a.branches[0].m.m1, -b.branches[0].m.m1, 1e-10);
        EXPECT_NEAR(a.branches[0].m.m2, b.branches[0].m.m2, 1e-10);
        EXPECT_EQ(a.ids[0], 0);
    }
}

TEST(Sweep, MultivaluedIntervalsEndOnFolds) {
    const SweepResult s = sweep_profile(-0.068, -0.3, 0.3, 61, 1.32);
    EXPECT_GT(s.max_branches, 1u);
    EXPECT_FALSE(s.multivalued.empty());
    ASSERT_FALSE(s.folds.empty());
    for (const auto& f : s.folds) {
        EXPECT_LE(std::abs(f.fold), 1e-6);
        EXPECT_LE(f.residual, 1e-10);
    }
    for (const auto& smp : s.samples) EXPECT_FALSE(smp.branches.empty());
}

TEST(Sweep, BadRangeIsRejected) {
    EXPECT_THROW(sweep_profile(0.0, 1.0, -1.0, 11, 0.5), DomainError);
    EXPECT_THROW(sweep_profile(0.0, -1.0, 1.0, 1, 0.5), DomainError);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
    SolverConfig one, four;
    four.threads = 4;
    const auto a = sweep_profile(-0.068, -0.2, 0.2, 21, 1.3, one);
    const auto b = sweep_profile(-0.068, -0.2, 0.2, 21, 1.3, four);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        ASSERT_EQ(a.samples[i].branches.size(), b.samples[i].branches.size());
        for (std::size_t k = 0; k < a.samples[i].branches.size(); ++k) {
            EXPECT_EQ(a.samples[i].branches[k].m.m1, b.samples[i].branches[k].m.m1);
            EXPECT_EQ(a.samples[i].ids[k], b.samples[i].ids[k]);
        }
    }
}

TEST(Catastrophe, NotFoundBelowUnitCoupling) {
    const auto r = detect_catastrophe(0.5, 0.0, 1.0);
    EXPECT_FALSE(r.found);
}

TEST(Catastrophe, LineImageOnsetMatchesClosedForm) {
    const double m2 = 0.6;
    const double y = map_cusp_to_fields(Locus::I, m2).v2;
    const auto r = detect_catastrophe(y, 1.15, 1.3);
    ASSERT_TRUE(r.found);
    EXPECT_LE(r.t_hi - r.t_lo, 1e-4);
    ASSERT_TRUE(r.cusp.has_value());
    EXPECT_NEAR(r.cusp->t_c, critical_time(Locus::I, m2), 1e-6);
    EXPECT_NEAR(r.cusp->m.m2, m2, 1e-6);
    EXPECT_LE(r.cusp->residuals.max_abs(), 1e-6);
    ASSERT_TRUE(r.locus.has_value());
    EXPECT_TRUE(*r.locus == Locus::I || *r.locus == Locus::II);
}

TEST(Convergence, RefusesFoldPoints) {
    const double v = -0.5 + 0.5 * std::log(2.0);
    // At the line I cusp the ordered equilibrium is degenerate.
    const std::vector<int> Ns{10, 100};
    const auto eq = equilibrium_at({v, v, 2.0});
    if (std::abs(eq.branch.fold) < kFoldGuard) {
        EXPECT_THROW(finite_size_convergence(Ns, {v, v, 2.0}), DomainError);
    }
    const auto t = finite_size_convergence(Ns, {0.0, 0.0, 0.5});
    EXPECT_TRUE(t.strictly_decreasing);
}
