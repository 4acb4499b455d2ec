#pragma once

// Exact finite-N partition function of the q = 3 complete-graph model by
// summing over occupation classes (n_plus, n_minus, n_zero).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "potts/types.hpp"

namespace potts {

inline constexpr int kMaxEnumerationN = 20000;

struct FiniteNResult {
    int N = 0;
    double logZ = 0.0;
    double F_N = 0.0;  // logZ / N
    double m1N = 0.0;
    double m2N = 0.0;
};

struct OccupationClass {
    int n_plus = 0;
    int n_minus = 0;
    int n_zero = 0;
    double log_multiplicity = 0.0;

    [[nodiscard]] int N() const noexcept { return n_plus + n_minus + n_zero; }
    [[nodiscard]] double mu1() const noexcept { return double(n_plus - n_minus) / N(); }
    [[nodiscard]] double mu2() const noexcept { return double(n_plus + n_minus) / N(); }
};

/// Interaction part of the exponent per spin: mu1^2/2 + 3 mu2^2/2 - 2 mu2.
inline double interaction_density(double mu1, double mu2) noexcept {
    return 0.5 * mu1 * mu1 + 1.5 * mu2 * mu2 - 2.0 * mu2;
}

/// Exponent of one configuration with moments (mu1, mu2): N [t g + x mu1 + y mu2].
inline double configuration_exponent(int N, double mu1, double mu2, const ThermoPoint& pt) noexcept {
    return N * (pt.t * interaction_density(mu1, mu2) + pt.x * mu1 + pt.y * mu2);
}

/// log k! for k = 0..N, accumulated with compensated summation.
inline std::vector<double> log_factorial_table(int N) {
    std::vector<double> lf(static_cast<std::size_t>(N) + 1, 0.0);
    double sum = 0.0, comp = 0.0;
    for (int k = 2; k <= N; ++k) {
        const double yk = std::log(double(k)) - comp;
        const double tk = sum + yk;
        comp = (tk - sum) - yk;
        sum = tk;
        lf[static_cast<std::size_t>(k)] = sum;
    }
    return lf;
}

inline OccupationClass make_class(int n_plus, int n_minus, int n_zero, std::span<const double> lf) {
    const int N = n_plus + n_minus + n_zero;
    return {n_plus, n_minus, n_zero,
            lf[std::size_t(N)] - lf[std::size_t(n_plus)] - lf[std::size_t(n_minus)] - lf[std::size_t(n_zero)]};
}

/// Coefficients of Z_t + drift Z_y = (1/N)(xx Z_xx + yy Z_yy).
struct DiffusionCoefficients {
    double drift = 2.0;
    double xx = 0.5;
    double yy = 1.5;
};

namespace detail {

inline void check_size(int N) {
    if (N < 1 || N > kMaxEnumerationN)
        throw SizeError("N = " + std::to_string(N) + " outside [1, " + std::to_string(kMaxEnumerationN) + "]");
}

/// Weighted class averages, normalized by Z.
struct ClassAverages {
    double logZ = 0.0;
    double mu1 = 0.0, mu2 = 0.0;
    double mu1_sq = 0.0, mu2_sq = 0.0;
    double g = 0.0;  // interaction density
};

/// Two passes: the first finds the largest exponent, the second sums
/// exp(e - e_max) row by row (fixed order, reproducible).
inline ClassAverages enumerate_classes(int N, const ThermoPoint& pt) {
    check_size(N);
    pt.validate();
    const auto lf = log_factorial_table(N);
    const double invN = 1.0 / N;

    auto exponent = [&](int np, int nm) {
        const int n0 = N - np - nm;
        const double mu1 = (np - nm) * invN;
        const double mu2 = (np + nm) * invN;
        return lf[std::size_t(N)] - lf[std::size_t(np)] - lf[std::size_t(nm)] - lf[std::size_t(n0)] +
               configuration_exponent(N, mu1, mu2, pt);
    };

    double emax = -std::numeric_limits<double>::infinity();
    for (int np = 0; np <= N; ++np)
        for (int nm = 0; nm <= N - np; ++nm) emax = std::max(emax, exponent(np, nm));

    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s11 = 0.0, s22 = 0.0, sg = 0.0;
    for (int np = 0; np <= N; ++np) {
        double r0 = 0.0, r1 = 0.0, r2 = 0.0, r11 = 0.0, r22 = 0.0, rg = 0.0;
        for (int nm = 0; nm <= N - np; ++nm) {
            const double w = std::exp(exponent(np, nm) - emax);
            const double mu1 = (np - nm) * invN;
            const double mu2 = (np + nm) * invN;
            r0 += w;
            r1 += w * mu1;
            r2 += w * mu2;
            r11 += w * mu1 * mu1;
            r22 += w * mu2 * mu2;
            rg += w * interaction_density(mu1, mu2);
        }
        s0 += r0;
        s1 += r1;
        s2 += r2;
        s11 += r11;
        s22 += r22;
        sg += rg;
    }
    return {emax + std::log(s0), s1 / s0, s2 / s0, s11 / s0, s22 / s0, sg / s0};
}

}  // namespace detail

/// log Z_N with Z_N = sum over configurations of exp(N [t g + x mu1 + y mu2]).
inline double exact_log_partition(int N, const ThermoPoint& pt) {
    return detail::enumerate_classes(N, pt).logZ;
}

/// log Z_N at t = 0: N log(1 + 2 e^y cosh x).
inline double initial_partition_closed(int N, double x, double y) {
    if (N < 1) throw SizeError("initial_partition_closed: N must be >= 1");
    return N * std::log1p(2.0 * std::exp(y) * std::cosh(x));
}

/// Expected moments <mu1>, <mu2> as weighted class averages.
inline FiniteNResult exact_finite(int N, const ThermoPoint& pt) {
    const auto a = detail::enumerate_classes(N, pt);
    return {N, a.logZ, a.logZ / N, a.mu1, a.mu2};
}

inline std::pair<double, double> exact_moments(int N, const ThermoPoint& pt) {
    const auto r = exact_finite(N, pt);
    return {r.m1N, r.m2N};
}

/// Residual of the linear diffusion identity satisfied by Z_N, relative to
/// Z_N, with every derivative evaluated analytically class by class:
/// Z_t = sum w N g, Z_y = sum w N mu2, Z_xx = sum w (N mu1)^2, Z_yy = sum w (N mu2)^2.
inline double diffusion_residual(int N, const ThermoPoint& pt, const DiffusionCoefficients& c = {}) {
    const auto a = detail::enumerate_classes(N, pt);
    const double n = N;
    const double zt = n * a.g;
    const double zy = n * a.mu2;
    const double zxx = n * n * a.mu1_sq;
    const double zyy = n * n * a.mu2_sq;
    return std::abs(zt + c.drift * zy - (c.xx * zxx + c.yy * zyy) / n);
}

inline constexpr int kMaxBruteForceN = 12;

/// Direct sum over all 3^N spin configurations (small N only).
inline FiniteNResult brute_force_finite(int N, const ThermoPoint& pt) {
    if (N < 1 || N > kMaxBruteForceN)
        throw SizeError("brute_force_finite: N must lie in [1, " + std::to_string(kMaxBruteForceN) + "]");
    pt.validate();
    long total = 1;
    for (int i = 0; i < N; ++i) total *= 3;
    const auto n = static_cast<std::size_t>(total);
    std::vector<double> e(n), mu1(n), mu2(n);
    constexpr int value[3] = {1, -1, 0};
    for (long c = 0; c < total; ++c) {
        long code = c, s1 = 0, s2 = 0;
        for (int i = 0; i < N; ++i) {
            const int v = value[code % 3];
            code /= 3;
            s1 += v;
            s2 += v * v;
        }
        mu1[std::size_t(c)] = double(s1) / N;
        mu2[std::size_t(c)] = double(s2) / N;
        e[std::size_t(c)] = configuration_exponent(N, mu1[std::size_t(c)], mu2[std::size_t(c)], pt);
    }
    const double emax = *std::max_element(e.begin(), e.end());
    double z = 0.0, z1 = 0.0, z2 = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) {
        const double w = std::exp(e[c] - emax);
        z += w;
        z1 += w * mu1[c];
        z2 += w * mu2[c];
    }
    const double logZ = emax + std::log(z);
    return {N, logZ, logZ / N, z1 / z, z2 / z};
}

struct ConvergenceRow {
    int N = 0;
    double F_N = 0.0;
    double error = 0.0;  // |F_N - F_limit|
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool strictly_decreasing = false;
    /// Least-squares slope of log(N |F_N - F|) against log N; NaN if any error is 0.
    double growth_exponent = std::numeric_limits<double>::quiet_NaN();
};

inline ConvergenceTable convergence_table(std::span<const int> Ns, const ThermoPoint& pt, double F_limit) {
    ConvergenceTable table;
    for (int N : Ns) {
        const double fn = exact_log_partition(N, pt) / N;
        table.rows.push_back({N, fn, std::abs(fn - F_limit)});
    }
    table.strictly_decreasing = table.rows.size() >= 2;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (!(table.rows[i].N > table.rows[i - 1].N && table.rows[i].error < table.rows[i - 1].error))
            table.strictly_decreasing = false;

    if (table.rows.size() >= 2 &&
        std::all_of(table.rows.begin(), table.rows.end(), [](const ConvergenceRow& r) { return r.error > 0.0; })) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = double(table.rows.size());
        for (const auto& r : table.rows) {
            const double lx = std::log(double(r.N));
            const double ly = std::log(r.N * r.error);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        table.growth_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return table;
}

}  // namespace potts
