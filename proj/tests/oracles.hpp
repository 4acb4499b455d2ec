#pragma once

// Reference computations written without the library's closed forms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

struct Finite {
    double logZ;
    double m1;
    double m2;
};

/// Sum over all 3^N configurations. The coupling is written with the spin
/// equality itself: exponent = (t/N) sum_{i,j} [s_i == s_j] - N t + x sum s + y sum s^2.
inline Finite brute_force(int N, double x, double y, double t) {
    long total = 1;
    for (int i = 0; i < N; ++i) total *= 3;
    std::vector<int> s(std::size_t(N), 0);
    std::vector<double> e, a1, a2;
    const int value[3] = {1, -1, 0};
    for (long c = 0; c < total; ++c) {
        long code = c;
        for (int i = 0; i < N; ++i) {
            s[std::size_t(i)] = value[code % 3];
            code /= 3;
        }
        long same = 0, sum1 = 0, sum2 = 0;
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < N; ++j) same += s[std::size_t(i)] == s[std::size_t(j)];
            sum1 += s[std::size_t(i)];
            sum2 += s[std::size_t(i)] * s[std::size_t(i)];
        }
        e.push_back(t * double(same) / N - N * t + x * double(sum1) + y * double(sum2));
        a1.push_back(double(sum1) / N);
        a2.push_back(double(sum2) / N);
    }
    const double emax = *std::max_element(e.begin(), e.end());
    double z = 0, z1 = 0, z2 = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const double w = std::exp(e[k] - emax);
        z += w;
        z1 += w * a1[k];
        z2 += w * a2[k];
    }
    return {emax + std::log(z), z1 / z, z2 / z};
}

/// Probabilities of (+1, -1, 0) from their definition: m1 = p+ - p-, m2 = p+ + p-.
inline std::array<double, 3> probabilities(double m1, double m2) {
    const double plus = (m2 + m1) / 2.0;
    const double minus = m2 - plus;
    return {plus, minus, 1.0 - plus - minus};
}

/// Limiting free energy written out term by term.
inline double free_energy(double m1, double m2, double x, double y, double t) {
    const auto p = probabilities(m1, m2);
    double f = x * m1 + y * m2;
    for (double q : p) {
        f += t * q * q;
        if (q > 0) f -= q * std::log(q);
    }
    return f;
}

inline std::array<double, 2> gradient_fd(double m1, double m2, double x, double y, double t, double h) {
    return {(free_energy(m1 + h, m2, x, y, t) - free_energy(m1 - h, m2, x, y, t)) / (2 * h),
            (free_energy(m1, m2 + h, x, y, t) - free_energy(m1, m2 - h, x, y, t)) / (2 * h)};
}

/// Uniform point in the probability simplex with every component >= margin,
/// returned as (m1, m2).
inline std::array<double, 2> interior_point(std::mt19937_64& rng, double margin) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng), b = u(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double span = 1.0 - 3.0 * margin;
    const double p1 = margin + span * lo;
    const double p2 = margin + span * (hi - lo);
    return {p1 - p2, p1 + p2};
}

}  // namespace oracle
