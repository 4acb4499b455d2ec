#pragma once

// Closed-form expressions of the mean-field Potts model: Kronecker polynomial,
// moment <-> probability maps, limiting free energy, equations of state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "potts/types.hpp"

namespace potts {

namespace detail {

inline bool has_level(const ModelSpec& spec, double s) {
    return std::find(spec.levels.begin(), spec.levels.end(), s) != spec.levels.end();
}

inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace detail

/// Kronecker delta of two spin values written as a polynomial in the levels.
inline double kronecker_poly(const ModelSpec& spec, double si, double sj) {
    if (!detail::has_level(spec, si) || !detail::has_level(spec, sj))
        throw DomainError("kronecker_poly: spin value is not a level of the model");
    const auto& a = spec.levels;
    double sum = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        double prod = 1.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (k == l) continue;
            const double den = a[l] - a[k];
            prod *= (si - a[k]) * (sj - a[k]) / (den * den);
        }
        sum += prod;
    }
    return sum;
}

/// Expanded q = 3 form for levels {-1, 0, 1}.
inline double kronecker_q3_expanded(double si, double sj) {
    const double si2 = si * si, sj2 = sj * sj;
    return 1.5 * si2 * sj2 + 0.5 * si * sj - (si2 + sj2) + 1.0;
}

/// Linear map between moments (1, m_1..m_{q-1}) and state probabilities.
///
/// The forward matrix is the Vandermonde matrix W with W(k, j) = a_j^k, so
/// that m_k = sum_j p_j a_j^k. Its inverse is assembled from the monomial
/// coefficients of the Lagrange basis polynomials L_j(z) over the levels:
/// row j of W^{-1} holds the coefficients of L_j. Column 0 of the inverse is
/// the offset vector d and the remaining columns form the table c.
class VandermondeMap {
public:
    explicit VandermondeMap(ModelSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        const std::size_t q = spec_.q();
        const auto& a = spec_.levels;
        forward_.assign(q * q, 0.0);
        inverse_.assign(q * q, 0.0);
        for (std::size_t j = 0; j < q; ++j) {
            double pw = 1.0;
            for (std::size_t k = 0; k < q; ++k) {
                forward_[k * q + j] = pw;
                pw *= a[j];
            }
        }
        for (std::size_t j = 0; j < q; ++j) {
            // Expand prod_{i != j} (z - a_i) / (a_j - a_i) into monomials.
            std::vector<double> poly{1.0};
            for (std::size_t i = 0; i < q; ++i) {
                if (i == j) continue;
                const double scale = 1.0 / (a[j] - a[i]);
                std::vector<double> next(poly.size() + 1, 0.0);
                for (std::size_t d = 0; d < poly.size(); ++d) {
                    next[d + 1] += poly[d] * scale;
                    next[d] -= poly[d] * a[i] * scale;
                }
                poly = std::move(next);
            }
            for (std::size_t k = 0; k < q; ++k) inverse_[j * q + k] = poly[k];
        }
    }

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t q() const noexcept { return spec_.q(); }

    /// W(k, j) = a_j^k, k, j in [0, q).
    [[nodiscard]] double forward(std::size_t k, std::size_t j) const { return forward_[k * q() + j]; }
    /// (W^{-1})(j, k): coefficient of z^k in L_j.
    [[nodiscard]] double inverse(std::size_t j, std::size_t k) const { return inverse_[j * q() + k]; }

    [[nodiscard]] double offset(std::size_t k) const { return inverse(k, 0); }
    /// c_{kl}, l in [1, q).
    [[nodiscard]] double coeff(std::size_t k, std::size_t l) const { return inverse(k, l); }

    /// p = W^{-1} (1, m_1, ..., m_{q-1}), without domain checks.
    [[nodiscard]] ProbabilityVector apply_inverse(std::span<const double> m) const {
        const std::size_t q = this->q();
        if (m.size() + 1 != q) throw DomainError("VandermondeMap: expected q-1 moments");
        ProbabilityVector p(q, 0.0);
        for (std::size_t j = 0; j < q; ++j) {
            double s = offset(j);
            for (std::size_t l = 1; l < q; ++l) s += coeff(j, l) * m[l - 1];
            p[j] = s;
        }
        return p;
    }

    /// m_k = sum_j p_j a_j^k for k in [1, q).
    [[nodiscard]] MomentVector apply_forward(std::span<const double> p) const {
        const std::size_t q = this->q();
        if (p.size() != q) throw DomainError("VandermondeMap: expected q probabilities");
        MomentVector m(q - 1, 0.0);
        for (std::size_t k = 1; k < q; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) s += forward(k, j) * p[j];
            m[k - 1] = s;
        }
        return m;
    }

private:
    ModelSpec spec_;
    std::vector<double> forward_;
    std::vector<double> inverse_;
};

namespace detail {

/// Clamp components in [-eps, 0) to zero; throw on anything below.
inline void check_probabilities(ProbabilityVector& p) {
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(p[k] >= -kDomainEps))
            throw DomainError("probability p" + std::to_string(k + 1) + " is negative: moments outside the simplex",
                              static_cast<std::ptrdiff_t>(k));
        if (p[k] < 0.0) p[k] = 0.0;
    }
}

inline void require_interior(std::span<const double> p) {
    for (std::size_t k = 0; k < p.size(); ++k)
        if (!(p[k] > 0.0))
            throw SingularDomainError("equations of state need all probabilities > 0 (p" + std::to_string(k + 1) +
                                          " on the boundary)",
                                      static_cast<std::ptrdiff_t>(k));
}

inline std::array<double, 3> raw_probabilities(const Moments& m) {
    return {0.5 * (m.m1 + m.m2), 0.5 * (m.m2 - m.m1), 1.0 - m.m2};
}

}  // namespace detail

/// q = 3 closed form: p = ((m1+m2)/2, (m2-m1)/2, 1-m2) for states (+1, -1, 0).
inline ProbabilityVector probabilities_from_moments(const Moments& m) {
    const auto raw = detail::raw_probabilities(m);
    ProbabilityVector p(raw.begin(), raw.end());
    detail::check_probabilities(p);
    return p;
}

/// General q: p = W^{-1} (1, m_1..m_{q-1}).
inline ProbabilityVector probabilities_from_moments(const VandermondeMap& map, std::span<const double> m) {
    ProbabilityVector p = map.apply_inverse(m);
    detail::check_probabilities(p);
    return p;
}

inline ProbabilityVector probabilities_from_moments(const ModelSpec& spec, std::span<const double> m) {
    return probabilities_from_moments(VandermondeMap(spec), m);
}

inline MomentVector moments_from_probabilities(const VandermondeMap& map, std::span<const double> p) {
    return map.apply_forward(p);
}

inline MomentVector moments_from_probabilities(const ModelSpec& spec, std::span<const double> p) {
    return VandermondeMap(spec).apply_forward(p);
}

inline Moments moments_from_probabilities(std::span<const double> p) {
    if (p.size() != 3) throw DomainError("moments_from_probabilities: q = 3 expects three probabilities");
    return {p[0] - p[1], p[0] + p[1]};
}

/// Limiting free energy F = x m1 + y m2 + t sum p^2 - sum p log p (q = 3).
inline double free_energy(const Moments& m, const ThermoPoint& pt) {
    const auto p = probabilities_from_moments(m);
    double sq = 0.0, ent = 0.0;
    for (double pk : p) {
        sq += pk * pk;
        ent += detail::xlogx(pk);
    }
    return pt.x * m.m1 + pt.y * m.m2 + sq * pt.t - ent;
}

/// General q: F = t sum p^2 - sum p log p + sum_k fields_k m_k.
inline double free_energy(const VandermondeMap& map, std::span<const double> m, std::span<const double> fields,
                          double t) {
    if (fields.size() != m.size()) throw DomainError("free_energy: need one field per moment");
    const auto p = probabilities_from_moments(map, m);
    double f = 0.0;
    for (double pk : p) f += pk * pk * t - detail::xlogx(pk);
    for (std::size_t k = 0; k < m.size(); ++k) f += fields[k] * m[k];
    return f;
}

/// Equations of state (psi1, psi2) = grad F for q = 3. Strict interior only.
inline Vec2 eos_residual_q3(const Moments& m, const ThermoPoint& pt) {
    const auto p = detail::raw_probabilities(m);
    detail::require_interior(p);
    const double psi1 = pt.x + m.m1 * pt.t - 0.5 * std::log(p[0] / p[1]);
    // (m2^2 - m1^2) / (4 (m2 - 1)^2) = p1 p2 / p3^2
    const double psi2 = pt.y + (3.0 * m.m2 - 2.0) * pt.t - 0.5 * std::log(p[0] * p[1] / (p[2] * p[2]));
    return {psi1, psi2};
}

/// d(psi_i)/d(m_j), i.e. the Hessian of F in (m1, m2).
inline Mat2 eos_jacobian_q3(const Moments& m, double t) {
    detail::require_interior(detail::raw_probabilities(m));
    const double d = m.m2 * m.m2 - m.m1 * m.m1;
    const double off = m.m1 / d;
    return {t - m.m2 / d, off, off, 3.0 * t - m.m2 / d + 1.0 / (m.m2 - 1.0)};
}

/// General-q stationarity conditions:
/// dF/dm_j = fields_j + sum_k c_{kj} (2 t p_k - log p_k - 1).
inline MomentVector eos_residual_general(const VandermondeMap& map, std::span<const double> m,
                                         std::span<const double> fields, double t) {
    if (fields.size() != m.size()) throw DomainError("eos_residual_general: need one field per moment");
    const ProbabilityVector p = map.apply_inverse(m);
    detail::require_interior(p);
    const std::size_t q = map.q();
    std::vector<double> g(q);
    for (std::size_t k = 0; k < q; ++k) g[k] = 2.0 * t * p[k] - std::log(p[k]) - 1.0;
    MomentVector r(q - 1, 0.0);
    for (std::size_t j = 1; j < q; ++j) {
        double s = fields[j - 1];
        for (std::size_t k = 0; k < q; ++k) s += map.coeff(k, j) * g[k];
        r[j - 1] = s;
    }
    return r;
}

inline MomentVector eos_residual_general(const ModelSpec& spec, std::span<const double> m,
                                         std::span<const double> fields, double t) {
    return eos_residual_general(VandermondeMap(spec), m, fields, t);
}

/// True when all three probabilities exceed `margin`.
inline bool is_interior(const Moments& m, double margin = 0.0) {
    const auto p = detail::raw_probabilities(m);
    return p[0] > margin && p[1] > margin && p[2] > margin;
}

}  // namespace potts
