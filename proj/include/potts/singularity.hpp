#pragma once

// Fold and cusp structure of the q = 3 equations of state viewed as a map
// (m1, m2) -> (x, y) parametrised by t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "potts/core.hpp"
#include "potts/types.hpp"

namespace potts {

/// Field values at which m is a stationary point of F for coupling t:
/// x = -m1 t + log(p1/p2)/2, y = -(3 m2 - 2) t + log(p1 p2 / p3^2)/2.
inline Vec2 fields_at_stationary_point(const Moments& m, double t) {
    const Vec2 r = eos_residual_q3(m, ThermoPoint{0.0, 0.0, t});
    return {-r.v1, -r.v2};
}

/// Jacobian determinant of the moment-to-field map; zero on the fold set.
inline double fold_residual(const Moments& m, double t) { return eos_jacobian_q3(m, t).det(); }

/// dJ/dm1, dJ/dm2 and dJ/dt.
struct FoldGradient {
    double dm1 = 0.0;
    double dm2 = 0.0;
    double dt = 0.0;
};

/// Closed-form gradient of the fold determinant. With d = m2^2 - m1^2 the
/// Jacobian entries are A = t - m2/d, B = m1/d, C = 3t - m2/d + 1/(m2 - 1).
inline FoldGradient fold_gradient(const Moments& m, double t) {
    const Mat2 jac = eos_jacobian_q3(m, t);
    const double m1 = m.m1, m2 = m.m2;
    const double d = m2 * m2 - m1 * m1;
    const double d2 = d * d;
    // derivatives of s = m2 / d
    const double s_m1 = 2.0 * m1 * m2 / d2;
    const double s_m2 = -(m1 * m1 + m2 * m2) / d2;
    const double b_m1 = (m1 * m1 + m2 * m2) / d2;
    const double b_m2 = -2.0 * m1 * m2 / d2;
    const double a_m1 = -s_m1, a_m2 = -s_m2;
    const double c_m1 = -s_m1;
    const double c_m2 = -s_m2 - 1.0 / ((m2 - 1.0) * (m2 - 1.0));
    const double A = jac.a11, B = jac.a12, C = jac.a22;
    return {a_m1 * C + A * c_m1 - 2.0 * B * b_m1, a_m2 * C + A * c_m2 - 2.0 * B * b_m2, C + 3.0 * A};
}

struct CuspResiduals {
    double fold = 0.0;       // J
    double tangency = 0.0;   // i = 1 condition
    double tangency2 = 0.0;  // i = 2, dependent on the first when J = 0
    // Sums of the magnitudes of the cancelling terms in J and in the tangency.
    double fold_scale = 1.0;
    double tangency_scale = 1.0;

    [[nodiscard]] double max_abs() const noexcept { return std::max(std::abs(fold), std::abs(tangency)); }

    /// Residuals divided by their term scales, floored at 1 so the measure
    /// never exceeds max_abs(). Stays at rounding level near the simplex
    /// boundary and near m2 = 1, where the entries blow up.
    [[nodiscard]] double max_relative() const noexcept {
        return std::max(std::abs(fold) / std::max(fold_scale, 1.0),
                        std::abs(tangency) / std::max(tangency_scale, 1.0));
    }
};

/// J and the tangency conditions dpsi_i/dm2 dJ/dm1 - dpsi_i/dm1 dJ/dm2.
inline CuspResiduals cusp_residuals(const Moments& m, double t) {
    const Mat2 jac = eos_jacobian_q3(m, t);
    const FoldGradient g = fold_gradient(m, t);
    const double fs = std::abs(jac.a11 * jac.a22) + jac.a12 * jac.a21;
    const double ts = std::abs(jac.a12 * g.dm1) + std::abs(jac.a11 * g.dm2);
    return {jac.det(),
            jac.a12 * g.dm1 - jac.a11 * g.dm2,
            jac.a22 * g.dm1 - jac.a21 * g.dm2,
            fs > 0.0 ? fs : 1.0,
            ts > 0.0 ? ts : 1.0};
}

enum class Locus { I, II, III_plus, III_minus };

inline std::string_view to_string(Locus id) {
    switch (id) {
        case Locus::I: return "I";
        case Locus::II: return "II";
        case Locus::III_plus: return "III+";
        case Locus::III_minus: return "III-";
    }
    return "?";
}

struct LocusPoint {
    double m1 = 0.0;
    double t_c = 0.0;
};

/// Line loci m1 = 3 m2 - 2 (I) and m1 = 2 - 3 m2 (II), t_c = 1 / (2 (1 - m2)).
inline LocusPoint cusp_locus_lines(double m2, Locus branch) {
    if (branch != Locus::I && branch != Locus::II) throw DomainError("cusp_locus_lines: branch must be I or II");
    if (!(m2 >= 0.5 && m2 < 1.0)) throw DomainError("cusp_locus_lines: m2 must lie in [1/2, 1)");
    const double m1 = branch == Locus::I ? 3.0 * m2 - 2.0 : 2.0 - 3.0 * m2;
    return {m1, 0.5 / (1.0 - m2)};
}

inline constexpr double kLoopMin = 0.5;
inline constexpr double kLoopMax = 7.0 / 9.0;

struct LoopAux {
    double alpha = 0.0;      // sqrt(25 - 32 m2)
    double beta_loop = 0.0;  // sqrt(41 m2 - 12 m2^2 - 25 + 5 alpha (1 - m2))
};

inline LoopAux loop_auxiliaries(double m2) {
    if (!(m2 >= kLoopMin - 1e-15 && m2 <= kLoopMax + 1e-15))
        throw DomainError("loop locus: m2 must lie in [1/2, 7/9]");
    const double alpha = std::sqrt(25.0 - 32.0 * m2);
    const double b2 = 41.0 * m2 - 12.0 * m2 * m2 - 25.0 + 5.0 * alpha * (1.0 - m2);
    // Both ends of the interval are double roots of b2; rounding can push it below zero.
    if (b2 < -1e-12) throw DomainError("loop locus: negative discriminant");
    return {alpha, std::sqrt(std::max(b2, 0.0))};
}

/// Loop locus m1 = +/- beta/2, t_c = 4 / (3 (1 - m2) (5 - alpha)).
inline LocusPoint cusp_locus_loop(double m2, int sign) {
    const LoopAux aux = loop_auxiliaries(m2);
    const double s = sign >= 0 ? 1.0 : -1.0;
    return {s * 0.5 * aux.beta_loop, 4.0 / (3.0 * (1.0 - m2) * (5.0 - aux.alpha))};
}

inline double quartic_residual(double m1, double m2) {
    const double a = m1 * m1, b = m2 * m2;
    return 2.0 * a * a + 18.0 * b * b + 12.0 * a * b - 41.0 * a * m2 - 23.0 * b * m2 + 25.0 * a + 7.0 * b;
}

/// Critical time along a locus parametrised by m2.
inline double critical_time(Locus id, double m2) {
    switch (id) {
        case Locus::I:
        case Locus::II: return cusp_locus_lines(m2, id).t_c;
        case Locus::III_plus: return cusp_locus_loop(m2, +1).t_c;
        case Locus::III_minus: return cusp_locus_loop(m2, -1).t_c;
    }
    return std::nan("");
}

struct CuspPoint {
    Locus locus = Locus::I;
    double m1 = 0.0;
    double m2 = 0.0;
    double t_c = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// Closed-form field-plane image of a locus point.
///
/// Lines: x = y = (2 - 3 m2)/(2 (1 - m2)) + log((2 m2 - 1)/(1 - m2))/2 on I,
/// and x = -y = -(same) on II. Loop:
///   X(m2) = 2 beta / (3 (1 - m2)(5 - alpha)) + log((2 m2 - beta)/(2 m2 + beta))/2,
///   y = -4 (3 m2 - 2)/(3 (1 - m2)(5 - alpha)) + log((2 m2 - beta)(2 m2 + beta)/(16 (1 - m2)^2))/2,
/// where the branch m1 = +beta/2 maps to x = -X and m1 = -beta/2 to x = +X.
inline Vec2 map_cusp_to_fields(Locus id, double m2) {
    switch (id) {
        case Locus::I:
        case Locus::II: {
            cusp_locus_lines(m2, id);  // domain check
            if (!(2.0 * m2 - 1.0 > 0.0))
                throw InfiniteFieldError("line locus image diverges at m2 = 1/2 (log(2 m2 - 1))");
            const double v = (2.0 - 3.0 * m2) / (2.0 * (1.0 - m2)) + 0.5 * std::log((2.0 * m2 - 1.0) / (1.0 - m2));
            return id == Locus::I ? Vec2{v, v} : Vec2{-v, v};
        }
        case Locus::III_plus:
        case Locus::III_minus: {
            const LoopAux aux = loop_auxiliaries(m2);
            const double b = aux.beta_loop;
            const double den = 3.0 * (1.0 - m2) * (5.0 - aux.alpha);
            const double X = 2.0 * b / den + 0.5 * std::log((2.0 * m2 - b) / (2.0 * m2 + b));
            const double y = -4.0 * (3.0 * m2 - 2.0) / den +
                             0.5 * std::log((2.0 * m2 - b) * (2.0 * m2 + b) / (16.0 * (1.0 - m2) * (1.0 - m2)));
            return {id == Locus::III_plus ? -X : X, y};
        }
    }
    return {};
}

inline Moments locus_moments(Locus id, double m2) {
    switch (id) {
        case Locus::I:
        case Locus::II: return {cusp_locus_lines(m2, id).m1, m2};
        case Locus::III_plus: return {cusp_locus_loop(m2, +1).m1, m2};
        case Locus::III_minus: return {cusp_locus_loop(m2, -1).m1, m2};
    }
    return {};
}

/// Build the cusp point at parameter m2. Throws InfiniteFieldError when the
/// field image is at infinity.
inline CuspPoint make_cusp_point(Locus id, double m2) {
    const Moments m = locus_moments(id, m2);
    const Vec2 f = map_cusp_to_fields(id, m2);
    return {id, m.m1, m2, critical_time(id, m2), f.v1, f.v2};
}

inline Vec2 map_cusp_to_fields(const CuspPoint& p) { return map_cusp_to_fields(p.locus, p.m2); }

enum class CuspEventKind { creation, collision, annihilation, split };

inline std::string_view to_string(CuspEventKind k) {
    switch (k) {
        case CuspEventKind::creation: return "creation";
        case CuspEventKind::collision: return "collision";
        case CuspEventKind::annihilation: return "annihilation";
        case CuspEventKind::split: return "split";
    }
    return "?";
}

struct CuspEvent {
    CuspEventKind kind = CuspEventKind::creation;
    double time = 0.0;
    Moments location;
    std::string description;
    /// Relative cusp residual at the location, or at the locus point 1e-6
    /// inside when the location sits on the simplex boundary.
    double residual = 0.0;
};

namespace detail {

inline double event_residual(Locus id, double m2, double t) {
    Moments m = locus_moments(id, m2);
    if (!is_interior(m)) {
        // (+-1/2, 1/2) has p = 0; check the cusp conditions just inside.
        const double m2_in = m2 + 1e-6;
        m = locus_moments(id, m2_in);
        t = critical_time(id, m2_in);
    }
    return cusp_residuals(m, t).max_relative();
}

}  // namespace detail

/// Canonical creation, split and annihilation events of the cusp dynamics.
inline std::vector<CuspEvent> cusp_event_timeline() {
    struct Spec {
        CuspEventKind kind;
        double time;
        Locus locus;
        double m2;
        const char* text;
    };
    const Spec specs[] = {
        {CuspEventKind::creation, 1.0, Locus::I, 0.5, "cusp created at the bottom of line I"},
        {CuspEventKind::creation, 1.0, Locus::II, 0.5, "cusp created at the bottom of line II"},
        {CuspEventKind::split, 9.0 / 7.0, Locus::I, 11.0 / 18.0,
         "line I cusp hits the loop and splits into three (one on the line, two on the loop)"},
        {CuspEventKind::split, 9.0 / 7.0, Locus::II, 11.0 / 18.0,
         "line II cusp hits the loop and splits into three (one on the line, two on the loop)"},
        {CuspEventKind::creation, 9.0 / 7.0, Locus::III_plus, 7.0 / 9.0,
         "cusp created at the top of the loop; splits into two moving in opposite directions"},
        {CuspEventKind::annihilation, 4.0 / 3.0, Locus::III_plus, 0.75,
         "loop cusps collide and annihilate at the upper loop/line intersection (line I)"},
        {CuspEventKind::annihilation, 4.0 / 3.0, Locus::III_minus, 0.75,
         "loop cusps collide and annihilate at the upper loop/line intersection (line II)"},
        {CuspEventKind::annihilation, 4.0 / 3.0, Locus::III_plus, 0.5,
         "loop cusps collide and annihilate at the bottom of the loop"},
    };
    std::vector<CuspEvent> events;
    for (const auto& s : specs) {
        events.push_back(
            {s.kind, s.time, locus_moments(s.locus, s.m2), s.text, detail::event_residual(s.locus, s.m2, s.time)});
    }
    return events;
}

/// Default m2 window for line-locus sampling. Outside it the absolute cusp
/// residuals lose precision (entries grow like 1/(m2^2 - m1^2) and 1/(1 - m2)).
inline constexpr double kLineSampleMin = 0.505;
inline constexpr double kLineSampleMax = 0.97;

struct LocusSample {
    CuspPoint point;
    bool field_finite = true;
    std::string reason;  // why x, y are missing
    CuspResiduals residuals;
};

inline LocusSample sample_locus_point(Locus id, double m2) {
    LocusSample s;
    const Moments m = locus_moments(id, m2);
    s.point = {id, m.m1, m2, critical_time(id, m2), std::nan(""), std::nan("")};
    try {
        const Vec2 f = map_cusp_to_fields(id, m2);
        s.point.x = f.v1;
        s.point.y = f.v2;
    } catch (const InfiniteFieldError& e) {
        s.field_finite = false;
        s.reason = e.what();
    }
    if (is_interior(m)) {
        s.residuals = cusp_residuals(m, s.point.t_c);
    } else {
        s.residuals = {std::nan(""), std::nan(""), std::nan(""), 1.0, 1.0};
        if (s.reason.empty()) s.reason = "on the simplex boundary";
    }
    return s;
}

/// Uniform samples in m2: lines over [line_min, line_max], loop branches over [1/2, 7/9].
inline std::vector<LocusSample> sample_loci(int per_locus, double line_min = kLineSampleMin,
                                            double line_max = kLineSampleMax) {
    if (per_locus < 2) throw DomainError("sample_loci: need at least 2 samples per locus");
    std::vector<LocusSample> out;
    out.reserve(4 * std::size_t(per_locus));
    for (Locus id : {Locus::I, Locus::II, Locus::III_plus, Locus::III_minus}) {
        const bool line = id == Locus::I || id == Locus::II;
        const double lo = line ? line_min : kLoopMin;
        const double hi = line ? line_max : kLoopMax;
        for (int i = 0; i < per_locus; ++i) {
            const double m2 = i + 1 == per_locus ? hi : lo + (hi - lo) * i / (per_locus - 1);
            out.push_back(sample_locus_point(id, m2));
        }
    }
    return out;
}

/// Interior stationary points of the loop critical time: d t_c / d m2 = 0
/// reduces to alpha (5 - alpha) = 16 (1 - m2). Solved on [lo, hi], which
/// must bracket a sign change.
inline double loop_critical_time_stationary(double lo, double hi) {
    auto g = [](double m2) {
        const double a = loop_auxiliaries(m2).alpha;
        return a * (5.0 - a) - 16.0 * (1.0 - m2);
    };
    if (!(g(lo) * g(hi) < 0.0)) throw DomainError("loop_critical_time_stationary: no sign change on bracket");
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(), iters);
    return 0.5 * (r.first + r.second);
}

struct CriticalTimeExtremum {
    double m2 = 0.0;
    double t_c = 0.0;
};

/// Smallest (or largest) critical time of a locus over m2 in [lo, hi]:
/// Brent search in the interior, compared against both endpoints. Interior
/// loop extrema are polished on the stationarity condition.
inline CriticalTimeExtremum extremize_critical_time(Locus id, double lo, double hi, bool largest = false) {
    if (!(lo < hi)) throw DomainError("extremize_critical_time: need lo < hi");
    const double sgn = largest ? -1.0 : 1.0;
    auto f = [&](double m2) { return sgn * critical_time(id, m2); };
    std::uintmax_t iters = 200;
    const auto [m, v] =
        boost::math::tools::brent_find_minima(f, lo, hi, std::numeric_limits<double>::digits, iters);
    CriticalTimeExtremum best{m, sgn * v};
    if ((id == Locus::III_plus || id == Locus::III_minus) && m > lo && m < hi) {
        const double a = std::max(lo, m - 1e-5), b = std::min(hi, m + 1e-5);
        try {
            const double r = loop_critical_time_stationary(a, b);
            best = {r, critical_time(id, r)};
        } catch (const DomainError&) {
        }
    }
    for (double e : {lo, hi}) {
        const double te = critical_time(id, e);
        if (sgn * te < sgn * best.t_c) best = {e, te};
    }
    return best;
}

/// Upper part of the loop, from the split point to the top.
inline constexpr double kLoopUpperMin = 11.0 / 18.0;

/// m2 on the loop branch whose field image has ordinate y. The upper part
/// [11/18, 7/9] is monotone in y, so the root there is unique.
inline double loop_m2_for_field_y(double y, Locus id = Locus::III_plus, double lo = kLoopUpperMin,
                                  double hi = kLoopMax) {
    if (id != Locus::III_plus && id != Locus::III_minus)
        throw DomainError("loop_m2_for_field_y: locus must be III+ or III-");
    auto g = [&](double m2) { return map_cusp_to_fields(id, m2).v2 - y; };
    const double glo = g(lo), ghi = g(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if (!(glo * ghi < 0.0)) throw DomainError("loop_m2_for_field_y: y is not attained on the bracket");
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                     boost::math::tools::eps_tolerance<double>(), iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace potts
