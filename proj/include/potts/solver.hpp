#pragma once

// Branches of the q = 3 equations of state, equilibrium selection by maximal
// free energy, and parameter sweeps that locate folds and the birth of
// multivalued profiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "potts/core.hpp"
#include "potts/exact.hpp"
#include "potts/parallel.hpp"
#include "potts/singularity.hpp"
#include "potts/types.hpp"

namespace potts {

struct SolverConfig {
    int grid = 41;                  // multistart points per axis
    double tolerance = 1e-12;       // on |psi|
    int max_iterations = 100;
    double min_damping = 1e-6;      // step halving floor
    double dedupe_radius = 1e-8;    // in m-space
    double margin = 1e-9;           // interior margin on every p_k
    double continuation_radius = 0.05;  // sweep matching when the branch count changes
    unsigned threads = 1;           // 0 = hardware concurrency

    void validate() const {
        if (grid < 2) throw DomainError("SolverConfig: grid must be >= 2");
        if (!(tolerance > 0 && min_damping > 0 && margin > 0 && continuation_radius > 0))
            throw DomainError("SolverConfig: tolerances must be positive");
        if (max_iterations < 1) throw DomainError("SolverConfig: max_iterations must be >= 1");
        if (!(dedupe_radius > tolerance)) throw DomainError("SolverConfig: dedupe radius must exceed the tolerance");
    }
};

enum class Stationarity { maximum, saddle, minimum };

inline std::string_view to_string(Stationarity s) {
    switch (s) {
        case Stationarity::maximum: return "maximum";
        case Stationarity::saddle: return "saddle";
        case Stationarity::minimum: return "minimum";
    }
    return "?";
}

struct EquilibriumBranch {
    Moments m;
    double F = 0.0;
    Stationarity kind = Stationarity::saddle;
    double residual = 0.0;  // |psi| at m
    int iterations = 0;
    double fold = 0.0;      // Jacobian determinant at m
};

inline constexpr double kClassifyTol = 1e-9;

/// Eigenvalues of the symmetric Hessian of F, ascending.
inline std::array<double, 2> hessian_eigenvalues(const Mat2& h) {
    const double mean = 0.5 * (h.a11 + h.a22);
    const double half = 0.5 * (h.a11 - h.a22);
    const double rad = std::sqrt(half * half + h.a12 * h.a21);
    return {mean - rad, mean + rad};
}

inline Stationarity classify(const Moments& m, double t) {
    const auto ev = hessian_eigenvalues(eos_jacobian_q3(m, t));
    if (ev[1] < -kClassifyTol) return Stationarity::maximum;
    if (ev[0] > kClassifyTol) return Stationarity::minimum;
    return Stationarity::saddle;
}

inline EquilibriumBranch make_branch(const Moments& m, const ThermoPoint& pt, int iterations = 0) {
    return {m, free_energy(m, pt), classify(m, pt.t), eos_residual_q3(m, pt).norm(), iterations,
            fold_residual(m, pt.t)};
}

enum class NewtonStatus { converged, max_iterations, stalled, left_domain, singular };

inline std::string_view to_string(NewtonStatus s) {
    switch (s) {
        case NewtonStatus::converged: return "converged";
        case NewtonStatus::max_iterations: return "max_iterations";
        case NewtonStatus::stalled: return "stalled";
        case NewtonStatus::left_domain: return "left_domain";
        case NewtonStatus::singular: return "singular";
    }
    return "?";
}

struct NewtonOutcome {
    NewtonStatus status = NewtonStatus::stalled;
    Moments m;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;

    [[nodiscard]] bool ok() const noexcept { return status == NewtonStatus::converged; }
};

namespace detail {

inline Vec2 newton_direction(const Mat2& j, const Vec2& r) {
    const double det = j.det();
    return {-(j.a22 * r.v1 - j.a12 * r.v2) / det, -(-j.a21 * r.v1 + j.a11 * r.v2) / det};
}

}  // namespace detail

/// Newton iteration on (psi1, psi2) = 0. Each step is halved until the
/// iterate stays `margin` inside the simplex and |psi| decreases; when the
/// factor drops below `min_damping` the run is reported as stalled.
inline NewtonOutcome newton_raw(const Moments& m0, const ThermoPoint& pt, const SolverConfig& cfg) {
    NewtonOutcome out;
    out.m = m0;
    if (!is_interior(m0, cfg.margin)) {
        out.status = NewtonStatus::left_domain;
        return out;
    }
    Moments m = m0;
    double norm = eos_residual_q3(m, pt).norm();
    int it = 0;
    for (; it < cfg.max_iterations && norm > cfg.tolerance; ++it) {
        const Vec2 r = eos_residual_q3(m, pt);
        const Mat2 jac = eos_jacobian_q3(m, pt.t);
        const double det = jac.det();
        if (!std::isfinite(det) || det == 0.0) {
            out.status = NewtonStatus::singular;
            out.m = m;
            out.residual = norm;
            out.iterations = it;
            return out;
        }
        const Vec2 d = detail::newton_direction(jac, r);
        bool accepted = false;
        for (double lambda = 1.0; lambda >= cfg.min_damping; lambda *= 0.5) {
            const Moments cand{m.m1 + lambda * d.v1, m.m2 + lambda * d.v2};
            if (!is_interior(cand, cfg.margin)) continue;
            const double cn = eos_residual_q3(cand, pt).norm();
            if (cn < norm) {
                m = cand;
                norm = cn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.status = is_interior(m, 2.0 * cfg.margin) ? NewtonStatus::stalled : NewtonStatus::left_domain;
            out.m = m;
            out.residual = norm;
            out.iterations = it + 1;
            return out;
        }
    }
    out.m = m;
    out.residual = norm;
    out.iterations = it;
    if (norm > cfg.tolerance) {
        out.status = NewtonStatus::max_iterations;
        return out;
    }
    // A few extra full steps take simple roots to rounding level, which keeps
    // roots reached from different starts within the dedupe radius.
    for (int k = 0; k < 3; ++k) {
        const Mat2 jac = eos_jacobian_q3(m, pt.t);
        if (jac.det() == 0.0) break;
        const Vec2 d = detail::newton_direction(jac, eos_residual_q3(m, pt));
        const Moments cand{m.m1 + d.v1, m.m2 + d.v2};
        if (!is_interior(cand, cfg.margin)) break;
        const double cn = eos_residual_q3(cand, pt).norm();
        if (!(cn < norm)) break;
        m = cand;
        norm = cn;
    }
    out.m = m;
    out.residual = norm;
    out.status = NewtonStatus::converged;
    return out;
}

/// Solve from a single start; returns the branch or nullopt with the outcome.
inline std::optional<EquilibriumBranch> damped_newton(const Moments& m0, const ThermoPoint& pt,
                                                      const SolverConfig& cfg = {},
                                                      NewtonOutcome* outcome = nullptr) {
    const NewtonOutcome r = newton_raw(m0, pt, cfg);
    if (outcome) *outcome = r;
    if (!r.ok()) return std::nullopt;
    EquilibriumBranch b = make_branch(r.m, pt, r.iterations);
    return b;
}

/// Interior multistart grid over the open simplex |m1| < m2 < 1.
inline std::vector<Moments> multistart_grid(int n) {
    std::vector<Moments> starts;
    starts.reserve(std::size_t(n) * std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const double m2 = (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double u = (j + 0.5) / n;  // p1 = u m2, p2 = (1 - u) m2
            starts.push_back({(2.0 * u - 1.0) * m2, m2});
        }
    }
    return starts;
}

namespace detail {

inline bool branch_order(const EquilibriumBranch& a, const EquilibriumBranch& b) {
    if (a.F != b.F) return a.F > b.F;
    if (a.m.m1 != b.m.m1) return a.m.m1 < b.m.m1;
    return a.m.m2 < b.m.m2;
}

inline double distance(const Moments& a, const Moments& b) { return std::hypot(a.m1 - b.m1, a.m2 - b.m2); }

}  // namespace detail

/// All stationary points of F at pt found from the multistart grid,
/// deduplicated and sorted by descending F.
inline std::vector<EquilibriumBranch> solve_branches(const ThermoPoint& pt, const SolverConfig& cfg = {}) {
    pt.validate();
    cfg.validate();
    std::vector<EquilibriumBranch> roots;
    for (const Moments& s : multistart_grid(cfg.grid)) {
        const NewtonOutcome r = newton_raw(s, pt, cfg);
        if (!r.ok()) continue;
        const bool dup = std::any_of(roots.begin(), roots.end(), [&](const EquilibriumBranch& b) {
            return detail::distance(b.m, r.m) < cfg.dedupe_radius;
        });
        if (!dup) roots.push_back(make_branch(r.m, pt, r.iterations));
    }
    if (roots.empty()) throw SolverError("solve_branches: no stationary point found");
    std::sort(roots.begin(), roots.end(), detail::branch_order);
    return roots;
}

inline constexpr double kCoexistenceTol = 1e-10;

struct Equilibrium {
    EquilibriumBranch branch;
    bool coexistence = false;
    /// F gap to the runner-up maximum; infinity when there is only one.
    double gap = std::numeric_limits<double>::infinity();
    std::size_t index = 0;  // position in the input set
};

/// Maximum of F among the local maxima; flags coexistence when the two best
/// maxima are within kCoexistenceTol.
inline Equilibrium select_equilibrium(std::span<const EquilibriumBranch> branches) {
    if (branches.empty()) throw SolverError("select_equilibrium: empty branch set");
    std::vector<std::size_t> maxima;
    for (std::size_t i = 0; i < branches.size(); ++i)
        if (branches[i].kind == Stationarity::maximum) maxima.push_back(i);
    if (maxima.empty()) throw SolverError("select_equilibrium: no local maximum of F in the branch set");
    std::stable_sort(maxima.begin(), maxima.end(),
                     [&](std::size_t a, std::size_t b) { return detail::branch_order(branches[a], branches[b]); });
    Equilibrium eq{branches[maxima[0]], false, std::numeric_limits<double>::infinity(), maxima[0]};
    if (maxima.size() > 1) {
        eq.gap = branches[maxima[0]].F - branches[maxima[1]].F;
        eq.coexistence = eq.gap < kCoexistenceTol;
    }
    return eq;
}

inline Equilibrium equilibrium_at(const ThermoPoint& pt, const SolverConfig& cfg = {}) {
    const auto b = solve_branches(pt, cfg);
    return select_equilibrium(b);
}

// ---------------------------------------------------------------------------
// Fold and cusp refinement

namespace detail {

/// Solve a 3x3 system a x = b by Gaussian elimination with partial pivoting.
inline std::optional<std::array<double, 3>> solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b) {
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0 || !std::isfinite(a[piv][c])) return std::nullopt;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < 3; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return x;
}

/// Damped Newton on a 3-unknown system (m1, m2, s) with residual `g` and
/// Jacobian `jac`; the iterate must stay inside the simplex.
template <class G, class Jac>
std::optional<std::array<double, 3>> newton3(std::array<double, 3> v, G&& g, Jac&& jac, int max_iter = 80) {
    auto norm = [](const std::array<double, 3>& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); };
    auto inside = [](const std::array<double, 3>& z) { return is_interior(Moments{z[0], z[1]}, 1e-12); };
    if (!inside(v)) return std::nullopt;
    auto r = g(v);
    double n = norm(r);
    for (int it = 0; it < max_iter; ++it) {
        const auto step = solve3(jac(v), {-r[0], -r[1], -r[2]});
        if (!step) return std::nullopt;
        const double sn = norm(*step);
        bool accepted = false;
        for (double lambda = 1.0; lambda >= 1e-8; lambda *= 0.5) {
            const std::array<double, 3> c{v[0] + lambda * (*step)[0], v[1] + lambda * (*step)[1],
                                          v[2] + lambda * (*step)[2]};
            if (!inside(c)) continue;
            const auto rc = g(c);
            const double cn = norm(rc);
            if (std::isfinite(cn) && (cn < n || (lambda == 1.0 && cn <= n * (1 + 1e-6)))) {
                v = c;
                r = rc;
                n = cn;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        if (sn <= 1e-14 * (1.0 + std::abs(v[2]))) break;
    }
    if (!std::isfinite(n)) return std::nullopt;
    return v;
}

}  // namespace detail

struct FoldPoint {
    double x = 0.0;  // field at which the fold sits on the line y = const
    Moments m;
    double fold = 0.0;      // J at the refined point
    double residual = 0.0;  // |psi| at (m, x, y, t)
};

/// Locate a fold point on the line of fixed (y, t) by Newton on
/// (psi1, psi2, J) = 0 in the unknowns (m1, m2, x).
inline std::optional<FoldPoint> refine_fold(const Moments& m0, double x0, double y, double t) {
    const auto g = [&](const std::array<double, 3>& v) -> std::array<double, 3> {
        const Moments m{v[0], v[1]};
        const Vec2 r = eos_residual_q3(m, {v[2], y, t});
        return {r.v1, r.v2, fold_residual(m, t)};
    };
    const auto jac = [&](const std::array<double, 3>& v) -> std::array<std::array<double, 3>, 3> {
        const Moments m{v[0], v[1]};
        const Mat2 j = eos_jacobian_q3(m, t);
        const FoldGradient fg = fold_gradient(m, t);
        return {{{j.a11, j.a12, 1.0}, {j.a21, j.a22, 0.0}, {fg.dm1, fg.dm2, 0.0}}};
    };
    const auto v = detail::newton3({m0.m1, m0.m2, x0}, g, jac);
    if (!v) return std::nullopt;
    const Moments m{(*v)[0], (*v)[1]};
    FoldPoint fp{(*v)[2], m, fold_residual(m, t), eos_residual_q3(m, {(*v)[2], y, t}).norm()};
    if (!(std::abs(fp.fold) <= 1e-8 && fp.residual <= 1e-10)) return std::nullopt;
    return fp;
}

struct CuspSolution {
    Moments m;
    double t_c = 0.0;
    double x = 0.0;
    double y = 0.0;
    CuspResiduals residuals;
};

/// Locate the cusp whose field image lies on the line y = const: Newton on
/// (psi2, J, tangency) = 0 in (m1, m2, t) with a central-difference Jacobian.
inline std::optional<CuspSolution> refine_cusp_on_line(const Moments& m0, double t0, double y) {
    const auto g = [&](const std::array<double, 3>& v) -> std::array<double, 3> {
        const Moments m{v[0], v[1]};
        const double t = v[2];
        const Vec2 r = eos_residual_q3(m, {0.0, y, t});
        const CuspResiduals c = cusp_residuals(m, t);
        return {r.v2, c.fold, c.tangency};
    };
    const auto jac = [&](const std::array<double, 3>& v) {
        std::array<std::array<double, 3>, 3> a{};
        for (int k = 0; k < 3; ++k) {
            const double h = 1e-7 * (1.0 + std::abs(v[k]));
            auto vp = v, vm = v;
            vp[k] += h;
            vm[k] -= h;
            const auto gp = g(vp), gm = g(vm);
            for (int r = 0; r < 3; ++r) a[r][k] = (gp[r] - gm[r]) / (2.0 * h);
        }
        return a;
    };
    const auto v = detail::newton3({m0.m1, m0.m2, t0}, g, jac);
    if (!v) return std::nullopt;
    CuspSolution c;
    c.m = {(*v)[0], (*v)[1]};
    c.t_c = (*v)[2];
    if (c.t_c < 0.0) return std::nullopt;
    const Vec2 f = fields_at_stationary_point(c.m, c.t_c);
    c.x = f.v1;
    c.y = f.v2;
    c.residuals = cusp_residuals(c.m, c.t_c);
    return c;
}

/// Locus on which a cusp point in moment space lies, or nullopt.
inline std::optional<Locus> identify_locus(const Moments& m, double tol = 1e-6) {
    if (std::abs(m.m1 - 3.0 * m.m2 + 2.0) < tol) return Locus::I;
    if (std::abs(m.m1 + 3.0 * m.m2 - 2.0) < tol) return Locus::II;
    if (std::abs(quartic_residual(m.m1, m.m2)) < tol) return m.m1 >= 0.0 ? Locus::III_plus : Locus::III_minus;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSample {
    double x = 0.0;
    std::vector<EquilibriumBranch> branches;  // sorted by descending F
    std::vector<int> ids;                     // continuation id per branch
    int equilibrium = -1;                     // index into branches, -1 if none
    bool coexistence = false;
    bool failed = false;
    std::string error;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SweepResult {
    double y = 0.0;
    double t = 0.0;
    std::vector<SweepSample> samples;
    std::vector<Interval> multivalued;  // sample runs with more than one branch
    std::vector<FoldPoint> folds;       // refined endpoints where branches appear or vanish
    std::size_t max_branches = 0;
};

namespace detail {

inline SweepSample solve_sample(double x, double y, double t, const SolverConfig& cfg) {
    SweepSample s;
    s.x = x;
    try {
        s.branches = solve_branches({x, y, t}, cfg);
        try {
            const Equilibrium eq = select_equilibrium(s.branches);
            s.equilibrium = int(eq.index);
            s.coexistence = eq.coexistence;
        } catch (const SolverError&) {
        }
    } catch (const Error& e) {
        s.failed = true;
        s.error = e.what();
    }
    return s;
}

/// Greedy nearest-neighbour matching of branches between adjacent samples.
/// Returns for each current branch the index of its predecessor, or -1.
inline std::vector<int> match_branches(const std::vector<EquilibriumBranch>& prev,
                                       const std::vector<EquilibriumBranch>& cur, double radius) {
    struct Pair {
        double d;
        int i, j;
    };
    std::vector<Pair> pairs;
    for (int i = 0; i < int(prev.size()); ++i)
        for (int j = 0; j < int(cur.size()); ++j) {
            const double d = distance(prev[std::size_t(i)].m, cur[std::size_t(j)].m);
            if (d <= radius) pairs.push_back({d, i, j});
        }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<int> pred(cur.size(), -1);
    std::vector<bool> used(prev.size(), false);
    for (const Pair& p : pairs) {
        if (used[std::size_t(p.i)] || pred[std::size_t(p.j)] != -1) continue;
        used[std::size_t(p.i)] = true;
        pred[std::size_t(p.j)] = p.i;
    }
    return pred;
}

}  // namespace detail

/// Solve at n equally spaced x in [x_lo, x_hi] for fixed (y, t), link the
/// branches across samples, and refine the folds where branches end.
inline SweepResult sweep_profile(double y, double x_lo, double x_hi, int n, double t, const SolverConfig& cfg = {}) {
    if (!(std::isfinite(x_lo) && std::isfinite(x_hi) && x_lo < x_hi)) throw DomainError("sweep_profile: bad x-range");
    if (n < 2) throw DomainError("sweep_profile: need at least 2 samples");
    SweepResult res;
    res.y = y;
    res.t = t;
    const double dx = (x_hi - x_lo) / (n - 1);
    res.samples = parallel_map<SweepSample>(std::size_t(n), cfg.threads, [&](std::size_t i) {
        const double x = i + 1 == std::size_t(n) ? x_hi : x_lo + dx * double(i);
        return detail::solve_sample(x, y, t, cfg);
    });

    int next_id = 0;
    const SweepSample* prev = nullptr;
    std::vector<FoldPoint> folds;
    auto add_fold = [&](const Moments& m0, double x0, double a, double b) {
        const auto fp = refine_fold(m0, x0, y, t);
        if (!fp || fp->x < a - dx || fp->x > b + dx) return;
        for (const auto& f : folds)
            if (std::abs(f.x - fp->x) < 1e-7 && detail::distance(f.m, fp->m) < 1e-4) return;
        folds.push_back(*fp);
    };
    for (auto& s : res.samples) {
        s.ids.assign(s.branches.size(), -1);
        res.max_branches = std::max(res.max_branches, s.branches.size());
        if (prev && !prev->failed && !s.failed) {
            const double radius = prev->branches.size() == s.branches.size() ? std::numeric_limits<double>::infinity()
                                                                                 : cfg.continuation_radius;
            const auto pred = detail::match_branches(prev->branches, s.branches, radius);
            std::vector<bool> continued(prev->branches.size(), false);
            for (std::size_t j = 0; j < s.branches.size(); ++j) {
                if (pred[j] >= 0) {
                    s.ids[j] = prev->ids[std::size_t(pred[j])];
                    continued[std::size_t(pred[j])] = true;
                } else {
                    s.ids[j] = next_id++;
                    add_fold(s.branches[j].m, s.x, prev->x, s.x);
                }
            }
            for (std::size_t i = 0; i < prev->branches.size(); ++i)
                if (!continued[i]) add_fold(prev->branches[i].m, prev->x, prev->x, s.x);
        } else {
            for (auto& id : s.ids) id = next_id++;
        }
        prev = &s;
    }
    std::sort(folds.begin(), folds.end(), [](const FoldPoint& a, const FoldPoint& b) { return a.x < b.x; });
    res.folds = std::move(folds);

    for (std::size_t i = 0; i < res.samples.size();) {
        if (res.samples[i].branches.size() > 1) {
            std::size_t j = i;
            while (j + 1 < res.samples.size() && res.samples[j + 1].branches.size() > 1) ++j;
            res.multivalued.push_back({res.samples[i].x, res.samples[j].x});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return res;
}

struct LineScan {
    std::size_t max_branches = 0;
    double x_at_max = 0.0;
    std::vector<EquilibriumBranch> branches_at_max;
};

/// Largest branch count along y = const for x in [x_lo, x_hi]. A coarse
/// sweep is followed by `zoom_levels` refinements around the sample closest
/// to the fold set (smallest |J| over its branches), which is where a newborn
/// multivalued interval first opens.
inline LineScan scan_line(double y, double t, double x_lo, double x_hi, int n, int zoom_levels,
                          const SolverConfig& cfg) {
    LineScan best;
    double lo = x_lo, hi = x_hi;
    for (int level = 0; level <= zoom_levels; ++level) {
        const double dx = (hi - lo) / (n - 1);
        const auto samples = parallel_map<SweepSample>(std::size_t(n), cfg.threads, [&](std::size_t i) {
            return detail::solve_sample(lo + dx * double(i), y, t, cfg);
        });
        double min_fold = std::numeric_limits<double>::infinity();
        std::size_t at = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            if (s.branches.size() > best.max_branches) {
                best.max_branches = s.branches.size();
                best.x_at_max = s.x;
                best.branches_at_max = s.branches;
            }
            for (const auto& b : s.branches)
                if (std::abs(b.fold) < min_fold) {
                    min_fold = std::abs(b.fold);
                    at = i;
                }
        }
        if (!std::isfinite(min_fold)) break;
        lo = samples[at].x - 2.0 * dx;
        hi = samples[at].x + 2.0 * dx;
    }
    return best;
}

struct CatastropheConfig {
    double x_lo = -0.5;
    double x_hi = 0.5;
    int x_samples = 41;
    int zoom_levels = 5;
    double t_width = 1e-4;  // final bracket width
    int solver_grid = 21;   // multistart grid per axis for the line scans
};

struct CatastropheReport {
    bool found = false;
    double t_lo = 0.0;  // below onset
    double t_hi = 0.0;  // above onset
    std::size_t base_branches = 0;
    std::size_t onset_branches = 0;
    std::optional<CuspSolution> cusp;  // refined onset point
    std::optional<Locus> locus;

    [[nodiscard]] double t_c() const noexcept { return cusp ? cusp->t_c : 0.5 * (t_lo + t_hi); }
    [[nodiscard]] double bracket_mid() const noexcept { return 0.5 * (t_lo + t_hi); }
};

/// Bisect in t on the largest branch count along y = const until the
/// bracket is narrower than `t_width`, then refine the onset as a cusp.
inline CatastropheReport detect_catastrophe(double y, double t_lo, double t_hi, const CatastropheConfig& cc = {},
                                            const SolverConfig& cfg = {}) {
    if (!(t_lo >= 0.0 && t_lo < t_hi)) throw DomainError("detect_catastrophe: bad t-range");
    CatastropheReport rep;
    SolverConfig scan_cfg = cfg;
    scan_cfg.grid = cc.solver_grid;
    auto scan = [&](double t) { return scan_line(y, t, cc.x_lo, cc.x_hi, cc.x_samples, cc.zoom_levels, scan_cfg); };
    const LineScan base = scan(t_lo);
    LineScan top = scan(t_hi);
    rep.base_branches = base.max_branches;
    rep.t_lo = t_lo;
    rep.t_hi = t_hi;
    if (top.max_branches <= base.max_branches) return rep;
    rep.found = true;
    while (rep.t_hi - rep.t_lo > cc.t_width) {
        const double mid = 0.5 * (rep.t_lo + rep.t_hi);
        LineScan s = scan(mid);
        if (s.max_branches > base.max_branches) {
            rep.t_hi = mid;
            top = std::move(s);
        } else {
            rep.t_lo = mid;
        }
    }
    rep.onset_branches = top.max_branches;
    // The newborn branches sit next to the cusp; the one closest to the fold
    // set is the best start for the cusp refinement.
    std::vector<EquilibriumBranch> starts = top.branches_at_max;
    std::sort(starts.begin(), starts.end(), [](const EquilibriumBranch& a, const EquilibriumBranch& b) {
        return std::abs(a.fold) < std::abs(b.fold);
    });
    for (const auto& b : starts) {
        auto c = refine_cusp_on_line(b.m, rep.t_hi, y);
        if (c && c->residuals.max_abs() <= 1e-6 && std::abs(c->t_c - rep.bracket_mid()) <= 1e-2) {
            rep.cusp = c;
            rep.locus = identify_locus(c->m);
            break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Zero-field transition and thermodynamic-limit helpers

inline constexpr Moments kSymmetricState{0.0, 2.0 / 3.0};

struct TransitionReport {
    double t_star = 0.0;
    double F = 0.0;              // common free energy at t_star
    Moments ordered;             // an ordered maximum at t_star
    double slope_symmetric = 0;  // dF/dt on the symmetric branch = sum p^2
    double slope_ordered = 0;    // dF/dt on the ordered branch
};

/// Free-energy gap between the best non-symmetric maximum and the symmetric
/// state at zero field; -infinity when no ordered maximum exists.
inline double ordered_gap(double t, const SolverConfig& cfg, Moments* ordered = nullptr) {
    const ThermoPoint pt{0.0, 0.0, t};
    const double f_sym = free_energy(kSymmetricState, pt);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : solve_branches(pt, cfg)) {
        if (b.kind != Stationarity::maximum || detail::distance(b.m, kSymmetricState) < 1e-6) continue;
        if (b.F - f_sym > best) {
            best = b.F - f_sym;
            if (ordered) *ordered = b.m;
        }
    }
    return best;
}

/// Bisection on the ordered/symmetric free-energy gap along x = y = 0.
inline TransitionReport zero_field_transition(double t_lo = 1.2, double t_hi = 1.6, double tol = 1e-10,
                                              const SolverConfig& cfg = {}) {
    if (!(ordered_gap(t_lo, cfg) < 0.0) || !(ordered_gap(t_hi, cfg) > 0.0))
        throw SolverError("zero_field_transition: bracket does not contain the transition");
    while (t_hi - t_lo > tol) {
        const double mid = 0.5 * (t_lo + t_hi);
        (ordered_gap(mid, cfg) > 0.0 ? t_hi : t_lo) = mid;
    }
    TransitionReport r;
    r.t_star = 0.5 * (t_lo + t_hi);
    ordered_gap(r.t_star, cfg, &r.ordered);
    r.F = free_energy(kSymmetricState, {0.0, 0.0, r.t_star});
    auto sum_sq = [](const Moments& m) {
        double s = 0.0;
        for (double p : probabilities_from_moments(m)) s += p * p;
        return s;
    };
    r.slope_symmetric = sum_sq(kSymmetricState);
    r.slope_ordered = sum_sq(r.ordered);
    return r;
}

/// Thermodynamic-limit free energy: F at the selected equilibrium.
inline double limit_free_energy(const ThermoPoint& pt, const SolverConfig& cfg = {}) {
    return equilibrium_at(pt, cfg).branch.F;
}

/// Large-N limit of F_N = log Z_N / N. The exponent of Z_N is t (sum p^2 - 1)
/// at the empirical frequencies, so the limit is F - t.
inline double limit_log_partition_density(const ThermoPoint& pt, const SolverConfig& cfg = {}) {
    return limit_free_energy(pt, cfg) - pt.t;
}

inline constexpr double kFoldGuard = 1e-6;

/// Finite-N convergence table against the large-N limit of F_N. Refuses
/// points whose equilibrium sits on a fold.
inline ConvergenceTable finite_size_convergence(std::span<const int> Ns, const ThermoPoint& pt,
                                                const SolverConfig& cfg = {}) {
    const Equilibrium eq = equilibrium_at(pt, cfg);
    if (std::abs(eq.branch.fold) < kFoldGuard)
        throw DomainError("finite_size_convergence: equilibrium lies on a fold (|J| < 1e-6)");
    return convergence_table(Ns, pt, eq.branch.F - pt.t);
}

}  // namespace potts
