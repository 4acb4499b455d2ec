#pragma once

// Command-line front end: configuration loading, subcommands and the CSV/JSON
// emitters. Kept in a header so the test suite can drive it in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "potts/core.hpp"
#include "potts/exact.hpp"
#include "potts/mc.hpp"
#include "potts/parallel.hpp"
#include "potts/singularity.hpp"
#include "potts/solver.hpp"
#include "potts/types.hpp"

namespace potts::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Format { csv, json };

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip decimal form (at most 17 significant digits).
/// Non-finite values become an empty cell.
inline std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    if (v == 0.0) v = 0.0;  // drop the sign of -0
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline json jnum(double v) { return std::isfinite(v) ? json(v == 0.0 ? 0.0 : v) : json(nullptr); }

class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += quote(cells[i]);
        }
        out_ += '\n';
    }

    [[nodiscard]] const std::string& str() const noexcept { return out_; }

private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + '"';
    }

    std::string out_;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    std::string command;
    std::string out_path;     // empty: standard output
    std::string events_path;  // cusp: where the events JSON goes in csv mode
    std::optional<Format> format;
    unsigned threads = default_threads();
    std::uint64_t seed = 20240601;

    ThermoPoint pt{0.0, 0.0, 0.5};
    double x_lo = -0.5, x_hi = 0.5;
    int x_samples = 101;
    double t_lo = 0.0, t_hi = 0.0;
    int t_samples = 1;
    int resolution = 41;
    std::vector<int> Ns{100, 1000, 10000};
    int verify_max_n = 500;

    SolverConfig solver;
    McConfig mc;
    DiffusionCoefficients diffusion;  // test hook, not exposed in help

    [[nodiscard]] Format output_format() const {
        if (format) return *format;
        return command == "verify" || command == "mc" ? Format::json : Format::csv;
    }

    void validate() const {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) throw UsageError(msg);
        };
        need(std::isfinite(pt.x) && std::isfinite(pt.y) && std::isfinite(pt.t) && pt.t >= 0.0,
             "point must be finite with t >= 0");
        need(x_lo < x_hi, "x-range must be ordered (x_lo < x_hi)");
        need(x_samples >= 2, "x_samples must be >= 2");
        need(t_samples >= 1, "t_samples must be >= 1");
        if (t_samples >= 2) need(0.0 <= t_lo && t_lo < t_hi, "t-range must be ordered with t_lo >= 0");
        need(resolution >= 2, "resolution must be >= 2");
        need(!Ns.empty(), "N list must not be empty");
        for (int n : Ns) need(n >= 1 && n <= kMaxEnumerationN, "N values must lie in [1, 20000]");
        need(verify_max_n >= 1 && verify_max_n <= kMaxEnumerationN, "verify_max_n must lie in [1, 20000]");
        need(threads >= 1, "threads must be >= 1");
        try {
            solver.validate();
            mc.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
};

inline Format parse_format(const std::string& s) {
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw UsageError("format must be csv or json, got '" + s + "'");
}

/// Apply a configuration object; unknown keys are rejected.
inline void apply_config_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw UsageError("config: top level must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k == "x") c.pt.x = v.get<double>();
        else if (k == "y") c.pt.y = v.get<double>();
        else if (k == "t") c.pt.t = v.get<double>();
        else if (k == "x_lo") c.x_lo = v.get<double>();
        else if (k == "x_hi") c.x_hi = v.get<double>();
        else if (k == "x_samples") c.x_samples = v.get<int>();
        else if (k == "t_lo") c.t_lo = v.get<double>();
        else if (k == "t_hi") c.t_hi = v.get<double>();
        else if (k == "t_samples") c.t_samples = v.get<int>();
        else if (k == "resolution") c.resolution = v.get<int>();
        else if (k == "N") c.Ns = v.get<std::vector<int>>();
        else if (k == "verify_max_n") c.verify_max_n = v.get<int>();
        else if (k == "format") c.format = parse_format(v.get<std::string>());
        else if (k == "threads") c.threads = v.get<unsigned>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "out") c.out_path = v.get<std::string>();
        else if (k == "events") c.events_path = v.get<std::string>();
        else if (k == "solver") {
            if (!v.is_object()) throw UsageError("config: 'solver' must be an object");
            for (const auto& [sk, sv] : v.items()) {
                if (sk == "grid") c.solver.grid = sv.get<int>();
                else if (sk == "tolerance") c.solver.tolerance = sv.get<double>();
                else if (sk == "max_iterations") c.solver.max_iterations = sv.get<int>();
                else if (sk == "min_damping") c.solver.min_damping = sv.get<double>();
                else if (sk == "dedupe_radius") c.solver.dedupe_radius = sv.get<double>();
                else if (sk == "margin") c.solver.margin = sv.get<double>();
                else if (sk == "continuation_radius") c.solver.continuation_radius = sv.get<double>();
                else throw UsageError("config: unknown solver key '" + sk + "'");
            }
        } else if (k == "mc") {
            if (!v.is_object()) throw UsageError("config: 'mc' must be an object");
            for (const auto& [mk, mv] : v.items()) {
                if (mk == "N") c.mc.N = mv.get<int>();
                else if (mk == "sweeps") c.mc.sweeps = mv.get<long>();
                else if (mk == "burn_in") c.mc.burn_in = mv.get<long>();
                else if (mk == "thinning") c.mc.thinning = mv.get<int>();
                else if (mk == "chains") c.mc.chains = mv.get<int>();
                else if (mk == "batches") c.mc.batches = mv.get<int>();
                else throw UsageError("config: unknown mc key '" + mk + "'");
            }
        } else {
            throw UsageError("config: unknown key '" + k + "'");
        }
    }
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config file '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Verification battery

struct Check {
    std::string name;
    double residual = 0.0;
    double tolerance = 0.0;
    [[nodiscard]] bool passed() const noexcept { return residual <= tolerance; }
};

namespace detail {

inline std::vector<ThermoPoint> random_points(std::mt19937_64& rng, int n, double field, double t_max) {
    std::uniform_real_distribution<double> f(-field, field), t(0.0, t_max);
    std::vector<ThermoPoint> pts;
    for (int i = 0; i < n; ++i) {
        const double x = f(rng), y = f(rng), tt = t(rng);
        pts.push_back({x, y, tt});
    }
    return pts;
}

/// Interior moment points with every probability >= margin.
inline std::vector<Moments> random_interior(std::mt19937_64& rng, int n, double margin) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Moments> out;
    while (int(out.size()) < n) {
        const double a = u(rng), b = u(rng);
        const double p1 = margin + (1.0 - 3.0 * margin) * std::min(a, b);
        const double p2 = margin + (1.0 - 3.0 * margin) * (std::max(a, b) - std::min(a, b));
        out.push_back(moments_from_probabilities(std::vector<double>{p1, p2, 1.0 - p1 - p2}));
    }
    return out;
}

inline double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::isnan(x) ? INFINITY : x);
    return m;
}

}  // namespace detail

inline std::vector<Check> verify_battery(const RunConfig& c) {
    std::mt19937_64 rng(stream_seed(c.seed, 0));
    std::vector<Check> checks;

    {
        std::vector<int> Ns{1, 5, 50, 500};
        if (c.verify_max_n > 500) Ns.push_back(c.verify_max_n);
        const auto pts = detail::random_points(rng, 10, 1.0, 3.0);
        const auto res = parallel_map<double>(pts.size(), c.threads, [&](std::size_t i) {
            double r = 0.0;
            for (int N : Ns) r = std::max(r, diffusion_residual(N, pts[i], c.diffusion));
            return r;
        });
        checks.push_back({"diffusion_identity", detail::max_of(res), 1e-10});
    }
    {
        std::uniform_real_distribution<double> f(-1.0, 1.0);
        std::vector<std::pair<double, double>> xy;
        for (int i = 0; i < 20; ++i) {
            const double x = f(rng), y = f(rng);
            xy.emplace_back(x, y);
        }
        const auto res = parallel_map<double>(xy.size(), c.threads, [&](std::size_t i) {
            double r = 0.0;
            for (int N = 1; N <= 200; ++N) {
                const double exact = exact_log_partition(N, {xy[i].first, xy[i].second, 0.0});
                const double closed = initial_partition_closed(N, xy[i].first, xy[i].second);
                r = std::max(r, std::abs(exact - closed) / std::abs(closed));
            }
            return r;
        });
        checks.push_back({"initial_condition", detail::max_of(res), 1e-12});
    }
    {
        const auto pts = detail::random_points(rng, 5, 1.0, 3.0);
        double r = 0.0;
        for (const auto& pt : pts)
            for (int N = 1; N <= 8; ++N) {
                const auto a = exact_finite(N, pt);
                const auto b = brute_force_finite(N, pt);
                r = std::max({r, std::abs(a.logZ - b.logZ), std::abs(a.m1N - b.m1N), std::abs(a.m2N - b.m2N)});
            }
        checks.push_back({"brute_force_enumeration", r, 1e-12});
    }
    {
        const auto ms = detail::random_interior(rng, 50, 0.05);
        const auto pts = detail::random_points(rng, 50, 1.0, 3.0);
        const double h = 1e-6;
        double rg = 0.0, rj = 0.0, rq = 0.0;
        const VandermondeMap map(ModelSpec::q3());
        for (std::size_t i = 0; i < ms.size(); ++i) {
            const Moments m = ms[i];
            const ThermoPoint& pt = pts[i];
            const Vec2 psi = eos_residual_q3(m, pt);
            const double d1 = (free_energy({m.m1 + h, m.m2}, pt) - free_energy({m.m1 - h, m.m2}, pt)) / (2 * h);
            const double d2 = (free_energy({m.m1, m.m2 + h}, pt) - free_energy({m.m1, m.m2 - h}, pt)) / (2 * h);
            rg = std::max({rg, std::abs(psi.v1 - d1), std::abs(psi.v2 - d2)});

            const Mat2 jac = eos_jacobian_q3(m, pt.t);
            const Vec2 a1 = eos_residual_q3({m.m1 + h, m.m2}, pt), b1 = eos_residual_q3({m.m1 - h, m.m2}, pt);
            const Vec2 a2 = eos_residual_q3({m.m1, m.m2 + h}, pt), b2 = eos_residual_q3({m.m1, m.m2 - h}, pt);
            rj = std::max({rj, std::abs(jac.a11 - (a1.v1 - b1.v1) / (2 * h)),
                           std::abs(jac.a21 - (a1.v2 - b1.v2) / (2 * h)),
                           std::abs(jac.a12 - (a2.v1 - b2.v1) / (2 * h)),
                           std::abs(jac.a22 - (a2.v2 - b2.v2) / (2 * h))});

            const std::vector<double> mv{m.m1, m.m2}, fv{pt.x, pt.y};
            const auto g = eos_residual_general(map, mv, fv, pt.t);
            rq = std::max({rq, std::abs(g[0] - psi.v1), std::abs(g[1] - psi.v2)});
        }
        checks.push_back({"gradient_consistency", rg, 1e-6});
        checks.push_back({"jacobian_consistency", rj, 1e-6});
        checks.push_back({"general_q_consistency", rq, 1e-12});
    }
    {
        double r = 0.0;
        for (const auto& spec : {ModelSpec::q3(), ModelSpec{{-1.5, -0.5, 0.5, 1.5}}, ModelSpec{{0.0, 1.0, 2.0, 3.0, 4.0}}}) {
            const VandermondeMap map(spec);
            const std::size_t q = map.q();
            for (std::size_t i = 0; i < q; ++i)
                for (std::size_t k = 0; k < q; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < q; ++j) s += map.forward(i, j) * map.inverse(j, k);
                    r = std::max(r, std::abs(s - (i == k ? 1.0 : 0.0)));
                }
        }
        checks.push_back({"vandermonde_inverse", r, 1e-12});
    }
    {
        double r = 0.0;
        for (const auto& s : sample_loci(c.resolution))
            if (is_interior({s.point.m1, s.point.m2})) r = std::max(r, s.residuals.max_abs());
        checks.push_back({"cusp_locus_residuals", r, 1e-8});
        double e = 0.0;
        for (const auto& ev : cusp_event_timeline()) e = std::max(e, ev.residual);
        checks.push_back({"cusp_event_residuals", e, 1e-8});
    }
    {
        const double lines = extremize_critical_time(Locus::I, 0.5, 0.99).t_c;
        const double low = extremize_critical_time(Locus::III_plus, kLoopMin, 0.7).t_c;
        const double top = extremize_critical_time(Locus::III_plus, 0.7, kLoopMax).t_c;
        const double high = extremize_critical_time(Locus::III_plus, 0.6, kLoopMax, true).t_c;
        const double r = std::max({std::abs(lines - 1.0), std::abs(low - 9.0 / 7.0), std::abs(top - 9.0 / 7.0),
                                   std::abs(high - 4.0 / 3.0)});
        checks.push_back({"critical_time_extremes", r, 1e-9});
    }
    {
        double r = 0.0;
        for (int i = 0; i <= 30; ++i) r = std::max(r, eos_residual_q3(kSymmetricState, {0.0, 0.0, 0.1 * i}).norm());
        checks.push_back({"symmetric_branch", r, 1e-12});
    }
    return checks;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the text to write and sets the exit code.

struct CommandOutput {
    std::string text;
    int code = kOk;
    std::string message;  // for standard error
    std::vector<std::pair<std::string, std::string>> side_files;  // (path, text)
};

inline CommandOutput cmd_verify(const RunConfig& c) {
    const auto checks = verify_battery(c);
    CommandOutput o;
    std::vector<std::string> failed;
    for (const auto& ch : checks)
        if (!ch.passed()) failed.push_back(ch.name);
    if (c.output_format() == Format::json) {
        json j;
        j["passed"] = failed.empty();
        j["seed"] = c.seed;
        json arr = json::array();
        for (const auto& ch : checks)
            arr.push_back({{"name", ch.name},
                           {"residual", jnum(ch.residual)},
                           {"tolerance", ch.tolerance},
                           {"passed", ch.passed()}});
        j["checks"] = arr;
        j["failed"] = failed;
        o.text = dump(j);
    } else {
        CsvWriter w({"name", "residual", "tolerance", "passed"});
        for (const auto& ch : checks) w.row({ch.name, fmt(ch.residual), fmt(ch.tolerance), ch.passed() ? "1" : "0"});
        o.text = w.str();
    }
    if (!failed.empty()) {
        o.code = kVerifyFailed;
        o.message = "verification failed:";
        for (const auto& f : failed) o.message += " " + f;
    }
    return o;
}

inline CommandOutput cmd_eos(const RunConfig& c) {
    SolverConfig cfg = c.solver;
    cfg.threads = c.threads;
    const auto branches = solve_branches(c.pt, cfg);
    int eq = -1;
    bool coexistence = false;
    try {
        const Equilibrium e = select_equilibrium(branches);
        eq = int(e.index);
        coexistence = e.coexistence;
    } catch (const SolverError&) {
    }
    CommandOutput o;
    if (c.output_format() == Format::json) {
        json j;
        j["x"] = c.pt.x;
        j["y"] = c.pt.y;
        j["t"] = c.pt.t;
        j["coexistence"] = coexistence;
        json arr = json::array();
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const auto& b = branches[i];
            arr.push_back({{"branch_id", i},
                           {"m1", jnum(b.m.m1)},
                           {"m2", jnum(b.m.m2)},
                           {"F", jnum(b.F)},
                           {"classification", std::string(to_string(b.kind))},
                           {"residual", jnum(b.residual)},
                           {"is_equilibrium", int(i) == eq}});
        }
        j["branches"] = arr;
        o.text = dump(j);
    } else {
        CsvWriter w({"branch_id", "m1", "m2", "F", "classification", "residual", "is_equilibrium"});
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const auto& b = branches[i];
            w.row({std::to_string(i), fmt(b.m.m1), fmt(b.m.m2), fmt(b.F), std::string(to_string(b.kind)),
                   fmt(b.residual), int(i) == eq ? "1" : "0"});
        }
        o.text = w.str();
    }
    return o;
}

inline std::vector<double> sweep_times(const RunConfig& c) {
    if (c.t_samples < 2) return {c.pt.t};
    std::vector<double> ts;
    for (int i = 0; i < c.t_samples; ++i)
        ts.push_back(i + 1 == c.t_samples ? c.t_hi : c.t_lo + (c.t_hi - c.t_lo) * i / (c.t_samples - 1));
    return ts;
}

inline CommandOutput cmd_sweep(const RunConfig& c) {
    SolverConfig cfg = c.solver;
    cfg.threads = c.threads;
    const double y = c.pt.y;
    std::vector<SweepResult> profiles;
    std::size_t failed = 0, total = 0;
    for (double t : sweep_times(c)) {
        profiles.push_back(sweep_profile(y, c.x_lo, c.x_hi, c.x_samples, t, cfg));
        for (const auto& s : profiles.back().samples) {
            ++total;
            failed += s.failed;
        }
    }
    if (failed == total) throw SolverError("sweep: no sample could be solved");
    CommandOutput o;
    if (c.output_format() == Format::json) {
        json j;
        j["y"] = y;
        json ps = json::array();
        for (const auto& p : profiles) {
            json pj;
            pj["t"] = p.t;
            pj["max_branches"] = p.max_branches;
            json mv = json::array();
            for (const auto& iv : p.multivalued) mv.push_back({jnum(iv.lo), jnum(iv.hi)});
            pj["multivalued"] = mv;
            json folds = json::array();
            for (const auto& f : p.folds) folds.push_back({{"x", jnum(f.x)}, {"m1", jnum(f.m.m1)}, {"m2", jnum(f.m.m2)}});
            pj["folds"] = folds;
            json rows = json::array();
            for (const auto& s : p.samples) {
                if (s.failed) {
                    rows.push_back({{"x", jnum(s.x)}, {"error", s.error}});
                    continue;
                }
                for (std::size_t i = 0; i < s.branches.size(); ++i) {
                    const auto& b = s.branches[i];
                    rows.push_back({{"x", jnum(s.x)},
                                    {"branch_id", s.ids[i]},
                                    {"m1", jnum(b.m.m1)},
                                    {"m2", jnum(b.m.m2)},
                                    {"F", jnum(b.F)},
                                    {"classification", std::string(to_string(b.kind))},
                                    {"is_equilibrium", int(i) == s.equilibrium}});
                }
            }
            pj["rows"] = rows;
            ps.push_back(pj);
        }
        j["profiles"] = ps;
        o.text = dump(j);
    } else {
        CsvWriter w({"x", "y", "t", "branch_id", "m1", "m2", "F", "is_equilibrium"});
        for (const auto& p : profiles)
            for (const auto& s : p.samples) {
                if (s.failed) continue;
                for (std::size_t i = 0; i < s.branches.size(); ++i) {
                    const auto& b = s.branches[i];
                    w.row({fmt(s.x), fmt(y), fmt(p.t), std::to_string(s.ids[i]), fmt(b.m.m1), fmt(b.m.m2), fmt(b.F),
                           int(i) == s.equilibrium ? "1" : "0"});
                }
            }
        o.text = w.str();
    }
    if (failed) o.message = "sweep: " + std::to_string(failed) + " sample(s) failed and were skipped";
    return o;
}

/// Self-check threshold for every emitted cusp row with a finite field image.
inline constexpr double kEmitResidualTol = 1e-8;

struct LocusRow {
    Locus locus = Locus::I;
    double m1 = 0.0, m2 = 0.0, t_c = 0.0;
    double x = NAN, y = NAN;
    std::string reason;
    double residual = NAN;
};

/// Rows for I, II (m2 in [1/2, 0.97]) and III+/- (m2 in [1/2, 7/9]). Line
/// rows below the sampling window keep their moment-plane data and carry a
/// reason instead of field values.
inline std::vector<LocusRow> cusp_rows(int resolution) {
    std::vector<LocusRow> rows;
    for (Locus id : {Locus::I, Locus::II, Locus::III_plus, Locus::III_minus}) {
        const bool line = id == Locus::I || id == Locus::II;
        const double lo = 0.5;
        const double hi = line ? kLineSampleMax : kLoopMax;
        for (int i = 0; i < resolution; ++i) {
            const double m2 = i + 1 == resolution ? hi : lo + (hi - lo) * i / (resolution - 1);
            const LocusSample s = sample_locus_point(id, m2);
            LocusRow r{id, s.point.m1, m2, s.point.t_c, s.point.x, s.point.y, s.reason, NAN};
            if (line && m2 < kLineSampleMin) {
                r.x = r.y = NAN;
                if (r.reason.empty()) r.reason = "near the log singularity of the field map at m2 = 1/2";
            }
            if (std::isfinite(r.x)) {
                r.residual = s.residuals.max_abs();
                if (!(r.residual <= kEmitResidualTol))
                    throw SolverError("cusp: locus " + std::string(to_string(id)) + " at m2 = " + fmt(m2) +
                                      " fails the residual self-check (" + fmt(r.residual) + ")");
            }
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

inline json events_json() {
    json arr = json::array();
    for (const auto& e : cusp_event_timeline())
        arr.push_back({{"kind", std::string(to_string(e.kind))},
                       {"time", e.time},
                       {"m1", jnum(e.location.m1)},
                       {"m2", jnum(e.location.m2)},
                       {"description", e.description},
                       {"residual", jnum(e.residual)}});
    json j;
    j["events"] = arr;
    return j;
}

inline CommandOutput cmd_cusp(const RunConfig& c) {
    const auto rows = cusp_rows(c.resolution);
    CommandOutput o;
    if (c.output_format() == Format::json) {
        json j;
        json arr = json::array();
        for (const auto& r : rows)
            arr.push_back({{"locus_id", std::string(to_string(r.locus))},
                           {"m1", jnum(r.m1)},
                           {"m2", jnum(r.m2)},
                           {"t_c", jnum(r.t_c)},
                           {"x", jnum(r.x)},
                           {"y", jnum(r.y)},
                           {"reason", r.reason}});
        j["loci"] = arr;
        j["events"] = events_json()["events"];
        o.text = dump(j);
    } else {
        CsvWriter w({"locus_id", "m1", "m2", "t_c", "x", "y", "reason"});
        for (const auto& r : rows)
            w.row({std::string(to_string(r.locus)), fmt(r.m1), fmt(r.m2), fmt(r.t_c), fmt(r.x), fmt(r.y), r.reason});
        o.text = w.str();
        std::string events = c.events_path;
        if (events.empty() && !c.out_path.empty())
            events = std::filesystem::path(c.out_path).replace_extension(".events.json").string();
        if (!events.empty()) o.side_files.emplace_back(events, dump(events_json()));
    }
    return o;
}

inline CommandOutput cmd_finite_n(const RunConfig& c) {
    SolverConfig cfg = c.solver;
    cfg.threads = c.threads;
    const ConvergenceTable table = finite_size_convergence(c.Ns, c.pt, cfg);
    const double F = limit_log_partition_density(c.pt, cfg);

    CommandOutput o;
    if (c.output_format() == Format::json) {
        json j;
        j["x"] = c.pt.x;
        j["y"] = c.pt.y;
        j["t"] = c.pt.t;
        j["F_limit"] = jnum(F);
        j["strictly_decreasing"] = table.strictly_decreasing;
        j["growth_exponent"] = jnum(table.growth_exponent);
        json arr = json::array();
        for (const auto& r : table.rows)
            arr.push_back({{"N", r.N}, {"F_N", jnum(r.F_N)}, {"abs_error", jnum(r.error)},
                           {"scaled_error", jnum(r.N * r.error)}});
        j["rows"] = arr;
        o.text = dump(j);
    } else {
        CsvWriter w({"N", "F_N", "F_limit", "abs_error", "scaled_error"});
        for (const auto& r : table.rows)
            w.row({std::to_string(r.N), fmt(r.F_N), fmt(F), fmt(r.error), fmt(r.N * r.error)});
        o.text = w.str();
    }
    return o;
}

inline CommandOutput cmd_mc(const RunConfig& c) {
    McConfig mc = c.mc;
    mc.seed = c.seed;
    mc.threads = c.threads;
    const McEstimate est = mc_run(c.pt, mc);
    std::optional<std::pair<double, double>> exact;
    if (mc.N <= kMaxEnumerationN) exact = exact_moments(mc.N, c.pt);
    CommandOutput o;
    if (c.output_format() == Format::json) {
        json j;
        j["point"] = {{"x", c.pt.x}, {"y", c.pt.y}, {"t", c.pt.t}};
        j["config"] = {{"N", mc.N},       {"sweeps", mc.sweeps}, {"burn_in", mc.burn_in}, {"thinning", mc.thinning},
                       {"chains", mc.chains}, {"batches", mc.batches}, {"seed", mc.seed}};
        j["estimate"] = {{"mean_m1", jnum(est.mean_m1)},
                         {"mean_m2", jnum(est.mean_m2)},
                         {"stderr_m1", jnum(est.stderr_m1)},
                         {"stderr_m2", jnum(est.stderr_m2)},
                         {"acceptance_rate", jnum(est.acceptance_rate)},
                         {"max_chain_z", jnum(est.max_chain_z)},
                         {"chains_disagree", est.chains_disagree}};
        json chains = json::array();
        for (std::size_t i = 0; i < est.chains.size(); ++i) {
            const auto& ch = est.chains[i];
            chains.push_back({{"chain", i},
                              {"start", std::string(to_string(ch.start))},
                              {"mean_m1", jnum(ch.mean_m1)},
                              {"mean_m2", jnum(ch.mean_m2)},
                              {"stderr_m1", jnum(ch.stderr_m1)},
                              {"stderr_m2", jnum(ch.stderr_m2)},
                              {"acceptance_rate", jnum(ch.acceptance_rate)}});
        }
        j["chains"] = chains;
        if (exact) {
            const double z1 = z_score(est.mean_m1, exact->first, est.stderr_m1);
            const double z2 = z_score(est.mean_m2, exact->second, est.stderr_m2);
            j["exact"] = {{"m1", jnum(exact->first)},
                          {"m2", jnum(exact->second)},
                          {"z_m1", jnum(z1)},
                          {"z_m2", jnum(z2)},
                          {"within_3_sigma", std::abs(z1) <= 3.0 && std::abs(z2) <= 3.0}};
        } else {
            j["exact"] = nullptr;
        }
        o.text = dump(j);
    } else {
        CsvWriter w({"chain", "start", "mean_m1", "stderr_m1", "mean_m2", "stderr_m2", "acceptance_rate"});
        for (std::size_t i = 0; i < est.chains.size(); ++i) {
            const auto& ch = est.chains[i];
            w.row({std::to_string(i), std::string(to_string(ch.start)), fmt(ch.mean_m1), fmt(ch.stderr_m1),
                   fmt(ch.mean_m2), fmt(ch.stderr_m2), fmt(ch.acceptance_rate)});
        }
        w.row({"pooled", "", fmt(est.mean_m1), fmt(est.stderr_m1), fmt(est.mean_m2), fmt(est.stderr_m2),
               fmt(est.acceptance_rate)});
        o.text = w.str();
    }
    if (est.chains_disagree) o.message = "mc: chains disagree (max pairwise z = " + fmt(est.max_chain_z) + ")";
    return o;
}

// ---------------------------------------------------------------------------
// Entry point

namespace detail {

/// Flags given on the command line; each overrides the config file.
struct Flags {
    std::optional<std::string> config, out, events, format;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<double> x, y, t, x_lo, x_hi, t_lo, t_hi;
    std::optional<int> x_samples, t_samples, resolution, verify_max_n, grid;
    std::optional<std::vector<int>> Ns;
    std::optional<int> mc_N, thinning, chains, batches;
    std::optional<long> sweeps, burn_in;
    std::optional<double> diffusion_yy, diffusion_xx, diffusion_drift;
};

inline void apply_flags(RunConfig& c, const Flags& f) {
    if (f.out) c.out_path = *f.out;
    if (f.events) c.events_path = *f.events;
    if (f.format) c.format = parse_format(*f.format);
    if (f.threads) c.threads = *f.threads;
    if (f.seed) c.seed = *f.seed;
    if (f.x) c.pt.x = *f.x;
    if (f.y) c.pt.y = *f.y;
    if (f.t) c.pt.t = *f.t;
    if (f.x_lo) c.x_lo = *f.x_lo;
    if (f.x_hi) c.x_hi = *f.x_hi;
    if (f.x_samples) c.x_samples = *f.x_samples;
    if (f.t_lo) c.t_lo = *f.t_lo;
    if (f.t_hi) c.t_hi = *f.t_hi;
    if (f.t_samples) c.t_samples = *f.t_samples;
    if (f.resolution) c.resolution = *f.resolution;
    if (f.verify_max_n) c.verify_max_n = *f.verify_max_n;
    if (f.grid) c.solver.grid = *f.grid;
    if (f.Ns) c.Ns = *f.Ns;
    if (f.mc_N) c.mc.N = *f.mc_N;
    if (f.sweeps) c.mc.sweeps = *f.sweeps;
    if (f.burn_in) c.mc.burn_in = *f.burn_in;
    if (f.thinning) c.mc.thinning = *f.thinning;
    if (f.chains) c.mc.chains = *f.chains;
    if (f.batches) c.mc.batches = *f.batches;
    if (f.diffusion_yy) c.diffusion.yy = *f.diffusion_yy;
    if (f.diffusion_xx) c.diffusion.xx = *f.diffusion_xx;
    if (f.diffusion_drift) c.diffusion.drift = *f.diffusion_drift;
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write '" + path + "'");
    f << text;
    if (!f.flush()) throw UsageError("write to '" + path + "' failed");
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field q = 3 Potts model: exact partition functions, equations of state and cusp maps"};
    app.require_subcommand(1, 1);
    detail::Flags f;

    auto common = [&](CLI::App* s) {
        s->add_option("--config", f.config, "JSON configuration file; flags override its values");
        s->add_option("--out", f.out, "output path (default: standard output)");
        s->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        s->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
        s->add_option("--seed", f.seed, "random seed");
    };
    auto point = [&](CLI::App* s) {
        s->add_option("--x", f.x, "linear field x");
        s->add_option("--y", f.y, "nematic field y");
        s->add_option("--t", f.t, "coupling t");
        s->add_option("--grid", f.grid, "multistart grid per axis");
    };

    auto* verify = app.add_subcommand("verify", "run the identity battery");
    common(verify);
    verify->add_option("--max-n", f.verify_max_n, "largest N in the diffusion check (adds to 1, 5, 50, 500)");
    verify->add_option("--resolution", f.resolution, "locus samples per branch");
    verify->add_option("--diffusion-yy", f.diffusion_yy)->group("");
    verify->add_option("--diffusion-xx", f.diffusion_xx)->group("");
    verify->add_option("--diffusion-drift", f.diffusion_drift)->group("");

    auto* eos = app.add_subcommand("eos", "stationary points of F at one point");
    common(eos);
    point(eos);

    auto* sweep = app.add_subcommand("sweep", "branch profiles along y = const");
    common(sweep);
    point(sweep);
    sweep->add_option("--x-lo", f.x_lo, "lower end of the x-range");
    sweep->add_option("--x-hi", f.x_hi, "upper end of the x-range");
    sweep->add_option("--x-samples", f.x_samples, "samples in x");
    sweep->add_option("--t-lo", f.t_lo, "lower end of the t-range");
    sweep->add_option("--t-hi", f.t_hi, "upper end of the t-range");
    sweep->add_option("--t-samples", f.t_samples, "samples in t (1: use --t)");

    auto* cusp = app.add_subcommand("cusp", "cusp loci and event timeline");
    common(cusp);
    cusp->add_option("--resolution", f.resolution, "samples per locus branch");
    cusp->add_option("--events", f.events, "events JSON path in csv mode (default: <out> with extension .events.json)");

    auto* finite = app.add_subcommand("finite-n", "finite-N convergence table");
    common(finite);
    point(finite);
    finite->add_option("--N", f.Ns, "system sizes")->expected(1, -1);

    auto* mc = app.add_subcommand("mc", "Metropolis estimate of the moments");
    common(mc);
    point(mc);
    mc->add_option("--N", f.mc_N, "number of spins");
    mc->add_option("--sweeps", f.sweeps, "sweeps per chain, burn-in included");
    mc->add_option("--burn-in", f.burn_in, "discarded sweeps");
    mc->add_option("--thinning", f.thinning, "record every k sweeps");
    mc->add_option("--chains", f.chains, "independent chains");
    mc->add_option("--batches", f.batches, "batch-means blocks per chain");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    RunConfig c;
    for (auto* s : {verify, eos, sweep, cusp, finite, mc})
        if (s->parsed()) c.command = s->get_name();

    try {
        if (f.config) apply_config_json(c, load_config_file(*f.config));
        detail::apply_flags(c, f);
        c.validate();
        for (const auto& path : {c.out_path, c.events_path})
            if (!path.empty() && !std::ofstream(path, std::ios::binary | std::ios::app))
                throw UsageError("cannot write '" + path + "'");
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return kUsage;
    }

    CommandOutput result;
    try {
        if (c.command == "verify") result = cmd_verify(c);
        else if (c.command == "eos") result = cmd_eos(c);
        else if (c.command == "sweep") result = cmd_sweep(c);
        else if (c.command == "cusp") result = cmd_cusp(c);
        else if (c.command == "finite-n") result = cmd_finite_n(c);
        else result = cmd_mc(c);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumeric;
    }

    try {
        if (c.out_path.empty()) out << result.text << std::flush;
        else detail::write_file(c.out_path, result.text);
        for (const auto& [path, text] : result.side_files) detail::write_file(path, text);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    if (!result.message.empty()) err << result.message << "\n";
    return result.code;
}

}  // namespace potts::cli
