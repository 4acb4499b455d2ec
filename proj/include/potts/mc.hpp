#pragma once

// Single-spin-flip Metropolis sampling of the q = 3 complete-graph model.
// Energies only depend on the occupation numbers, so every proposal costs O(1).

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "potts/exact.hpp"
#include "potts/parallel.hpp"
#include "potts/types.hpp"

namespace potts {

struct McConfig {
    int N = 100;
    long sweeps = 10000;  // total, burn-in included; one sweep = N proposals
    long burn_in = 1000;
    int thinning = 1;     // record every `thinning` sweeps
    std::uint64_t seed = 20240601;
    int chains = 3;
    int batches = 32;     // batch-means blocks per chain
    unsigned threads = 1;

    void validate() const {
        if (N < 1 || sweeps < 1 || burn_in < 1 || thinning < 1 || chains < 1 || batches < 2)
            throw DomainError("McConfig: all sizes must be positive (batches >= 2)");
        if (burn_in >= sweeps) throw DomainError("McConfig: burn_in must be smaller than sweeps");
        if ((sweeps - burn_in) / thinning < batches)
            throw DomainError("McConfig: fewer recorded samples than batches");
    }
};

enum class StartState { all_zero, all_plus, random };

inline std::string_view to_string(StartState s) {
    switch (s) {
        case StartState::all_zero: return "all_zero";
        case StartState::all_plus: return "all_plus";
        case StartState::random: return "random";
    }
    return "?";
}

/// Start of chain c: all-zero, all-plus and uniform-random in rotation.
inline StartState chain_start(int c) { return static_cast<StartState>(c % 3); }

/// splitmix64 finaliser; derives independent stream seeds from (seed, chain).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t chain) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (chain + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// State indices: 0 -> +1, 1 -> -1, 2 -> 0.
inline constexpr std::array<int, 3> kStateValue{+1, -1, 0};

/// Exponent of e^{-beta H} in integer sums S1 = n+ - n-, S2 = n+ + n-:
/// t (S1^2/(2N) + 3 S2^2/(2N) - 2 S2) + x S1 + y S2.
inline double chain_exponent(long S1, long S2, int N, const ThermoPoint& pt) {
    const double s1 = double(S1), s2 = double(S2);
    return pt.t * (0.5 * s1 * s1 / N + 1.5 * s2 * s2 / N - 2.0 * s2) + pt.x * s1 + pt.y * s2;
}

class MetropolisChain {
public:
    MetropolisChain(int N, const ThermoPoint& pt, std::uint64_t seed, StartState start)
        : N_(N), pt_(pt), rng_(seed), spins_(std::size_t(N), 2) {
        if (N < 1) throw DomainError("MetropolisChain: N must be >= 1");
        pt.validate();
        if (start == StartState::all_plus) std::fill(spins_.begin(), spins_.end(), std::uint8_t{0});
        if (start == StartState::random) {
            std::uniform_int_distribution<int> pick(0, 2);
            for (auto& s : spins_) s = std::uint8_t(pick(rng_));
        }
        counts_ = {0, 0, 0};
        for (auto s : spins_) ++counts_[s];
    }

    /// Change of the exponent when one spin moves from state a to state b.
    [[nodiscard]] double delta_exponent(int from, int to) const {
        const long S1 = S1_(), S2 = S2_();
        const long d1 = kStateValue[std::size_t(to)] - kStateValue[std::size_t(from)];
        const long d2 = kStateValue[std::size_t(to)] * kStateValue[std::size_t(to)] -
                        kStateValue[std::size_t(from)] * kStateValue[std::size_t(from)];
        const double inv2N = 0.5 / N_;
        return pt_.t * (double(2 * S1 * d1 + d1 * d1) * inv2N + 3.0 * double(2 * S2 * d2 + d2 * d2) * inv2N -
                        2.0 * double(d2)) +
               pt_.x * double(d1) + pt_.y * double(d2);
    }

    /// One proposal; returns true when accepted.
    bool step() {
        const auto site = std::size_t(site_dist_(rng_) % std::uint64_t(N_));
        const int from = spins_[site];
        const int to = (from + 1 + int(coin_(rng_) & 1u)) % 3;
        const double dE = delta_exponent(from, to);
        if (dE < 0.0 && !(unit_(rng_) < std::exp(dE))) return false;
        spins_[site] = std::uint8_t(to);
        --counts_[std::size_t(from)];
        ++counts_[std::size_t(to)];
        return true;
    }

    /// N proposals; returns the number accepted.
    long sweep() {
        long acc = 0;
        for (int i = 0; i < N_; ++i) acc += step();
        return acc;
    }

    /// Force a given spin into state `to` (used to test the O(1) update).
    void set_spin(std::size_t site, int to) {
        --counts_[spins_[site]];
        spins_[site] = std::uint8_t(to);
        ++counts_[std::size_t(to)];
    }

    [[nodiscard]] double exponent() const { return chain_exponent(S1_(), S2_(), N_, pt_); }

    /// Exponent recomputed from the spin array, without the running counts.
    [[nodiscard]] double exponent_from_spins() const {
        long s1 = 0, s2 = 0;
        for (auto s : spins_) {
            s1 += kStateValue[s];
            s2 += kStateValue[s] * kStateValue[s];
        }
        return chain_exponent(s1, s2, N_, pt_);
    }

    [[nodiscard]] double mu1() const { return double(S1_()) / N_; }
    [[nodiscard]] double mu2() const { return double(S2_()) / N_; }
    [[nodiscard]] const std::array<long, 3>& counts() const noexcept { return counts_; }
    [[nodiscard]] int N() const noexcept { return N_; }
    [[nodiscard]] std::size_t sites() const noexcept { return spins_.size(); }

private:
    [[nodiscard]] long S1_() const { return counts_[0] - counts_[1]; }
    [[nodiscard]] long S2_() const { return counts_[0] + counts_[1]; }

    int N_;
    ThermoPoint pt_;
    std::mt19937_64 rng_;
    std::uniform_int_distribution<std::uint64_t> site_dist_{};
    std::uniform_int_distribution<std::uint32_t> coin_{};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::vector<std::uint8_t> spins_;
    std::array<long, 3> counts_{};
};

struct BatchMeans {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Mean and standard error from `batches` equal contiguous blocks; trailing
/// samples that do not fill a block are dropped.
inline BatchMeans batch_means(std::span<const double> xs, int batches) {
    const std::size_t len = xs.size() / std::size_t(batches);
    if (len == 0) throw DomainError("batch_means: fewer samples than batches");
    std::vector<double> means(std::size_t(batches), 0.0);
    for (std::size_t b = 0; b < means.size(); ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += xs[b * len + i];
        means[b] = s / double(len);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= double(means.size());
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= double(means.size() - 1);
    return {m, std::sqrt(var / double(means.size()))};
}

struct ChainEstimate {
    StartState start = StartState::all_zero;
    double mean_m1 = 0.0, mean_m2 = 0.0;
    double stderr_m1 = 0.0, stderr_m2 = 0.0;
    double acceptance_rate = 0.0;
    std::vector<double> batch_m1, batch_m2;  // per-batch means
};

struct McEstimate {
    double mean_m1 = 0.0, mean_m2 = 0.0;
    double stderr_m1 = 0.0, stderr_m2 = 0.0;
    double acceptance_rate = 0.0;
    std::vector<ChainEstimate> chains;
    /// Largest pairwise |difference| / combined stderr between chain means.
    double max_chain_z = 0.0;
    bool chains_disagree = false;
};

inline constexpr double kChainDisagreementZ = 5.0;

inline ChainEstimate run_chain(const ThermoPoint& pt, const McConfig& cfg, int c) {
    MetropolisChain chain(cfg.N, pt, stream_seed(cfg.seed, std::uint64_t(c)), chain_start(c));
    for (long s = 0; s < cfg.burn_in; ++s) chain.sweep();
    std::vector<double> m1, m2;
    const long recorded = (cfg.sweeps - cfg.burn_in) / cfg.thinning;
    m1.reserve(std::size_t(recorded));
    m2.reserve(std::size_t(recorded));
    long accepted = 0, proposed = 0;
    for (long s = cfg.burn_in; s < cfg.sweeps; ++s) {
        accepted += chain.sweep();
        proposed += cfg.N;
        if ((s - cfg.burn_in + 1) % cfg.thinning == 0) {
            m1.push_back(chain.mu1());
            m2.push_back(chain.mu2());
        }
    }
    ChainEstimate e;
    e.start = chain_start(c);
    const std::size_t len = m1.size() / std::size_t(cfg.batches);
    for (int b = 0; b < cfg.batches; ++b) {
        double s1 = 0, s2 = 0;
        for (std::size_t i = 0; i < len; ++i) {
            s1 += m1[std::size_t(b) * len + i];
            s2 += m2[std::size_t(b) * len + i];
        }
        e.batch_m1.push_back(s1 / double(len));
        e.batch_m2.push_back(s2 / double(len));
    }
    const BatchMeans b1 = batch_means(m1, cfg.batches), b2 = batch_means(m2, cfg.batches);
    e.mean_m1 = b1.mean;
    e.mean_m2 = b2.mean;
    e.stderr_m1 = b1.stderr_;
    e.stderr_m2 = b2.stderr_;
    e.acceptance_rate = proposed ? double(accepted) / double(proposed) : 0.0;
    return e;
}

/// Run `chains` independent chains and pool their batch means.
inline McEstimate mc_run(const ThermoPoint& pt, const McConfig& cfg) {
    cfg.validate();
    pt.validate();
    McEstimate est;
    est.chains = parallel_map<ChainEstimate>(std::size_t(cfg.chains), cfg.threads,
                                             [&](std::size_t c) { return run_chain(pt, cfg, int(c)); });
    std::vector<double> all1, all2;
    double acc = 0.0;
    for (const auto& c : est.chains) {
        all1.insert(all1.end(), c.batch_m1.begin(), c.batch_m1.end());
        all2.insert(all2.end(), c.batch_m2.begin(), c.batch_m2.end());
        acc += c.acceptance_rate;
    }
    const BatchMeans p1 = batch_means(all1, int(all1.size())), p2 = batch_means(all2, int(all2.size()));
    est.mean_m1 = p1.mean;
    est.mean_m2 = p2.mean;
    est.stderr_m1 = p1.stderr_;
    est.stderr_m2 = p2.stderr_;
    est.acceptance_rate = acc / double(est.chains.size());
    for (std::size_t i = 0; i < est.chains.size(); ++i)
        for (std::size_t j = i + 1; j < est.chains.size(); ++j) {
            const auto& a = est.chains[i];
            const auto& b = est.chains[j];
            auto z = [](double ma, double mb, double sa, double sb) {
                const double s = std::hypot(sa, sb);
                return s > 0.0 ? std::abs(ma - mb) / s : (ma == mb ? 0.0 : INFINITY);
            };
            est.max_chain_z = std::max({est.max_chain_z, z(a.mean_m1, b.mean_m1, a.stderr_m1, b.stderr_m1),
                                        z(a.mean_m2, b.mean_m2, a.stderr_m2, b.stderr_m2)});
        }
    est.chains_disagree = est.max_chain_z > kChainDisagreementZ;
    return est;
}

struct McComparison {
    ThermoPoint pt;
    McEstimate mc;
    double exact_m1 = 0.0, exact_m2 = 0.0;
    double z_m1 = 0.0, z_m2 = 0.0;
    bool diagnostic_only = false;  // excluded from pass/fail
    [[nodiscard]] bool pass() const noexcept { return std::abs(z_m1) <= 3.0 && std::abs(z_m2) <= 3.0; }
};

inline double z_score(double est, double exact, double se) {
    if (se > 0.0) return (est - exact) / se;
    return est == exact ? 0.0 : INFINITY;
}

/// Compare MC means with exact enumeration at the same N.
inline McComparison mc_vs_exact(const ThermoPoint& pt, const McConfig& cfg) {
    McComparison c;
    c.pt = pt;
    c.mc = mc_run(pt, cfg);
    const auto [m1, m2] = exact_moments(cfg.N, pt);
    c.exact_m1 = m1;
    c.exact_m2 = m2;
    c.z_m1 = z_score(c.mc.mean_m1, m1, c.mc.stderr_m1);
    c.z_m2 = z_score(c.mc.mean_m2, m2, c.mc.stderr_m2);
    return c;
}

/// Ten single-phase points (t <= 0.9).
inline const std::vector<ThermoPoint>& standard_mc_battery() {
    static const std::vector<ThermoPoint> pts{
        {0.0, 0.0, 0.0},   {0.1, -0.2, 0.5}, {-0.3, 0.2, 0.25}, {0.5, 0.5, 0.9},   {-0.5, -0.5, 0.6},
        {0.2, 0.8, 0.75},  {1.0, -1.0, 0.4}, {-0.8, 0.3, 0.9},  {0.05, -0.6, 0.8}, {0.3, 0.1, 0.5},
    };
    return pts;
}

struct McBatteryReport {
    std::vector<McComparison> rows;
    int pairs = 0;
    int passing_pairs = 0;
    [[nodiscard]] double pass_fraction() const noexcept { return pairs ? double(passing_pairs) / pairs : 0.0; }
    [[nodiscard]] bool pass() const noexcept { return pass_fraction() >= 0.95; }
};

inline McBatteryReport mc_battery(std::span<const ThermoPoint> pts, const McConfig& cfg) {
    McBatteryReport r;
    for (const auto& pt : pts) {
        McComparison c = mc_vs_exact(pt, cfg);
        r.pairs += 2;
        r.passing_pairs += int(std::abs(c.z_m1) <= 3.0) + int(std::abs(c.z_m2) <= 3.0);
        r.rows.push_back(std::move(c));
    }
    return r;
}

}  // namespace potts
