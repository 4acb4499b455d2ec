#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace potts {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point lies outside the admissible region (negative probability,
/// level not in the model, parameter outside a locus range).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what, std::ptrdiff_t index = -1)
        : Error(what), index_(index) {}

    /// Offending component, or -1 when not applicable.
    [[nodiscard]] std::ptrdiff_t index() const noexcept { return index_; }

private:
    std::ptrdiff_t index_;
};

/// A point is on the simplex boundary where logarithms diverge.
class SingularDomainError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Field-plane image is at infinity (log singularity of the map).
class InfiniteFieldError : public DomainError {
public:
    using DomainError::DomainError;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

/// Domain margin for clamping tiny negative probabilities.
inline constexpr double kDomainEps = 1e-12;

/// Spin model with q states taking the values `levels`.
struct ModelSpec {
    std::vector<double> levels;

    ModelSpec() : levels{1.0, -1.0, 0.0} {}
    explicit ModelSpec(std::vector<double> lv) : levels(std::move(lv)) { validate(); }

    /// q = 3 with (a1, a2, a3) = (+1, -1, 0).
    static ModelSpec q3() { return ModelSpec{}; }

    [[nodiscard]] std::size_t q() const noexcept { return levels.size(); }

    void validate() const {
        if (levels.size() < 2) throw DomainError("ModelSpec: q must be >= 2");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (!std::isfinite(levels[i])) throw DomainError("ModelSpec: non-finite level", static_cast<std::ptrdiff_t>(i));
            for (std::size_t j = 0; j < i; ++j)
                if (levels[i] == levels[j])
                    throw DomainError("ModelSpec: levels must be pairwise distinct", static_cast<std::ptrdiff_t>(i));
        }
    }
};

/// Rescaled thermodynamic coordinates: x = beta h1, y = beta h2, t = beta J / 2.
struct ThermoPoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;

    void validate() const {
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(t))
            throw DomainError("ThermoPoint: non-finite coordinate");
        if (t < 0.0) throw DomainError("ThermoPoint: t must be >= 0");
    }
};

/// Order parameters of the q = 3 model.
struct Moments {
    double m1 = 0.0;
    double m2 = 0.0;

    friend bool operator==(const Moments&, const Moments&) = default;
};

/// General-q moments m_1..m_{q-1} and probabilities p_1..p_q.
using MomentVector = std::vector<double>;
using ProbabilityVector = std::vector<double>;

struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    [[nodiscard]] double det() const noexcept { return a11 * a22 - a12 * a21; }
    [[nodiscard]] double trace() const noexcept { return a11 + a22; }
};

struct Vec2 {
    double v1 = 0.0;
    double v2 = 0.0;

    [[nodiscard]] double norm() const noexcept { return std::hypot(v1, v2); }
};

}  // namespace potts
