#ifndef QCL_SQUEEZE_HPP
#define QCL_SQUEEZE_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "core.hpp"
#include "kernel_matrix.hpp"

namespace qcl {

using complex = std::complex<double>;

/// Inverted-oscillator parameters. The ladder operators are built with
/// (m*omega/2*hbar)^(1/2); phi is the squeeze angle (default -pi/4).
struct SqueezeParams {
    double mass = 1.0;
    double omega = 1.0;
    double phi = -std::numbers::pi / 4.0;
    double hbar = 1.0;

    void validate() const
    {
        if (!(mass > 0.0)) throw InvalidArgument("invalid-params", "mass must be positive");
        if (!(omega > 0.0)) throw InvalidArgument("invalid-params", "omega must be positive");
        if (!(hbar > 0.0)) throw InvalidArgument("invalid-params", "hbar must be positive");
        if (!std::isfinite(phi)) throw InvalidArgument("invalid-params", "phi must be finite");
    }

    /// (1/2)(m*omega/2*hbar)^-1 = hbar/(m*omega), the common prefactor of both
    /// two-point functions.
    double green_prefactor() const noexcept { return hbar / (mass * omega); }

    /// Vacuum variance of the position quadrature, hbar/(2*m*omega).
    double vacuum_variance() const noexcept { return 0.5 * hbar / (mass * omega); }
};

/// b = u*a + v*a^dagger.
struct BogolubovCoeffs {
    complex u;
    complex v;

    double normalization_deviation() const noexcept { return std::norm(u) - std::norm(v) - 1.0; }
};

/// Momentum-pair coefficients: b_k = alpha_k^* a_k - beta_k a_{-k}^dagger.
struct PairCoeffs {
    complex alpha_k;
    complex beta_k;
};

struct CoherentAmplitude {
    complex alpha;
};

struct QuadratureVariances {
    double squeezed;
    double antisqueezed;
};

inline void require_nonnegative_time(double t)
{
    if (!(t >= 0.0)) throw InvalidArgument("negative-time", "time must be non-negative");
}

inline BogolubovCoeffs bogolubov_coefficients(const SqueezeParams& p, double t)
{
    p.validate();
    require_nonnegative_time(t);
    const double wt = p.omega * t;
    return {complex(std::cosh(wt), 0.0), -std::polar(1.0, 2.0 * p.phi) * std::sinh(wt)};
}

inline double particle_number(const SqueezeParams& p, double t)
{
    p.validate();
    require_nonnegative_time(t);
    const double s = std::sinh(p.omega * t);
    return s * s;
}

/// Signed deviation |alpha|^2 - |beta|^2 - 1.
inline double pair_normalization_check(const PairCoeffs& c) noexcept
{
    return std::norm(c.alpha_k) - std::norm(c.beta_k) - 1.0;
}

/// Principal quadrature variances of the squeezed vacuum, in units where the
/// vacuum variance is hbar/(2*m*omega). For a pure Gaussian state the two
/// principal values are (|u| -/+ |v|)^2 times the vacuum variance; the
/// squeezed branch is written as 1/(|u|+|v|)^2 using |u|^2 - |v|^2 = 1.
inline QuadratureVariances quadrature_variances(const SqueezeParams& p, double t)
{
    const auto c = bogolubov_coefficients(p, t);
    const double stretch = std::abs(c.u) + std::abs(c.v);
    const double vac = p.vacuum_variance();
    return {vac / (stretch * stretch), vac * stretch * stretch};
}

/// Coefficient of i in <[x(t), x(t')]>: (hbar/m*omega) sinh(omega (t - t')).
inline double commutator_green(const SqueezeParams& p, double t, double t_prime)
{
    p.validate();
    return p.green_prefactor() * std::sinh(p.omega * (t - t_prime));
}

/// <{x(t), x(t')}> = (hbar/m*omega)(cosh(omega s) - cos(2 phi) sinh(omega s)), s = t + t'.
inline double hadamard_green(const SqueezeParams& p, double t, double t_prime)
{
    p.validate();
    const double s = p.omega * (t + t_prime);
    return p.green_prefactor() * (std::cosh(s) - std::cos(2.0 * p.phi) * std::sinh(s));
}

inline double coherent_overlap(const CoherentAmplitude& a, const CoherentAmplitude& b) noexcept
{
    return std::exp(-std::norm(a.alpha - b.alpha));
}

inline double coherent_particle_number(const CoherentAmplitude& a) noexcept
{
    return std::norm(a.alpha);
}

/// shift_i = sum_{j<=i} w_j Delta(t_i, t_j) xi(t_j) with trapezoidal weights:
/// the classical displacement accumulated from a drive through a retarded
/// response function.
inline std::vector<double> accumulate_coherent_shift(const TimeGrid& grid, const KernelMatrix& response,
                                                     std::span<const double> drive)
{
    require_kind(response, KernelKind::retarded, "kernel-not-retarded");
    if (!(response.grid() == grid) || drive.size() != grid.size()) {
        throw InvalidArgument("grid-mismatch", "response, drive and grid must share the same grid");
    }
    const double dt = grid.dt();
    std::vector<double> shift(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        CompensatedSum acc;
        for (std::size_t j = 0; j <= i; ++j) {
            acc.add(trapezoid_weight(j, i, dt) * response(i, j) * drive[j]);
        }
        shift[i] = acc.value();
    }
    return shift;
}

} // namespace qcl

#endif
