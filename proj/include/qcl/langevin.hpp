#ifndef QCL_LANGEVIN_HPP
#define QCL_LANGEVIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "kernel_matrix.hpp"
#include "kernels.hpp"

namespace qcl {

inline constexpr double divergence_threshold = 1e12;

enum class PotentialKind { quadratic, inverted, double_well };

inline const char* to_string(PotentialKind kind) noexcept
{
    switch (kind) {
    case PotentialKind::quadratic: return "quadratic";
    case PotentialKind::inverted: return "inverted";
    case PotentialKind::double_well: return "double_well";
    }
    return "unknown";
}

/// quadratic:   V = omega^2 x^2 / 2
/// inverted:    V = -omega^2 x^2 / 2
/// double_well: V = m2 x^2 / 2 + lambda x^4 / 4!   (m2 < 0, lambda > 0)
struct PotentialSpec {
    PotentialKind kind = PotentialKind::quadratic;
    double omega = 1.0;
    double m2 = -1.0;
    double lambda = 1.0;

    static PotentialSpec quadratic(double omega0) { return {PotentialKind::quadratic, omega0, 0.0, 0.0}; }
    static PotentialSpec inverted(double omega) { return {PotentialKind::inverted, omega, 0.0, 0.0}; }
    static PotentialSpec double_well(double m2, double lambda)
    {
        PotentialSpec p{PotentialKind::double_well, 0.0, m2, lambda};
        p.validate();
        return p;
    }

    void validate() const
    {
        if (kind == PotentialKind::double_well) {
            if (!(lambda > 0.0)) throw InvalidArgument("invalid-potential", "double well requires lambda > 0");
            if (!(m2 < 0.0)) throw InvalidArgument("invalid-potential", "double well requires m2 < 0");
        } else if (!std::isfinite(omega)) {
            throw InvalidArgument("invalid-potential", "omega must be finite");
        }
    }

    /// -V'(x)
    double force(double x) const noexcept
    {
        switch (kind) {
        case PotentialKind::quadratic: return -(omega * omega * x);
        case PotentialKind::inverted: return omega * omega * x;
        case PotentialKind::double_well: return -(m2 * x + (lambda / 6.0) * x * x * x);
        }
        return 0.0;
    }

    double value(double x) const noexcept
    {
        switch (kind) {
        case PotentialKind::quadratic: return 0.5 * omega * omega * x * x;
        case PotentialKind::inverted: return -0.5 * omega * omega * x * x;
        case PotentialKind::double_well: return 0.5 * m2 * x * x + (lambda / 24.0) * x * x * x * x;
        }
        return 0.0;
    }
};

struct Trajectory {
    TimeGrid grid;
    std::vector<double> x;
    std::vector<double> xdot;
};

namespace detail {

/// v <- (v + dt*a)/(1 + gamma*dt), x <- x + dt*v. Friction is implicit,
/// the position update uses the new velocity.
inline void semi_implicit_step(double& x, double& v, double accel, double gamma, double dt) noexcept
{
    v = (v + dt * accel) / (1.0 + gamma * dt);
    x = x + dt * v;
}

inline void guard_finite(double x, double t)
{
    if (!std::isfinite(x) || std::abs(x) > divergence_threshold) {
        throw NumericalError("divergence", "trajectory diverged (|x| > 1e12) at t = " + std::to_string(t));
    }
}

inline void require_signal(const TimeGrid& grid, std::span<const double> xi)
{
    if (xi.size() != grid.size()) throw InvalidArgument("grid-mismatch", "noise realization does not match the grid");
}

} // namespace detail

/// x'' = -gamma x' - V'(x) + xi(t).
inline Trajectory integrate_white(const PotentialSpec& pot, double gamma, const TimeGrid& grid,
                                  std::span<const double> xi, double x0, double v0)
{
    pot.validate();
    detail::require_signal(grid, xi);
    const std::size_t n = grid.size();
    const double dt = grid.dt();
    Trajectory tr{grid, std::vector<double>(n), std::vector<double>(n)};
    double x = x0, v = v0;
    tr.x[0] = x;
    tr.xdot[0] = v;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        detail::semi_implicit_step(x, v, pot.force(x) + xi[i], gamma, dt);
        detail::guard_finite(x, grid[i + 1]);
        tr.x[i + 1] = x;
        tr.xdot[i + 1] = v;
    }
    return tr;
}

/// X'' = omega^2 X - int_{t0}^{t} M(t, t') X(t') dt' - xi(t), the memory
/// integral evaluated with trapezoidal weights over the stored history.
inline Trajectory integrate_memory(double omega, const KernelMatrix& memory, const TimeGrid& grid,
                                   std::span<const double> xi, double x0, double v0)
{
    require_kind(memory, KernelKind::retarded, "kernel-not-retarded");
    if (!(memory.grid() == grid)) throw InvalidArgument("grid-mismatch", "memory kernel does not match the grid");
    detail::require_signal(grid, xi);
    const std::size_t n = grid.size();
    const double dt = grid.dt();
    Trajectory tr{grid, std::vector<double>(n), std::vector<double>(n)};
    double x = x0, v = v0;
    tr.x[0] = x;
    tr.xdot[0] = v;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double mem = 0.0;
        for (std::size_t j = 0; j <= i; ++j) mem += trapezoid_weight(j, i, dt) * memory(i, j) * tr.x[j];
        detail::semi_implicit_step(x, v, omega * omega * x - mem - xi[i], 0.0, dt);
        detail::guard_finite(x, grid[i + 1]);
        tr.x[i + 1] = x;
        tr.xdot[i + 1] = v;
    }
    return tr;
}

/// Relaxation rate a = lambda phi0^2 / (6 H) of 3H phi' + (lambda/2) phi0^2 phi = (lambda/2) phi0^2 xi.
inline double overdamped_rate(const DeSitterParams& dp)
{
    dp.validate();
    return dp.lambda * dp.phi0 * dp.phi0 / (6.0 * dp.hubble);
}

/// phi' = -a phi + a * noise_amp * xi, stepped with the exponential
/// integrator phi_{i+1} = e^{-a dt} phi_i + (1 - e^{-a dt}) noise_amp xi_i,
/// exact for the noiseless decay.
inline Trajectory integrate_overdamped_mode(const DeSitterParams& dp, double noise_amp, const TimeGrid& grid,
                                            std::span<const double> xi, double phi_init)
{
    const double a = overdamped_rate(dp);
    if (!(a > 0.0)) throw InvalidArgument("non-positive-rate", "relaxation rate lambda*phi0^2/(6H) must be positive");
    detail::require_signal(grid, xi);
    const std::size_t n = grid.size();
    const double decay = std::exp(-a * grid.dt());
    const double gain = -std::expm1(-a * grid.dt());
    Trajectory tr{grid, std::vector<double>(n), std::vector<double>(n)};
    double phi = phi_init;
    for (std::size_t i = 0; i < n; ++i) {
        tr.x[i] = phi;
        const double drive = noise_amp * xi[i];
        tr.xdot[i] = a * (drive - phi);
        if (i + 1 < n) {
            phi = decay * phi + gain * drive;
            detail::guard_finite(phi, grid[i + 1]);
        }
    }
    return tr;
}

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
};

inline Histogram make_histogram(std::span<const double> values, std::size_t bins)
{
    bins = std::max<std::size_t>(1, bins);
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h{std::vector<double>(bins + 1), std::vector<std::size_t>(bins, 0)};
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + static_cast<double>(b) * width;
    h.edges[bins] = hi;
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

struct EnsembleStats {
    TimeGrid grid{0.0, 1.0, 2};
    std::vector<double> mean;
    std::vector<double> variance;
    Histogram final_histogram;
    std::vector<double> per_run_finals;
    /// Per-realization position paths, kept for path functionals such as the
    /// recursion probability. Empty when not requested.
    std::vector<std::vector<double>> paths;

    std::size_t realizations() const noexcept { return per_run_finals.size(); }

    /// Standard error of the ensemble mean at grid point i.
    double mean_stderr(std::size_t i) const
    {
        const auto m = static_cast<double>(realizations());
        return m > 1 ? std::sqrt(variance[i] / (m - 1.0)) : 0.0;
    }
};

struct EnsembleOptions {
    std::size_t threads = 1;
    std::size_t histogram_bins = 40;
    bool keep_paths = true;
};

/// Pointwise mean and (population) variance over realizations, accumulated in
/// realization order with compensated sums.
inline EnsembleStats aggregate(const TimeGrid& grid, std::vector<std::vector<double>> paths,
                               std::size_t histogram_bins = 40, bool keep_paths = true)
{
    const std::size_t m = paths.size();
    const std::size_t n = grid.size();
    if (m < 1) throw InvalidArgument("invalid-realizations", "ensemble size must be >= 1");
    EnsembleStats s{grid, std::vector<double>(n), std::vector<double>(n), {}, std::vector<double>(m), {}};
    for (std::size_t i = 0; i < n; ++i) {
        CompensatedSum sum;
        for (const auto& p : paths) sum.add(p[i]);
        const double mu = sum.value() / static_cast<double>(m);
        CompensatedSum sq;
        for (const auto& p : paths) sq.add((p[i] - mu) * (p[i] - mu));
        s.mean[i] = mu;
        s.variance[i] = sq.value() / static_cast<double>(m);
    }
    for (std::size_t r = 0; r < m; ++r) s.per_run_finals[r] = paths[r].back();
    s.final_histogram = make_histogram(s.per_run_finals, histogram_bins);
    if (keep_paths) s.paths = std::move(paths);
    return s;
}

/// Runs `realize(index, seed)` for index in [0, m) with
/// seed = derive_seed(master_seed, index) and aggregates the position paths.
template <typename Realize>
EnsembleStats ensemble_run(const TimeGrid& grid, Realize&& realize, std::uint64_t master_seed, std::size_t m,
                           const EnsembleOptions& opt = {})
{
    if (m < 1) throw InvalidArgument("invalid-realizations", "ensemble size must be >= 1");
    std::vector<std::vector<double>> paths(m);
    parallel_for(m, opt.threads, [&](std::size_t r) {
        try {
            Trajectory tr = realize(r, derive_seed(master_seed, r));
            if (!(tr.grid == grid)) throw InvalidArgument("grid-mismatch", "trajectory grid differs from ensemble grid");
            paths[r] = std::move(tr.x);
        } catch (const NumericalError& e) {
            throw NumericalError(e.code(), "realization " + std::to_string(r) + ": " + e.what(), r);
        }
    });
    return aggregate(grid, std::move(paths), opt.histogram_bins, opt.keep_paths);
}

/// Mean of x^2 over grid points [start, n) of every path, pooled over the
/// ensemble. Used as the stationary second moment of a relaxed process.
inline double tail_second_moment(const std::vector<std::vector<double>>& paths, std::size_t start)
{
    CompensatedSum acc;
    std::size_t count = 0;
    for (const auto& p : paths)
        for (std::size_t i = start; i < p.size(); ++i) {
            acc.add(p[i] * p[i]);
            ++count;
        }
    if (count == 0) throw InvalidArgument("empty-tail", "tail window is empty");
    return acc.value() / static_cast<double>(count);
}

struct SpectrumEstimate {
    std::vector<double> k;
    std::vector<double> power;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Least-squares fit of log(power) against log(k).
inline SpectrumEstimate estimate_spectrum(std::vector<std::pair<double, double>> samples)
{
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].first > 0.0) || !(samples[i].second > 0.0)) {
            throw InvalidArgument("invalid-spectrum", "k values and powers must be positive");
        }
        if (i > 0 && samples[i].first == samples[i - 1].first) {
            throw InvalidArgument("invalid-spectrum", "k values must be distinct");
        }
    }
    if (samples.size() < 4 || samples.back().first < 10.0 * samples.front().first) {
        throw InvalidArgument("insufficient-k-range", "need >= 4 distinct k values spanning >= 1 decade");
    }

    SpectrumEstimate est;
    const auto n = static_cast<double>(samples.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [k, p] : samples) {
        est.k.push_back(k);
        est.power.push_back(p);
        mx += std::log(k);
        my += std::log(p);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [k, p] : samples) {
        const double dx = std::log(k) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p) - my);
    }
    est.slope = sxy / sxx;
    est.intercept = my - est.slope * mx;
    double ssr = 0.0;
    for (const auto& [k, p] : samples) {
        const double r = std::log(p) - (est.intercept + est.slope * std::log(k));
        ssr += r * r;
    }
    est.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
    return est;
}

} // namespace qcl

#endif
