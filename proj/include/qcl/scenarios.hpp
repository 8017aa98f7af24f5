#ifndef QCL_SCENARIOS_HPP
#define QCL_SCENARIOS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "kernels.hpp"
#include "langevin.hpp"
#include "noise.hpp"

namespace qcl {

enum class NoiseKernelChoice { hadamard, composed, white };

inline const char* to_string(NoiseKernelChoice c) noexcept
{
    switch (c) {
    case NoiseKernelChoice::hadamard: return "hadamard";
    case NoiseKernelChoice::composed: return "composed";
    case NoiseKernelChoice::white: return "white";
    }
    return "unknown";
}

/// Noise driving the unstable stage. The colored kernels are those of the
/// inverted oscillator with omega = sqrt(-m2) and unit mass, sampled on the
/// first `window` time units of the run; `amplitude` scales each realization
/// (amplitude 0 switches the noise off).
struct ScenarioNoise {
    NoiseKernelChoice kernel = NoiseKernelChoice::hadamard;
    double amplitude = 0.1;
    double window = 10.0;
    double hbar = 1.0;
    double clip_tol = default_clip_tol;
};

/// Common parameters of the symmetry-breaking scenarios.
struct OrderParameterConfig {
    double m2 = -1.0;
    double lambda = 0.6;
    double gamma = 0.5;
    ScenarioNoise noise;
    bool gate = true;
    /// |phi|^2 above which the fluctuation term is latched off; defaults to
    /// -2 m2 / lambda when unset.
    std::optional<double> gate_threshold;
    /// Adds the retarded memory term 2 G_R (1 + lambda^2 G_C^2) during the
    /// unstable stage.
    bool memory = false;
    TimeGrid grid{0.0, 40.0, 4001};
    std::size_t realizations = 400;
    std::uint64_t master_seed = 42;
    std::size_t threads = 1;

    double threshold() const { return gate_threshold.value_or(-2.0 * m2 / lambda); }
    /// Radial minimum of V: |phi|^2 = -6 m2 / lambda.
    double minimum() const { return std::sqrt(-6.0 * m2 / lambda); }

    void validate() const
    {
        if (!(m2 < 0.0)) throw InvalidArgument("schema", "m2 must be negative");
        if (!(lambda > 0.0)) throw InvalidArgument("schema", "lambda must be positive");
        if (!(gamma >= 0.0)) throw InvalidArgument("schema", "gamma must be non-negative");
        if (!(noise.amplitude >= 0.0)) throw InvalidArgument("schema", "noise amplitude must be non-negative");
        if (!(noise.window > 0.0)) throw InvalidArgument("schema", "noise window must be positive");
        if (!(noise.hbar > 0.0)) throw InvalidArgument("schema", "hbar must be positive");
        if (!(noise.clip_tol > 0.0)) throw InvalidArgument("schema", "clip_tol must be positive");
        if (gate_threshold && !(*gate_threshold > 0.0)) throw InvalidArgument("schema", "gate_threshold must be positive");
        if (realizations < 1) throw InvalidArgument("schema", "realizations must be >= 1");
        const double span = grid.t_end() - grid.t_start();
        if (-m2 * span * span < 25.0) {
            throw InvalidArgument("schema", "run too short: |m2| T^2 must be >> 1 (>= 25)");
        }
    }
};

struct SSBConfig : OrderParameterConfig {
    double return_radius = 0.1;
    std::size_t histogram_bins = 40;
};

struct BECConfig : OrderParameterConfig {
    BECConfig() { realizations = 500; }
};

/// Latched noise gate: open until |phi|^2 first exceeds the threshold, then
/// closed for the rest of the realization.
class GateLatch {
public:
    GateLatch(double threshold, bool enabled = true) : threshold_(threshold), enabled_(enabled) {}

    bool update(double modulus_sq, std::size_t index)
    {
        if (enabled_ && open_ && modulus_sq > threshold_) {
            open_ = false;
            closed_at_ = index;
        }
        return open_;
    }

    bool open() const noexcept { return open_; }
    std::optional<std::size_t> closed_at() const noexcept { return closed_at_; }

private:
    double threshold_;
    bool enabled_;
    bool open_ = true;
    std::optional<std::size_t> closed_at_;
};

/// Noise and memory sources of the unstable stage, shared read-only by all
/// realizations of a scenario run.
class UnstableStage {
public:
    explicit UnstableStage(const OrderParameterConfig& cfg)
        : window_points_(window_points(cfg)), amplitude_(cfg.noise.amplitude), kind_(cfg.noise.kernel),
          dt_(cfg.grid.dt())
    {
        const TimeGrid window = cfg.grid.prefix(window_points_);
        SqueezeParams osc{1.0, std::sqrt(-cfg.m2), -std::numbers::pi / 4.0, cfg.noise.hbar};
        const bool need_hadamard = (amplitude_ > 0.0 && kind_ != NoiseKernelChoice::white) || cfg.memory;
        std::optional<KernelMatrix> gc;
        if (need_hadamard) gc = build_hadamard(osc, window);
        if (amplitude_ > 0.0 && kind_ != NoiseKernelChoice::white) {
            const KernelMatrix k = kind_ == NoiseKernelChoice::hadamard ? *gc : fluctuation_kernel(cfg.lambda, *gc);
            sampler_ = std::make_unique<ColoredNoiseSampler>(k, cfg.noise.clip_tol);
        }
        if (cfg.memory) memory_ = memory_kernel(cfg.lambda, build_retarded(osc, window), *gc);
    }

    std::size_t window_points() const noexcept { return window_points_; }
    const ColoredNoiseSampler* sampler() const noexcept { return sampler_.get(); }
    const std::optional<KernelMatrix>& memory() const noexcept { return memory_; }

    /// One noise realization on the window, scaled by the amplitude.
    std::vector<double> draw(std::uint64_t seed) const
    {
        std::vector<double> xi(window_points_, 0.0);
        if (amplitude_ == 0.0) return xi;
        if (kind_ == NoiseKernelChoice::white) {
            const auto z = standard_normals(seed, window_points_);
            const double s = amplitude_ / std::sqrt(dt_);
            for (std::size_t i = 0; i < window_points_; ++i) xi[i] = s * z[i];
        } else {
            const Eigen::VectorXd d = sampler_->draw(seed);
            for (std::size_t i = 0; i < window_points_; ++i) xi[i] = amplitude_ * d(static_cast<Eigen::Index>(i));
        }
        return xi;
    }

    /// Trapezoidal memory integral at step i over history x[0..i].
    double memory_term(std::size_t i, std::span<const double> x) const
    {
        if (!memory_ || i >= window_points_) return 0.0;
        double mem = 0.0;
        for (std::size_t j = 0; j <= i; ++j) mem += trapezoid_weight(j, i, dt_) * (*memory_)(i, j) * x[j];
        return mem;
    }

private:
    static std::size_t window_points(const OrderParameterConfig& cfg)
    {
        const auto n = static_cast<std::size_t>(std::floor(cfg.noise.window / cfg.grid.dt() + 0.5)) + 1;
        return std::clamp<std::size_t>(n, 2, cfg.grid.size());
    }

    std::size_t window_points_;
    double amplitude_;
    NoiseKernelChoice kind_;
    double dt_;
    std::unique_ptr<ColoredNoiseSampler> sampler_;
    std::optional<KernelMatrix> memory_;
};

/// Fraction of paths that, after first leaving |x| > leave_radius, later come
/// back inside |x| < return_radius. Paths that never leave count as not
/// returning.
inline double recursion_probability(const EnsembleStats& stats, double leave_radius, double return_radius)
{
    if (!(return_radius > 0.0) || !(leave_radius > return_radius)) {
        throw InvalidArgument("invalid-radii", "require leave_radius > return_radius > 0");
    }
    if (stats.paths.empty()) throw InvalidArgument("missing-paths", "ensemble statistics carry no paths");
    std::size_t returned = 0;
    for (const auto& p : stats.paths) {
        bool left = false;
        for (double x : p) {
            if (!left) {
                left = std::abs(x) > leave_radius;
            } else if (std::abs(x) < return_radius) {
                ++returned;
                break;
            }
        }
    }
    return static_cast<double>(returned) / static_cast<double>(stats.paths.size());
}

struct SSBReport {
    EnsembleStats stats;
    std::vector<int> final_sign;   // +1, -1, or 0 when not settled
    std::vector<std::optional<std::size_t>> gate_closed_at;
    double plus_fraction = 0.0;
    double minus_fraction = 0.0;
    std::size_t unsettled = 0;
    double expected_minimum = 0.0;
    double mean_abs_final = 0.0;
    double mean_abs_final_stderr = 0.0;
    double max_rel_final_deviation = 0.0;
    double leave_radius = 0.0;
    double return_radius = 0.0;
    double recursion = 0.0;
    std::size_t noise_rank = 0;
};

inline SSBReport run_ssb(const SSBConfig& cfg)
{
    cfg.validate();
    const UnstableStage stage(cfg);
    const auto pot = PotentialSpec::double_well(cfg.m2, cfg.lambda);
    const TimeGrid& grid = cfg.grid;
    const std::size_t n = grid.size();
    const double dt = grid.dt();
    std::vector<std::optional<std::size_t>> closed(cfg.realizations);

    auto realize = [&](std::size_t r, std::uint64_t seed) {
        const auto xi = stage.draw(seed);
        Trajectory tr{grid, std::vector<double>(n), std::vector<double>(n)};
        GateLatch gate(cfg.threshold(), cfg.gate);
        double x = 0.0, v = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const bool open = gate.update(x * x, i);
            double accel = pot.force(x);
            if (open && i < stage.window_points()) {
                accel -= stage.memory_term(i, tr.x) + xi[i];
            }
            detail::semi_implicit_step(x, v, accel, cfg.gamma, dt);
            detail::guard_finite(x, grid[i + 1]);
            tr.x[i + 1] = x;
            tr.xdot[i + 1] = v;
        }
        closed[r] = gate.closed_at();
        return tr;
    };

    EnsembleOptions opt{cfg.threads, cfg.histogram_bins, true};
    SSBReport rep;
    rep.stats = ensemble_run(grid, realize, cfg.master_seed, cfg.realizations, opt);
    rep.gate_closed_at = std::move(closed);
    rep.noise_rank = stage.sampler() ? stage.sampler()->rank() : 0;
    rep.expected_minimum = cfg.minimum();
    rep.leave_radius = 0.5 * rep.expected_minimum;
    rep.return_radius = cfg.return_radius;

    const std::size_t m = cfg.realizations;
    std::size_t plus = 0, minus = 0;
    CompensatedSum abs_sum;
    rep.final_sign.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double xf = rep.stats.per_run_finals[r];
        abs_sum.add(std::abs(xf));
        if (std::abs(xf) > rep.leave_radius) {
            rep.final_sign[r] = xf > 0 ? 1 : -1;
            (xf > 0 ? plus : minus) += 1;
            rep.max_rel_final_deviation =
                std::max(rep.max_rel_final_deviation, std::abs(std::abs(xf) - rep.expected_minimum) / rep.expected_minimum);
        } else {
            rep.final_sign[r] = 0;
            ++rep.unsettled;
        }
    }
    rep.plus_fraction = static_cast<double>(plus) / static_cast<double>(m);
    rep.minus_fraction = static_cast<double>(minus) / static_cast<double>(m);
    rep.mean_abs_final = abs_sum.value() / static_cast<double>(m);
    CompensatedSum dev;
    for (double xf : rep.stats.per_run_finals) dev.add((std::abs(xf) - rep.mean_abs_final) * (std::abs(xf) - rep.mean_abs_final));
    rep.mean_abs_final_stderr = m > 1 ? std::sqrt(dev.value() / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
    if (rep.leave_radius > rep.return_radius) {
        rep.recursion = recursion_probability(rep.stats, rep.leave_radius, rep.return_radius);
    }
    return rep;
}

/// Kuiper's V statistic of angles in [0, 2 pi) against the uniform law, with
/// Stephens' finite-sample modification V (sqrt(n) + 0.155 + 0.24/sqrt(n)).
inline double kuiper_statistic(std::span<const double> angles)
{
    std::vector<double> u;
    u.reserve(angles.size());
    for (double a : angles) u.push_back(a / (2.0 * std::numbers::pi));
    std::sort(u.begin(), u.end());
    const auto n = static_cast<double>(u.size());
    double d_plus = 0.0, d_minus = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d_plus = std::max(d_plus, static_cast<double>(i + 1) / n - u[i]);
        d_minus = std::max(d_minus, u[i] - static_cast<double>(i) / n);
    }
    const double sn = std::sqrt(n);
    return (d_plus + d_minus) * (sn + 0.155 + 0.24 / sn);
}

/// Asymptotic tail probability of the modified Kuiper statistic,
/// Q(v) = 2 sum_j (4 j^2 v^2 - 1) exp(-2 j^2 v^2).
inline double kuiper_pvalue(double v)
{
    if (v < 0.4) return 1.0;
    double q = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double jj = static_cast<double>(j * j);
        const double term = (4.0 * jj * v * v - 1.0) * std::exp(-2.0 * jj * v * v);
        q += term;
        if (std::abs(term) < 1e-16 * std::abs(q)) break;
    }
    return std::clamp(2.0 * q, 0.0, 1.0);
}

/// Upper 1% point of the modified Kuiper statistic (Stephens' table).
inline constexpr double kuiper_critical_1pct = 2.001;

struct BECReport {
    EnsembleStats real_part;
    EnsembleStats imag_part;
    std::vector<double> mean_modulus_sq;
    std::vector<double> final_modulus;
    std::vector<double> final_phase;
    std::vector<std::optional<std::size_t>> gate_closed_at;
    double expected_modulus = 0.0;
    double kuiper = 0.0;
    double kuiper_p = 0.0;
    double rayleigh_z = 0.0;
    double mean_rel_modulus_deviation = 0.0;
    double max_rel_modulus_deviation = 0.0;
    /// Fraction of runs with |phi_final|^2 / (-6 m2 / lambda) in [0.9, 1.1].
    double condensate_fraction = 0.0;
    std::size_t noise_rank = 0;
};

inline BECReport run_bec(const BECConfig& cfg)
{
    cfg.validate();
    const UnstableStage stage(cfg);
    const TimeGrid& grid = cfg.grid;
    const std::size_t n = grid.size();
    const std::size_t m = cfg.realizations;
    const double dt = grid.dt();

    std::vector<std::vector<double>> re_paths(m), im_paths(m), mod_paths(m);
    std::vector<std::optional<std::size_t>> closed(m);
    parallel_for(m, cfg.threads, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(cfg.master_seed, r);
        const auto xi_re = stage.draw(derive_seed(seed, 0));
        const auto xi_im = stage.draw(derive_seed(seed, 1));
        std::vector<double> re(n, 0.0), im(n, 0.0), mod(n, 0.0);
        GateLatch gate(cfg.threshold(), cfg.gate);
        double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
        try {
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double rho2 = x * x + y * y;
                const bool open = gate.update(rho2, i);
                // -dV/dphi for V = m2 |phi|^2 / 2 + lambda |phi|^4 / 4!
                const double radial = -(cfg.m2 + (cfg.lambda / 6.0) * rho2);
                double ax = radial * x, ay = radial * y;
                if (open && i < stage.window_points()) {
                    ax -= stage.memory_term(i, re) + xi_re[i];
                    ay -= stage.memory_term(i, im) + xi_im[i];
                }
                detail::semi_implicit_step(x, vx, ax, cfg.gamma, dt);
                detail::semi_implicit_step(y, vy, ay, cfg.gamma, dt);
                detail::guard_finite(std::hypot(x, y), grid[i + 1]);
                re[i + 1] = x;
                im[i + 1] = y;
                mod[i + 1] = x * x + y * y;
            }
        } catch (const NumericalError& e) {
            throw NumericalError(e.code(), "realization " + std::to_string(r) + ": " + e.what(), r);
        }
        closed[r] = gate.closed_at();
        re_paths[r] = std::move(re);
        im_paths[r] = std::move(im);
        mod_paths[r] = std::move(mod);
    });

    BECReport rep;
    rep.real_part = aggregate(grid, re_paths, 40, false);
    rep.imag_part = aggregate(grid, im_paths, 40, false);
    rep.mean_modulus_sq = aggregate(grid, std::move(mod_paths), 40, false).mean;
    rep.gate_closed_at = std::move(closed);
    rep.noise_rank = stage.sampler() ? stage.sampler()->rank() : 0;
    rep.expected_modulus = cfg.minimum();
    rep.final_modulus.resize(m);
    rep.final_phase.resize(m);
    std::size_t in_band = 0;
    CompensatedSum dev, c, s;
    for (std::size_t r = 0; r < m; ++r) {
        const double x = re_paths[r].back(), y = im_paths[r].back();
        rep.final_modulus[r] = std::hypot(x, y);
        double ph = std::atan2(y, x);
        if (ph < 0.0) ph += 2.0 * std::numbers::pi;
        rep.final_phase[r] = ph;
        const double rel = std::abs(rep.final_modulus[r] - rep.expected_modulus) / rep.expected_modulus;
        dev.add(rel);
        rep.max_rel_modulus_deviation = std::max(rep.max_rel_modulus_deviation, rel);
        const double odlro = rep.final_modulus[r] * rep.final_modulus[r] / (rep.expected_modulus * rep.expected_modulus);
        if (odlro >= 0.9 && odlro <= 1.1) ++in_band;
        c.add(std::cos(ph));
        s.add(std::sin(ph));
    }
    const auto md = static_cast<double>(m);
    rep.mean_rel_modulus_deviation = dev.value() / md;
    rep.condensate_fraction = static_cast<double>(in_band) / md;
    const double rbar2 = (c.value() * c.value() + s.value() * s.value()) / (md * md);
    rep.rayleigh_z = md * rbar2;
    rep.kuiper = kuiper_statistic(rep.final_phase);
    rep.kuiper_p = kuiper_pvalue(rep.kuiper);
    return rep;
}

struct InflationConfig {
    double hubble = 1.0;
    double lambda = 0.6;
    double phi0 = 1.0;
    double k_min = 1.0;
    double k_max = 31.622776601683793;  // 1.5 decades above k_min
    std::size_t n_modes = 10;
    TimeGrid grid{0.0, 1000.0, 10001};
    std::size_t realizations = 100;
    std::uint64_t master_seed = 42;
    std::size_t threads = 1;
    /// Tail window starts after this many relaxation times 1/a.
    double burn_in_relaxations = 5.0;

    void validate() const
    {
        DeSitterParams{hubble, k_min, lambda, phi0}.validate();
        if (!(lambda > 0.0)) throw InvalidArgument("schema", "lambda must be positive");
        if (!(k_max > k_min)) throw InvalidArgument("schema", "k_max must exceed k_min");
        if (n_modes < 2) throw InvalidArgument("schema", "n_modes must be >= 2");
        if (realizations < 1) throw InvalidArgument("schema", "realizations must be >= 1");
        if (!(burn_in_relaxations > 0.0)) throw InvalidArgument("schema", "burn_in_relaxations must be positive");
    }

    /// Log-spaced modes from k_min to k_max.
    std::vector<DeSitterParams> modes() const
    {
        std::vector<DeSitterParams> out;
        for (std::size_t i = 0; i < n_modes; ++i) {
            const double f = static_cast<double>(i) / static_cast<double>(n_modes - 1);
            out.push_back({hubble, k_min * std::pow(k_max / k_min, f), lambda, phi0});
        }
        return out;
    }
};

struct InflationReport {
    SpectrumEstimate spectrum;
    double relaxation_rate = 0.0;
    double burn_in_time = 0.0;
    /// Superhorizon noise intensity H^2/k^3 per mode.
    std::vector<double> noise_intensity;
    /// Continuum OU prediction a * intensity / 2 per mode.
    std::vector<double> predicted_variance;
};

/// Overdamped de Sitter modes driven by white noise whose intensity is the
/// superhorizon limit of the mode kernel; stationary variances are pooled over
/// the ensemble and the post-burn-in tail, then fitted in log-log.
inline InflationReport run_inflation(const std::vector<DeSitterParams>& modes, const TimeGrid& grid, std::size_t m,
                                     std::uint64_t master_seed, std::size_t threads = 1,
                                     double burn_in_relaxations = 5.0)
{
    if (modes.size() < 8) throw InvalidArgument("insufficient-k-range", "need at least 8 modes");
    double kmin = modes.front().k, kmax = modes.front().k;
    for (const auto& dp : modes) {
        dp.validate();
        if (dp.hubble != modes.front().hubble || dp.lambda != modes.front().lambda || dp.phi0 != modes.front().phi0) {
            throw InvalidArgument("invalid-modes", "modes must share H, lambda and phi0");
        }
        kmin = std::min(kmin, dp.k);
        kmax = std::max(kmax, dp.k);
    }
    if (kmax < 10.0 * kmin) throw InvalidArgument("insufficient-k-range", "modes must span at least one decade in k");
    if (m < 1) throw InvalidArgument("invalid-realizations", "ensemble size must be >= 1");

    InflationReport rep;
    rep.relaxation_rate = overdamped_rate(modes.front());
    if (!(rep.relaxation_rate > 0.0)) throw InvalidArgument("non-positive-rate", "relaxation rate must be positive");
    rep.burn_in_time = burn_in_relaxations / rep.relaxation_rate;
    const double span = grid.t_end() - grid.t_start();
    if (rep.burn_in_time >= 0.5 * span) {
        throw NumericalError("non-stationary", "relaxation time " + std::to_string(1.0 / rep.relaxation_rate) +
                                                   " too long for run length " + std::to_string(span));
    }
    const auto burn = static_cast<std::size_t>(std::ceil(rep.burn_in_time / grid.dt()));
    const double inv_sqrt_dt = 1.0 / std::sqrt(grid.dt());

    std::vector<std::pair<double, double>> samples;
    for (std::size_t mode = 0; mode < modes.size(); ++mode) {
        const DeSitterParams& dp = modes[mode];
        const double intensity = desitter_hadamard(dp, 0.0, 0.0);
        const double amp = std::sqrt(intensity);
        auto realize = [&](std::size_t, std::uint64_t seed) {
            auto xi = standard_normals(seed, grid.size());
            for (double& z : xi) z *= inv_sqrt_dt;
            return integrate_overdamped_mode(dp, amp, grid, xi, 0.0);
        };
        const auto stats = ensemble_run(grid, realize, derive_seed(master_seed, mode), m, {threads, 40, true});
        samples.emplace_back(dp.k, tail_second_moment(stats.paths, burn));
        rep.noise_intensity.push_back(intensity);
        rep.predicted_variance.push_back(0.5 * rep.relaxation_rate * intensity);
    }
    rep.spectrum = estimate_spectrum(samples);
    return rep;
}

inline InflationReport run_inflation(const InflationConfig& cfg)
{
    cfg.validate();
    return run_inflation(cfg.modes(), cfg.grid, cfg.realizations, cfg.master_seed, cfg.threads,
                         cfg.burn_in_relaxations);
}

} // namespace qcl

#endif
