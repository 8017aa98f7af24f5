#ifndef QCL_NOISE_HPP
#define QCL_NOISE_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "kernel_matrix.hpp"

namespace qcl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double default_clip_tol = 1e-10;

/// M realizations of a Gaussian process on a grid, one per row. Row r is
/// generated from derive_seed(seed, r) alone.
struct NoiseEnsemble {
    TimeGrid grid;
    RowMatrix realizations;
    std::uint64_t seed;
    std::string covariance_ref;

    std::size_t size() const noexcept { return static_cast<std::size_t>(realizations.rows()); }

    std::span<const double> realization(std::size_t r) const
    {
        return {realizations.data() + r * grid.size(), grid.size()};
    }

    Eigen::VectorXd sample_mean() const { return realizations.colwise().mean().transpose(); }

    /// Covariance about the known zero mean, (1/M) sum_r xi_r xi_r^T.
    Eigen::MatrixXd sample_covariance() const
    {
        return (realizations.transpose() * realizations) / static_cast<double>(realizations.rows());
    }
};

inline std::vector<double> standard_normals(std::uint64_t seed, std::size_t n)
{
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(n);
    for (auto& x : z) x = normal(engine);
    return z;
}

/// Discretized delta-correlated noise: <xi(t) xi(t')> = sigma2 delta(t - t')
/// becomes i.i.d. entries of variance sigma2/dt.
inline NoiseEnsemble sample_white(double sigma2, const TimeGrid& grid, std::uint64_t seed, std::size_t m,
                                  std::size_t threads = 1)
{
    if (!(sigma2 > 0.0)) throw InvalidArgument("non-positive-intensity", "noise intensity must be positive");
    if (m < 1) throw InvalidArgument("invalid-realizations", "ensemble size must be >= 1");
    const std::size_t n = grid.size();
    const double scale = std::sqrt(sigma2 / grid.dt());
    NoiseEnsemble e{grid, RowMatrix(m, n), seed, "white(sigma2=" + std::to_string(sigma2) + ")"};
    parallel_for(m, threads, [&](std::size_t r) {
        const auto z = standard_normals(derive_seed(seed, r), n);
        for (std::size_t i = 0; i < n; ++i) e.realizations(r, i) = scale * z[i];
    });
    return e;
}

/// Factor K = L L^T from the symmetric eigen-decomposition, keeping only
/// eigenvalues >= clip_tol * lambda_max. Eigenvalues below -clip_tol *
/// lambda_max are reported as an error rather than clipped.
class ColoredNoiseSampler {
public:
    ColoredNoiseSampler(const KernelMatrix& k, double clip_tol = default_clip_tol)
        : grid_(k.grid())
    {
        require_kind(k, KernelKind::symmetric, "non-symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values());
        if (es.info() != Eigen::Success) throw NumericalError("eigen-failure", "eigen-decomposition did not converge");
        const Eigen::VectorXd& ev = es.eigenvalues();
        const double lmax = ev.maxCoeff();
        if (!(lmax > 0.0)) throw NumericalError("non-psd", "kernel has no positive eigenvalue");
        if (ev.minCoeff() < -clip_tol * lmax) {
            throw NumericalError("non-psd", "kernel has an eigenvalue " + std::to_string(ev.minCoeff() / lmax) +
                                                " x lambda_max, beyond the clip tolerance");
        }
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev(i) >= clip_tol * lmax) keep.push_back(i);
        clipped_ = static_cast<int>(ev.size()) - static_cast<int>(keep.size());

        factor_.resize(ev.size(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t c = 0; c < keep.size(); ++c) {
            factor_.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& factor() const noexcept { return factor_; }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(factor_.cols()); }
    int clipped() const noexcept { return clipped_; }

    /// The covariance actually sampled, L L^T.
    Eigen::MatrixXd projected() const { return factor_ * factor_.transpose(); }

    Eigen::VectorXd draw(std::uint64_t seed) const
    {
        const auto z = standard_normals(seed, rank());
        return factor_ * Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    }

private:
    TimeGrid grid_;
    Eigen::MatrixXd factor_;
    int clipped_ = 0;
};

inline NoiseEnsemble sample_colored(const KernelMatrix& k, std::uint64_t seed, std::size_t m,
                                    double clip_tol = default_clip_tol, std::size_t threads = 1)
{
    if (m < 1) throw InvalidArgument("invalid-realizations", "ensemble size must be >= 1");
    const ColoredNoiseSampler sampler(k, clip_tol);
    const std::size_t n = k.size();
    NoiseEnsemble e{k.grid(), RowMatrix(m, n), seed,
                    "colored(rank=" + std::to_string(sampler.rank()) + ",clipped=" + std::to_string(sampler.clipped()) + ")"};
    parallel_for(m, threads, [&](std::size_t r) { e.realizations.row(r) = sampler.draw(derive_seed(seed, r)).transpose(); });
    return e;
}

struct HsMoment {
    std::complex<double> mc_estimate;
    double analytic;
};

/// Characteristic-function check of the Gaussian factorization:
/// E[exp(i xi.v)] over colored noise with covariance K against exp(-v^T K v / 2).
inline HsMoment hs_moment_check(const KernelMatrix& k, std::span<const double> v, std::size_t m, std::uint64_t seed,
                                double clip_tol = default_clip_tol, std::size_t threads = 1)
{
    if (v.size() != k.size()) throw InvalidArgument("grid-mismatch", "probe vector does not match the kernel");
    const Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(v.size()));
    const double quad = vv.dot(k.values() * vv);
    if (vv.isZero(0.0)) return {{1.0, 0.0}, 1.0};

    const ColoredNoiseSampler sampler(k, clip_tol);
    std::vector<double> phase(m);
    parallel_for(m, threads, [&](std::size_t r) { phase[r] = sampler.draw(derive_seed(seed, r)).dot(vv); });
    CompensatedSum re, im;
    for (double p : phase) {
        re.add(std::cos(p));
        im.add(std::sin(p));
    }
    const double inv = 1.0 / static_cast<double>(m);
    return {{re.value() * inv, im.value() * inv}, std::exp(-0.5 * quad)};
}

} // namespace qcl

#endif
