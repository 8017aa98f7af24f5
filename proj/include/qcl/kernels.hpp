#ifndef QCL_KERNELS_HPP
#define QCL_KERNELS_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "core.hpp"
#include "kernel_matrix.hpp"
#include "squeeze.hpp"

namespace qcl {

/// <x(t) x(t')> of a single mode.
using TwoPointFunction = std::function<complex(double, double)>;

/// Closed-time-path propagator blocks on a grid:
///   G_F     = <T x(t_i) x(t_j)>      (++ block)
///   G_plus  = <x(t_j) x(t_i)>        (+- block)
///   G_minus = <x(t_i) x(t_j)>        (-+ block)
///   G_Fbar  = <Tbar x(t_i) x(t_j)>   (-- block)
struct ContourMatrix {
    TimeGrid grid;
    Eigen::MatrixXcd g_f;
    Eigen::MatrixXcd g_plus;
    Eigen::MatrixXcd g_minus;
    Eigen::MatrixXcd g_fbar;

    /// max |G_F + G_Fbar - G_plus - G_minus|.
    double ordering_residual() const
    {
        return ((g_f + g_fbar) - (g_plus + g_minus)).cwiseAbs().maxCoeff();
    }

    /// max |G_plus - G_minus^T|.
    double transpose_residual() const
    {
        return (g_plus - g_minus.transpose()).cwiseAbs().maxCoeff();
    }
};

/// Kernels exposed by the Keldysh rotation, in the real convention: G_R and
/// G_A hold the coefficient of i of the commutator, G_C the anticommutator.
struct KeldyshKernels {
    KernelMatrix retarded;
    KernelMatrix advanced;
    KernelMatrix hadamard;
    double zero_block_residual;
};

struct DeSitterParams {
    double hubble = 1.0;
    double k = 1.0;
    double lambda = 0.0;
    double phi0 = 1.0;

    void validate() const
    {
        if (!(hubble > 0.0)) throw InvalidArgument("invalid-params", "Hubble rate must be positive");
        if (!(k > 0.0)) throw InvalidArgument("invalid-params", "wavenumber must be positive");
        if (!(lambda >= 0.0)) throw InvalidArgument("invalid-params", "lambda must be non-negative");
        if (!std::isfinite(phi0)) throw InvalidArgument("invalid-params", "phi0 must be finite");
    }
};

struct PsdProjection {
    KernelMatrix kernel;
    int clipped;
};

inline TwoPointFunction stable_oscillator_two_point(double mass, double frequency, double hbar)
{
    const double amp = hbar / (2.0 * mass * frequency);
    return [amp, frequency](double t, double tp) { return amp * std::polar(1.0, -frequency * (t - tp)); };
}

/// Two-point function of the squeezed inverted oscillator assembled from its
/// symmetric and commutator parts: <x x'> = (G_C + i G_comm)/2.
inline TwoPointFunction inverted_oscillator_two_point(const SqueezeParams& p)
{
    p.validate();
    return [p](double t, double tp) {
        return 0.5 * complex(hadamard_green(p, t, tp), commutator_green(p, t, tp));
    };
}

inline KernelMatrix build_retarded(const SqueezeParams& p, const TimeGrid& grid)
{
    p.validate();
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            v(i, j) = commutator_green(p, grid[i], grid[j]);
    return KernelMatrix(grid, std::move(v), KernelKind::retarded);
}

inline KernelMatrix build_hadamard(const SqueezeParams& p, const TimeGrid& grid)
{
    p.validate();
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd v(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) {
            v(i, j) = hadamard_green(p, grid[i], grid[j]);
            v(j, i) = v(i, j);
        }
    return KernelMatrix(grid, std::move(v), KernelKind::symmetric);
}

inline ContourMatrix build_contour_matrix(const TwoPointFunction& mode_two_point, const TimeGrid& grid)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXcd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            w(i, j) = mode_two_point(grid[i], grid[j]);

    ContourMatrix cm{grid, Eigen::MatrixXcd(n, n), w.transpose(), w, Eigen::MatrixXcd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            // equal times: both orderings coincide with W(t, t)
            const bool later = i >= j;
            cm.g_f(i, j) = later ? w(i, j) : w(j, i);
            cm.g_fbar(i, j) = later ? w(j, i) : w(i, j);
        }
    return cm;
}

/// Rotates (+,-) sources to (Delta, C) with J_pm = J_C +- J_Delta/2 and the
/// contour sign on the backward branch. The rotated blocks are
///   Delta-Delta : G_C / 2
///   Delta-C     : theta(t - t') <[x(t), x(t')]>
///   C-Delta     : theta(t' - t) <[x(t'), x(t)]>
///   C-C         : G_F + G_Fbar - G_plus - G_minus  (must vanish)
/// Each block is evaluated in closed form so that Delta-C and C-Delta are
/// exact transposes whenever the input satisfies its own invariants.
inline KeldyshKernels keldysh_rotate(const ContourMatrix& cm)
{
    const auto n = static_cast<Eigen::Index>(cm.grid.size());
    const double ord = cm.ordering_residual();
    const double tr = cm.transpose_residual();
    const double scale = std::max(1.0, cm.g_minus.cwiseAbs().maxCoeff());
    if (ord > 1e-10 * scale || tr > 1e-10 * scale) {
        throw InvalidArgument("invalid-contour", "contour matrix violates its ordering invariants");
    }

    Eigen::MatrixXd gr(n, n), ga(n, n), gc(n, n);
    double zero_block = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const complex ordered = cm.g_f(i, j) - cm.g_fbar(i, j);
            const complex delta_c = 0.5 * (ordered + (cm.g_minus(i, j) - cm.g_plus(i, j)));
            const complex c_delta = 0.5 * (ordered + (cm.g_plus(i, j) - cm.g_minus(i, j)));
            const complex sym = 0.5 * ((cm.g_f(i, j) + cm.g_fbar(i, j)) + (cm.g_plus(i, j) + cm.g_minus(i, j)));
            const complex cc = (cm.g_f(i, j) + cm.g_fbar(i, j)) - (cm.g_plus(i, j) + cm.g_minus(i, j));
            gr(i, j) = delta_c.imag();
            ga(i, j) = c_delta.imag();
            gc(i, j) = sym.real();
            zero_block = std::max(zero_block, std::abs(cc));
        }
    return {KernelMatrix(cm.grid, std::move(gr), KernelKind::retarded),
            KernelMatrix(cm.grid, std::move(ga), KernelKind::advanced),
            KernelMatrix(cm.grid, std::move(gc), KernelKind::symmetric), zero_block};
}

inline KernelMatrix elementwise_power(const KernelMatrix& k, int p)
{
    require_kind(k, KernelKind::symmetric, "non-symmetric");
    if (p < 1) throw InvalidArgument("invalid-power", "power must be >= 1");
    Eigen::MatrixXd v = k.values();
    for (int q = 1; q < p; ++q) v = v.cwiseProduct(k.values());
    return KernelMatrix(k.grid(), std::move(v), KernelKind::symmetric);
}

/// lambda^2 (G_C + G_C∘2 + G_C∘3), ∘ the elementwise power.
inline KernelMatrix fluctuation_kernel(double lambda, const KernelMatrix& gc)
{
    require_kind(gc, KernelKind::symmetric, "non-symmetric");
    const Eigen::ArrayXXd g = gc.values().array();
    Eigen::MatrixXd v = (lambda * lambda) * (g + g * g + g * g * g).matrix();
    return KernelMatrix(gc.grid(), std::move(v), KernelKind::symmetric);
}

/// M(t, t') = 2 G_R(t, t') (1 + lambda^2 G_C(t, t')^2).
inline KernelMatrix memory_kernel(double lambda, const KernelMatrix& gr, const KernelMatrix& gc)
{
    require_kind(gr, KernelKind::retarded, "kernel-not-retarded");
    require_kind(gc, KernelKind::symmetric, "non-symmetric");
    if (!(gr.grid() == gc.grid())) throw InvalidArgument("grid-mismatch", "G_R and G_C live on different grids");
    const Eigen::ArrayXXd c = gc.values().array();
    Eigen::MatrixXd v = (2.0 * gr.values().array() * (1.0 + lambda * lambda * c * c)).matrix();
    return KernelMatrix(gr.grid(), std::move(v), KernelKind::retarded);
}

/// Mode kernel in conformal time (eta, eta' < 0), evaluated exactly as
/// (H^2/k^3)((1 + k^2 eta eta') cos(k eta) + k eta sin(k eta)).
inline double desitter_hadamard(const DeSitterParams& dp, double eta, double eta_prime)
{
    dp.validate();
    const double k = dp.k;
    const double pre = dp.hubble * dp.hubble / (k * k * k);
    const double ke = k * eta;
    return pre * ((1.0 + k * k * eta * eta_prime) * std::cos(ke) + ke * std::sin(ke));
}

/// Symmetric eigen-decomposition with eigenvalues below tol*lambda_max set to
/// zero. The result is exactly symmetric.
inline PsdProjection psd_project(const KernelMatrix& k, double tol)
{
    require_kind(k, KernelKind::symmetric, "non-symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values());
    if (es.info() != Eigen::Success) throw NumericalError("eigen-failure", "eigen-decomposition did not converge");
    Eigen::VectorXd ev = es.eigenvalues();
    const double lmax = ev.maxCoeff();
    int clipped = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < tol * lmax) {
            ev(i) = 0.0;
            ++clipped;
        }
    }
    if (clipped == 0) return {k, 0};
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::MatrixXd r = q * ev.asDiagonal() * q.transpose();
    r = 0.5 * (r + r.transpose()).eval();
    return {KernelMatrix(k.grid(), std::move(r), KernelKind::symmetric), clipped};
}

} // namespace qcl

#endif
