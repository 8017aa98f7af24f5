#ifndef QCL_VERIFY_HPP
#define QCL_VERIFY_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kernels.hpp"
#include "noise.hpp"
#include "squeeze.hpp"

namespace qcl {

/// One identity check: passes when value <= threshold.
struct Check {
    std::string suite;
    std::string name;
    double value;
    double threshold;
    bool passed;
};

struct VerifyReport {
    std::vector<Check> checks;

    bool passed() const
    {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    void add(std::string suite, std::string name, double value, double threshold)
    {
        checks.push_back({std::move(suite), std::move(name), value, threshold, value <= threshold});
    }
};

/// |u|^2 - |v|^2 = 1 and N = |v|^2 over a 100-point omega*t grid and several
/// squeeze angles; the pair normalization on (cosh r, sinh r).
inline void verify_bogolubov(VerifyReport& rep, const SqueezeParams& base)
{
    double norm_dev = 0.0, number_dev = 0.0, pair_dev = 0.0;
    for (int a = 0; a < 5; ++a) {
        SqueezeParams p = base;
        p.phi = -std::numbers::pi / 4.0 + 0.4 * a;
        for (int i = 0; i < 100; ++i) {
            const double t = 3.0 * i / 99.0 / p.omega;
            const auto c = bogolubov_coefficients(p, t);
            norm_dev = std::max(norm_dev, std::abs(c.normalization_deviation()));
            const double n = particle_number(p, t);
            number_dev = std::max(number_dev, std::abs(n - std::norm(c.v)) / std::max(1.0, n));
        }
    }
    for (int i = 0; i < 100; ++i) {
        const double r = 3.0 * i / 99.0;
        pair_dev = std::max(pair_dev, std::abs(pair_normalization_check({std::cosh(r), std::sinh(r)})));
    }
    rep.add("bogolubov", "max |u|^2-|v|^2-1", norm_dev, 1e-12);
    rep.add("bogolubov", "max |N - |v|^2| (relative)", number_dev, 1e-12);
    rep.add("bogolubov", "max pair normalization deviation", pair_dev, 1e-12);
}

/// Zero-block residual, exact G_A = G_R^T, and agreement of the rotated
/// inverted-oscillator kernels with the directly built ones.
inline void verify_keldysh(VerifyReport& rep, const SqueezeParams& p)
{
    for (std::size_t n : {16u, 64u}) {
        const TimeGrid grid(0.0, 2.0, n);
        const std::string tag = "n=" + std::to_string(n);
        for (int inverted = 0; inverted < 2; ++inverted) {
            const auto w = inverted ? inverted_oscillator_two_point(p) : stable_oscillator_two_point(p.mass, p.omega, p.hbar);
            const auto k = keldysh_rotate(build_contour_matrix(w, grid));
            const std::string who = inverted ? "inverted " : "stable ";
            rep.add("keldysh", who + tag + " zero-block residual", k.zero_block_residual, 1e-12);
            rep.add("keldysh", who + tag + " max |G_A - G_R^T|",
                    (k.advanced.values() - k.retarded.values().transpose()).cwiseAbs().maxCoeff(), 0.0);
            if (inverted) {
                const auto gr = build_retarded(p, grid);
                const auto gc = build_hadamard(p, grid);
                rep.add("keldysh", who + tag + " max |G_R - build_retarded|",
                        (k.retarded.values() - gr.values()).cwiseAbs().maxCoeff(), 1e-10);
                rep.add("keldysh", who + tag + " max |G_C - build_hadamard|",
                        (k.hadamard.values() - gc.values()).cwiseAbs().maxCoeff(), 1e-10);
            }
        }
    }
}

/// E[exp(i xi.v)] against exp(-v^T K v / 2) for white, Hadamard and
/// composed kernels on a 16-point grid, tolerance 5/sqrt(M).
inline void verify_hs_moment(VerifyReport& rep, const SqueezeParams& p, std::size_t m, std::uint64_t seed,
                             std::size_t threads = 1)
{
    const TimeGrid grid(0.0, 1.0, 16);
    const auto gc = build_hadamard(p, grid);
    const KernelMatrix identity(grid, Eigen::MatrixXd::Identity(16, 16), KernelKind::symmetric);
    const KernelMatrix composed = fluctuation_kernel(0.5, gc);
    const double tol = 5.0 / std::sqrt(static_cast<double>(m));

    struct Case {
        const char* name;
        const KernelMatrix* k;
    };
    const Case cases[] = {{"identity", &identity}, {"hadamard", &gc}, {"composed", &composed}};
    std::uint64_t idx = 0;
    for (const auto& c : cases) {
        // probe scaled so that v^T K v = 1
        const auto z = standard_normals(derive_seed(seed, 1000 + idx), 16);
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(z.data(), 16);
        v /= std::sqrt(v.dot(c.k->values() * v));
        const auto res = hs_moment_check(*c.k, std::span<const double>(v.data(), 16), m, derive_seed(seed, idx), default_clip_tol, threads);
        rep.add("hs_moment", std::string(c.name) + " |E[e^{i xi.v}] - e^{-v^T K v/2}|",
                std::abs(res.mc_estimate - res.analytic), tol);
        ++idx;
    }
}

inline VerifyReport run_verify(const SqueezeParams& p, std::size_t hs_realizations, std::uint64_t seed,
                               std::size_t threads = 1)
{
    VerifyReport rep;
    verify_bogolubov(rep, p);
    verify_keldysh(rep, p);
    verify_hs_moment(rep, p, hs_realizations, seed, threads);
    return rep;
}

} // namespace qcl

#endif
