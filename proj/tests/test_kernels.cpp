#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <qcl/kernels.hpp>

#include "oracles.hpp"

using namespace qcl;

namespace {

const SqueezeParams unit{};

Eigen::MatrixXd random_psd(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = z(rng);
    Eigen::MatrixXd k = a * a.transpose() / n;
    return 0.5 * (k + k.transpose());
}

double min_eigen_ratio(const Eigen::MatrixXd& k)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    return es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff();
}

/// Contour blocks built directly from a closed-form two-point function.
struct OracleContour {
    Eigen::MatrixXcd f, plus, minus, fbar;
};

OracleContour stable_contour(const TimeGrid& g, double omega)
{
    const auto n = static_cast<Eigen::Index>(g.size());
    auto w = [omega](double t, double s) { return std::polar(0.5 / omega, -omega * (t - s)); };
    OracleContour c{Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n), Eigen::MatrixXcd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double ti = g[i], tj = g[j];
            c.plus(i, j) = w(tj, ti);
            c.minus(i, j) = w(ti, tj);
            c.f(i, j) = ti >= tj ? w(ti, tj) : w(tj, ti);
            c.fbar(i, j) = ti >= tj ? w(tj, ti) : w(ti, tj);
        }
    return c;
}

/// Rotation by explicit 2n x 2n products: R^T eta G eta R with
/// J_pm = J_C +- J_Delta/2 and eta = diag(1, -1).
Eigen::MatrixXcd rotate_by_products(const OracleContour& c)
{
    const auto n = c.f.rows();
    Eigen::MatrixXcd g(2 * n, 2 * n), r = Eigen::MatrixXcd::Zero(2 * n, 2 * n), eta = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    g << c.f, c.plus, c.minus, c.fbar;
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
    r << id, 0.5 * id, id, -0.5 * id;
    eta.topLeftCorner(n, n) = id;
    eta.bottomRightCorner(n, n) = -id;
    return r.transpose() * eta * g * eta * r;
}

}

TEST(BuildRetarded, Entries)
{
    const TimeGrid g(0.0, 3.0, 31);
    const auto gr = build_retarded(unit, g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(gr(i, i), 0.0);
    EXPECT_NEAR(gr(20, 10), 1.1752011936438014, 1e-14);
    EXPECT_EQ(gr(10, 20), 0.0);
    // small separations: sinh(x) ~ x
    EXPECT_NEAR(gr(1, 0) / g.dt(), 1.0, 0.01);
    EXPECT_NEAR(gr(2, 1) / gr(1, 0), 1.0, 1e-15);
}

TEST(BuildHadamard, OriginAndRank)
{
    SqueezeParams p;
    p.mass = 2.0;
    p.omega = 0.5;
    const TimeGrid g(0.0, 3.0, 40);
    const auto gc = build_hadamard(p, g);
    EXPECT_NEAR(gc(0, 0), 0.5 / (p.mass * p.omega / (2.0 * p.hbar)), 1e-15);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gc.values());
    const auto ev = es.eigenvalues();
    const double lmax = ev.maxCoeff();
    EXPECT_LT(std::abs(ev(ev.size() - 3)), 1e-10 * lmax);
    EXPECT_GT(ev(ev.size() - 2), 1e-6 * lmax);
    EXPECT_GE(ev.minCoeff(), -1e-10 * lmax);
}

TEST(ContourMatrix, EqualTimeBlocksAgree)
{
    const TimeGrid g(0.0, 2.0, 16);
    const auto cm = build_contour_matrix(stable_oscillator_two_point(1.0, 1.0, 1.0), g);
    for (Eigen::Index i = 0; i < 16; ++i) {
        EXPECT_EQ(cm.g_f(i, i), cm.g_plus(i, i));
        EXPECT_EQ(cm.g_f(i, i), cm.g_minus(i, i));
        EXPECT_EQ(cm.g_f(i, i), cm.g_fbar(i, i));
        EXPECT_EQ(cm.g_f(i, i).imag(), 0.0);
        EXPECT_NEAR(cm.g_f(i, i).real(), 0.5, 1e-15);
    }
    EXPECT_LT(cm.ordering_residual(), 1e-12);
    EXPECT_EQ(cm.transpose_residual(), 0.0);
}

TEST(ContourMatrix, MatchesClosedFormBlocks)
{
    const TimeGrid g(0.0, 2.0, 12);
    const auto cm = build_contour_matrix(stable_oscillator_two_point(1.0, 1.0, 1.0), g);
    const auto o = stable_contour(g, 1.0);
    EXPECT_LT((cm.g_f - o.f).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((cm.g_plus - o.plus).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((cm.g_minus - o.minus).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((cm.g_fbar - o.fbar).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Keldysh, StableOscillatorAgainstProductRotation)
{
    for (std::size_t n : {8u, 16u, 64u}) {
        const TimeGrid g(0.0, 2.0, n);
        const auto k = keldysh_rotate(build_contour_matrix(stable_oscillator_two_point(1.0, 1.0, 1.0), g));
        const auto rot = rotate_by_products(stable_contour(g, 1.0));
        const auto m = static_cast<Eigen::Index>(n);
        const Eigen::MatrixXcd cc = rot.topLeftCorner(m, m);
        const Eigen::MatrixXcd cd = rot.topRightCorner(m, m);
        const Eigen::MatrixXcd dc = rot.bottomLeftCorner(m, m);
        const Eigen::MatrixXcd dd = rot.bottomRightCorner(m, m);

        EXPECT_LT(k.zero_block_residual, 1e-12);
        EXPECT_LT(cc.cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ((k.advanced.values() - k.retarded.values().transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_LT((k.retarded.values() - dc.imag()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((k.advanced.values() - cd.imag()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((k.hadamard.values() - 2.0 * dd.real()).cwiseAbs().maxCoeff(), 1e-12);

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double s = g[i] - g[j];
                EXPECT_NEAR(k.hadamard(i, j), std::cos(s), 1e-12);
                EXPECT_NEAR(k.retarded(i, j), i > j ? -std::sin(s) : 0.0, 1e-12);
            }
    }
}

TEST(Keldysh, InvertedOscillatorMatchesBuiltKernels)
{
    for (std::size_t n : {16u, 33u, 64u}) {
        const TimeGrid g(0.0, 2.0, n);
        const auto k = keldysh_rotate(build_contour_matrix(inverted_oscillator_two_point(unit), g));
        EXPECT_LT(k.zero_block_residual, 1e-12);
        EXPECT_EQ((k.advanced.values() - k.retarded.values().transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_LT((k.retarded.values() - build_retarded(unit, g).values()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((k.hadamard.values() - build_hadamard(unit, g).values()).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Keldysh, RejectsInvalidContour)
{
    const TimeGrid g(0.0, 1.0, 4);
    auto cm = build_contour_matrix(stable_oscillator_two_point(1.0, 1.0, 1.0), g);
    cm.g_f(1, 2) += 0.1;
    try {
        keldysh_rotate(cm);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_EQ(e.code(), "invalid-contour");
    }
}

TEST(ElementwisePower, Basics)
{
    const TimeGrid g(0.0, 1.0, 3);
    Eigen::MatrixXd v = Eigen::MatrixXd::Ones(3, 3);
    v(0, 1) = v(1, 0) = 2.0;
    const KernelMatrix k(g, v, KernelKind::symmetric);
    EXPECT_EQ(elementwise_power(k, 1).values(), v);
    EXPECT_EQ(elementwise_power(k, 3)(0, 1), 8.0);
    EXPECT_THROW(elementwise_power(k, 0), InvalidArgument);
}

TEST(ElementwisePower, SchurProductKeepsPsd)
{
    const TimeGrid g(0.0, 1.0, 12);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const KernelMatrix k(g, random_psd(12, s), KernelKind::symmetric);
        EXPECT_GE(min_eigen_ratio(elementwise_power(k, 3).values()), -1e-12);
    }
}

TEST(FluctuationKernel, Cases)
{
    const TimeGrid g(0.0, 1.0, 6);
    const auto gc = build_hadamard(unit, g);
    EXPECT_EQ(fluctuation_kernel(0.0, gc).values().cwiseAbs().maxCoeff(), 0.0);
    const KernelMatrix id(g, Eigen::MatrixXd::Identity(6, 6), KernelKind::symmetric);
    const auto fk = fluctuation_kernel(0.7, id);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(fk(i, i), 3.0 * 0.49, 1e-15);
    EXPECT_EQ(fk(0, 1), 0.0);
}

TEST(FluctuationKernel, PsdInPsdOut)
{
    const TimeGrid g(0.0, 1.0, 10);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const KernelMatrix k(g, random_psd(10, 100 + s), KernelKind::symmetric);
        EXPECT_GE(min_eigen_ratio(fluctuation_kernel(0.5, k).values()), -1e-10);
    }
    EXPECT_GE(min_eigen_ratio(fluctuation_kernel(0.5, build_hadamard(unit, TimeGrid(0.0, 1.0, 16))).values()), -1e-10);
}

TEST(MemoryKernel, Cases)
{
    const TimeGrid g(0.0, 1.0, 11);
    const auto gr = build_retarded(unit, g);
    const auto gc = build_hadamard(unit, g);
    EXPECT_EQ(memory_kernel(0.0, gr, gc).values(), 2.0 * gr.values());
    const auto mk = memory_kernel(1.0, gr, gc);
    // (t, t') = (1, 0)
    EXPECT_NEAR(mk(10, 0), 2.0 * std::sinh(1.0) * (1.0 + std::cosh(1.0) * std::cosh(1.0)), 1e-12);
    for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = i; j < 11; ++j) EXPECT_EQ(mk(i, j), 0.0);
    EXPECT_THROW(memory_kernel(1.0, gr, build_hadamard(unit, TimeGrid(0.0, 2.0, 11))), InvalidArgument);
    EXPECT_THROW(memory_kernel(1.0, gc, gc), InvalidArgument);
}

TEST(Kernels, ConstructionCommutesWithRestriction)
{
    const TimeGrid g(0.0, 2.0, 40);
    const TimeGrid p = g.prefix(17);
    const auto gr = build_retarded(unit, g), gc = build_hadamard(unit, g);
    const auto grp = build_retarded(unit, p), gcp = build_hadamard(unit, p);
    EXPECT_EQ(fluctuation_kernel(0.4, gc).restrict_prefix(17).values(), fluctuation_kernel(0.4, gcp).values());
    EXPECT_EQ(memory_kernel(0.4, gr, gc).restrict_prefix(17).values(), memory_kernel(0.4, grp, gcp).values());
}

TEST(DeSitter, PrintedFormula)
{
    const DeSitterParams dp{1.0, 2.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(desitter_hadamard(dp, 0.0, 0.0), 1.0 / 8.0);
    const DeSitterParams dk{1.0, 4.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(desitter_hadamard(dk, 0.0, 0.0), desitter_hadamard(dp, 0.0, 0.0) / 8.0);
    const double eta = -std::numbers::pi / 2.0 / dp.k;
    EXPECT_NEAR(desitter_hadamard(dp, eta, 0.0), (1.0 / 8.0) * (std::numbers::pi / 2.0), 1e-15);
    const DeSitterParams dh{3.0, 2.0, 0.0, 1.0};
    EXPECT_NEAR(desitter_hadamard(dh, 0.0, 0.0), 9.0 / 8.0, 1e-15);
}

TEST(DeSitter, SuperhorizonLimit)
{
    for (double k : {0.5, 1.0, 7.0}) {
        const DeSitterParams dp{1.3, k, 0.0, 1.0};
        const double limit = 1.3 * 1.3 / (k * k * k);
        for (double x : {1e-9, 1e-8, 1e-7}) {
            const double eta = -x / k;
            EXPECT_NEAR(desitter_hadamard(dp, eta, eta) / limit, 1.0, 1e-12);
        }
    }
}

TEST(PsdProject, PsdInputUnchanged)
{
    const TimeGrid g(0.0, 1.0, 8);
    const KernelMatrix k(g, random_psd(8, 3) + Eigen::MatrixXd::Identity(8, 8), KernelKind::symmetric);
    const auto r = psd_project(k, 1e-10);
    EXPECT_EQ(r.clipped, 0);
    EXPECT_LT((r.kernel.values() - k.values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PsdProject, RankTwoCoshKernel)
{
    const auto r = psd_project(build_hadamard(unit, TimeGrid(0.0, 2.0, 64)), 1e-10);
    EXPECT_EQ(r.clipped, 62);
}

TEST(PsdProject, ConstructedNegativeEigenvalue)
{
    const TimeGrid g(0.0, 1.0, 5);
    Eigen::VectorXd ev(5);
    ev << -1e-6, 0.2, 0.5, 0.7, 1.0;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_psd(5, 9));
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd k = q * ev.asDiagonal() * q.transpose();
    k = 0.5 * (k + k.transpose()).eval();
    const auto r = psd_project(KernelMatrix(g, k, KernelKind::symmetric), 1e-5);
    EXPECT_EQ(r.clipped, 1);
    EXPECT_GE(min_eigen_ratio(r.kernel.values()), -1e-12);
}
