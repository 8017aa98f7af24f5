#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include <qcl/squeeze.hpp>

#include "oracles.hpp"

using namespace qcl;

namespace {

const SqueezeParams unit{};

}

TEST(Bogolubov, IdentityAtZero)
{
    const auto c = bogolubov_coefficients(unit, 0.0);
    EXPECT_EQ(c.u, complex(1.0, 0.0));
    EXPECT_EQ(std::abs(c.v), 0.0);
}

TEST(Bogolubov, ValuesAtUnitTime)
{
    const auto c = bogolubov_coefficients(unit, 1.0);
    EXPECT_NEAR(c.u.real(), 1.5430806348152437, 1e-15);
    EXPECT_NEAR(c.u.imag(), 0.0, 1e-15);
    // -e^{-i pi/2} sinh 1 = i sinh 1
    EXPECT_NEAR(c.v.real(), 0.0, 1e-15);
    EXPECT_NEAR(c.v.imag(), 1.1752011936438014, 1e-15);
}

TEST(Bogolubov, NormalizationHoldsEverywhere)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> wt(0.0, 5.0), ph(-3.2, 3.2);
    for (int i = 0; i < 200; ++i) {
        SqueezeParams p;
        p.phi = ph(rng);
        const auto c = bogolubov_coefficients(p, wt(rng));
        EXPECT_NEAR(c.normalization_deviation(), 0.0, 1e-12 * std::norm(c.u));
    }
}

TEST(Bogolubov, RejectsNegativeTime) { EXPECT_THROW(bogolubov_coefficients(unit, -0.1), InvalidArgument); }

TEST(ParticleNumber, ClosedForm)
{
    EXPECT_EQ(particle_number(unit, 0.0), 0.0);
    EXPECT_NEAR(particle_number(unit, 1.0), 1.3810978455418157, 1e-14);
    EXPECT_NEAR(particle_number(unit, 2.0), 13.154116418008245, 1e-12);
    try {
        particle_number(unit, -1.0);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_EQ(e.code(), "negative-time");
    }
}

TEST(ParticleNumber, EqualsModulusOfV)
{
    for (int i = 0; i < 100; ++i) {
        const double t = 3.0 * i / 99.0;
        const double n = particle_number(unit, t);
        EXPECT_NEAR(n, std::norm(bogolubov_coefficients(unit, t).v), 1e-12 * std::max(1.0, n));
    }
}

TEST(PairNormalization, Cases)
{
    EXPECT_EQ(pair_normalization_check({1.0, 0.0}), 0.0);
    EXPECT_NEAR(pair_normalization_check({std::cosh(0.7), std::sinh(0.7)}), 0.0, 1e-15);
    EXPECT_EQ(pair_normalization_check({1.0, 1.0}), -1.0);
}

TEST(Quadratures, VacuumIsSymmetric)
{
    const auto q = quadrature_variances(unit, 0.0);
    EXPECT_DOUBLE_EQ(q.squeezed, q.antisqueezed);
    EXPECT_DOUBLE_EQ(q.squeezed, 0.5);
}

TEST(Quadratures, MatchSymplecticOracle)
{
    for (double omega : {0.5, 1.0, 2.0}) {
        SqueezeParams p;
        p.omega = omega;
        p.mass = 1.3;
        for (double t : {0.1, 0.5, 1.0, 1.7}) {
            const auto q = quadrature_variances(p, t);
            const auto [lo, hi] = oracle::symplectic_variances(omega, t, p.vacuum_variance());
            EXPECT_NEAR(q.squeezed / lo, 1.0, 1e-8);
            EXPECT_NEAR(q.antisqueezed / hi, 1.0, 1e-8);
        }
    }
}

TEST(Quadratures, RatioAtUnitTimeIsEFour)
{
    const auto q = quadrature_variances(unit, 1.0);
    const auto [lo, hi] = oracle::symplectic_variances(1.0, 1.0, 0.5);
    EXPECT_NEAR(q.antisqueezed / q.squeezed, hi / lo, 1e-8 * hi / lo);
    EXPECT_NEAR(hi / lo, std::exp(4.0), 1e-8 * std::exp(4.0));
}

TEST(Quadratures, ProductIsConserved)
{
    const auto q0 = quadrature_variances(unit, 0.0);
    for (double t = 0.0; t < 4.0; t += 0.37) {
        const auto q = quadrature_variances(unit, t);
        EXPECT_NEAR(q.squeezed * q.antisqueezed, q0.squeezed * q0.antisqueezed, 1e-10);
    }
}

TEST(Greens, Commutator)
{
    EXPECT_EQ(commutator_green(unit, 0.4, 0.4), 0.0);
    EXPECT_NEAR(commutator_green(unit, 1.3, 0.3), 1.1752011936438014, 1e-15);
    EXPECT_DOUBLE_EQ(commutator_green(unit, 0.2, 0.9), -commutator_green(unit, 0.9, 0.2));
}

TEST(Greens, Hadamard)
{
    EXPECT_DOUBLE_EQ(hadamard_green(unit, 0.0, 0.0), 1.0);
    EXPECT_NEAR(hadamard_green(unit, 1.5, 0.5), 3.7621956910836314, 1e-14);
    EXPECT_DOUBLE_EQ(hadamard_green(unit, 0.3, 1.1), hadamard_green(unit, 1.1, 0.3));
}

TEST(Greens, PrefactorScaling)
{
    SqueezeParams p;
    p.mass = 2.0;
    p.hbar = 3.0;
    EXPECT_NEAR(hadamard_green(p, 0.0, 0.0), 1.5, 1e-15);
    EXPECT_NEAR(commutator_green(p, 1.0, 0.0), 1.5 * std::sinh(1.0), 1e-14);
}

TEST(Coherent, Overlap)
{
    EXPECT_EQ(coherent_overlap({complex(0.3, 0.2)}, {complex(0.3, 0.2)}), 1.0);
    EXPECT_NEAR(coherent_overlap({complex(0.0, 0.0)}, {complex(0.6, 0.8)}), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(coherent_overlap({0.0}, {2.0}), 0.01831563888873418, 1e-15);
}

TEST(Coherent, ParticleNumber)
{
    EXPECT_EQ(coherent_particle_number({0.0}), 0.0);
    EXPECT_EQ(coherent_particle_number({2.0}), 4.0);
    EXPECT_NEAR(coherent_particle_number({complex(1.0, 1.0)}), 2.0, 1e-15);
}

namespace {

KernelMatrix step_response(const TimeGrid& g)
{
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) v(i, j) = 1.0;
    return KernelMatrix(g, v, KernelKind::retarded);
}

}

TEST(CoherentShift, ZeroDrive)
{
    const TimeGrid g(0.0, 1.0, 21);
    const std::vector<double> drive(21, 0.0);
    for (double s : accumulate_coherent_shift(g, step_response(g), drive)) EXPECT_EQ(s, 0.0);
}

TEST(CoherentShift, ConstantDriveIntegratesLinearly)
{
    const TimeGrid g(0.5, 2.5, 41);
    const std::vector<double> drive(41, 1.7);
    const auto s = accumulate_coherent_shift(g, step_response(g), drive);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(s[i], 1.7 * (g[i] - g.t_start()), 1e-12);
}

TEST(CoherentShift, RandomDriveMomentsAndLinearity)
{
    const TimeGrid g(0.0, 1.0, 11);
    const auto resp = step_response(g);
    const std::size_t m = 1000;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<CompensatedSum> sum(11), sq(11);
    for (std::size_t r = 0; r < m; ++r) {
        std::vector<double> a(11), b(11), ab(11);
        for (std::size_t i = 0; i < 11; ++i) {
            a[i] = z(rng);
            b[i] = z(rng);
            ab[i] = 2.0 * a[i] - 3.0 * b[i];
        }
        const auto sa = accumulate_coherent_shift(g, resp, a);
        const auto sb = accumulate_coherent_shift(g, resp, b);
        const auto sab = accumulate_coherent_shift(g, resp, ab);
        for (std::size_t i = 0; i < 11; ++i) {
            EXPECT_NEAR(sab[i], 2.0 * sa[i] - 3.0 * sb[i], 1e-12);
            sum[i].add(sa[i]);
            sq[i].add(sa[i] * sa[i]);
        }
    }
    double prev = -1.0;
    for (std::size_t i = 1; i < 11; ++i) {
        double analytic = 0.0;
        for (std::size_t j = 0; j <= i; ++j) analytic += std::pow(oracle::trapezoid(j, i, g.dt()), 2);
        const double mean = sum[i].value() / m;
        const double var = sq[i].value() / m - mean * mean;
        EXPECT_LT(std::abs(mean), 5.0 * std::sqrt(analytic / m));
        EXPECT_NEAR(var, analytic, 5.0 * oracle::variance_stderr(analytic, m));
        EXPECT_GT(var, prev);
        prev = var;
    }
}

TEST(CoherentShift, RequiresRetardedResponse)
{
    const TimeGrid g(0.0, 1.0, 5);
    const KernelMatrix sym(g, Eigen::MatrixXd::Identity(5, 5), KernelKind::symmetric);
    const std::vector<double> drive(5, 1.0);
    EXPECT_THROW(accumulate_coherent_shift(g, sym, drive), InvalidArgument);
    EXPECT_THROW(accumulate_coherent_shift(TimeGrid(0.0, 2.0, 5), step_response(g), drive), InvalidArgument);
}
