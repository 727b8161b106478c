#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "bkp/elliptic.hpp"
#include "lattice_sum_oracle.hpp"
#include "test_support.hpp"

using bkp::cplx;
using testing_support::Rng;

namespace
{

std::vector<bkp::Lattice> all_lattices()
{
    return {testing_support::square_lattice(), testing_support::hexagonal_lattice(),
            testing_support::skewed_lattice()};
}

cplx oracle_phi(cplx x, cplx lambda, const bkp::Lattice &lat)
{
    const auto sx = oracle::lattice_sums(x, lat.omega(), lat.omega_prime());
    const auto sl = oracle::lattice_sums(lambda, lat.omega(), lat.omega_prime());
    const auto ss = oracle::lattice_sums(x + lambda, lat.omega(), lat.omega_prime());
    return std::exp(ss.log_sigma - sl.log_sigma - sx.log_sigma - sl.zeta * x);
}

// Laurent coefficient of Phi(., lambda) at x^k by the trapezoidal rule on |x| = r.
cplx laurent_coefficient(int k, cplx lambda, const bkp::Lattice &lat, double r)
{
    constexpr int m = 128;
    cplx sum = 0.0;
    for (int j = 0; j < m; ++j) {
        const cplx x = std::polar(r, 2.0 * std::numbers::pi * (j + 0.5) / m);
        sum += bkp::phi(x, lambda, lat, 0).value * std::pow(x, -k);
    }
    return sum / double(m);
}

} // namespace

TEST(Lattice, RejectsBadPeriods)
{
    EXPECT_THROW(bkp::make_lattice(0.0, cplx(0.0, 0.5)), std::domain_error);
    EXPECT_THROW(bkp::make_lattice(0.5, 0.0), std::domain_error);
    EXPECT_THROW(bkp::make_lattice(0.5, cplx(0.0, -0.5)), std::domain_error);
    EXPECT_THROW(bkp::make_lattice(0.5, 1.5), std::domain_error);
}

TEST(Lattice, SymmetricLatticesKillOneInvariant)
{
    const auto sq = testing_support::square_lattice();
    EXPECT_LT(std::abs(sq.g3()), 1e-10 * std::abs(sq.g2()));
    const auto hex = testing_support::hexagonal_lattice();
    EXPECT_LT(std::abs(hex.g2()), 1e-10 * std::abs(hex.g3()));
}

TEST(Lattice, InvariantsMatchEisensteinSums)
{
    for (const auto &lat : all_lattices()) {
        const auto ref = oracle::lattice_sums(cplx(0.13, 0.07), lat.omega(), lat.omega_prime());
        EXPECT_LT(std::abs(lat.g2() - ref.g2), 1e-10 * std::max(1.0, std::abs(ref.g2)));
        EXPECT_LT(std::abs(lat.g3() - ref.g3), 1e-10 * std::max(1.0, std::abs(ref.g3)));
    }
}

TEST(Lattice, LegendreRelation)
{
    for (const auto &lat : all_lattices()) {
        const cplx lhs = lat.eta() * lat.omega_prime() - lat.eta_prime() * lat.omega();
        EXPECT_LT(std::abs(lhs - bkp::I_unit * std::numbers::pi / 2.0), 1e-12);
    }
}

TEST(Lattice, EtaIsZetaAtHalfPeriod)
{
    for (const auto &lat : all_lattices()) {
        const auto ref = oracle::lattice_sums(lat.omega(), lat.omega(), lat.omega_prime());
        EXPECT_LT(oracle::rel_err(lat.eta(), ref.zeta), 1e-9);
        const auto refp = oracle::lattice_sums(lat.omega_prime(), lat.omega(), lat.omega_prime());
        EXPECT_LT(oracle::rel_err(lat.eta_prime(), refp.zeta), 1e-9);
    }
}

TEST(Weierstrass, NamedPointsOnSquareLattice)
{
    const auto lat = testing_support::square_lattice();
    const auto a = oracle::lattice_sums(cplx(0.3, 0.2), lat.omega(), lat.omega_prime());
    EXPECT_LT(oracle::rel_err(bkp::wp(cplx(0.3, 0.2), lat), a.wp), 1e-9);
    const auto b = oracle::lattice_sums(cplx(0.0, 0.4), lat.omega(), lat.omega_prime());
    EXPECT_LT(oracle::rel_err(bkp::zeta_w(cplx(0.0, 0.4), lat), b.zeta), 1e-9);
    const auto c = oracle::lattice_sums(cplx(0.25, 0.1), lat.omega(), lat.omega_prime());
    EXPECT_LT(oracle::rel_err(bkp::sigma_w(cplx(0.25, 0.1), lat), std::exp(c.log_sigma)), 1e-9);
}

TEST(Weierstrass, MatchesLatticeSumsAtRandomPoints)
{
    Rng rng(101);
    for (const auto &lat : all_lattices()) {
        for (int k = 0; k < 8; ++k) {
            // include points outside the fundamental cell to exercise the reduction
            const cplx z = rng.cell_point(lat, 0.05 * lat.min_period()) + double(k % 3 - 1) * 2.0 * lat.omega_prime();
            const auto ref = oracle::lattice_sums(z, lat.omega(), lat.omega_prime());
            EXPECT_LT(oracle::rel_err(bkp::wp(z, lat), ref.wp), 1e-9) << z;
            EXPECT_LT(oracle::rel_err(bkp::zeta_w(z, lat), ref.zeta), 1e-9) << z;
            EXPECT_LT(oracle::rel_err(bkp::sigma_w(z, lat), std::exp(ref.log_sigma)), 1e-9) << z;
        }
    }
}

TEST(Weierstrass, ParityAndPeriodicity)
{
    Rng rng(5);
    for (const auto &lat : all_lattices()) {
        const cplx w1 = 2.0 * lat.omega(), w2 = 2.0 * lat.omega_prime();
        for (int k = 0; k < 20; ++k) {
            const cplx z = rng.cell_point(lat, 0.05 * lat.min_period());
            const cplx p = bkp::wp(z, lat);
            EXPECT_LT(oracle::rel_err(bkp::wp(-z, lat), p), 1e-12);
            EXPECT_LT(oracle::rel_err(bkp::wp(z + w1, lat), p), 1e-12);
            EXPECT_LT(oracle::rel_err(bkp::wp(z - 3.0 * w2, lat), p), 1e-12);
            const cplx zt = bkp::zeta_w(z, lat);
            EXPECT_LT(oracle::rel_err(bkp::zeta_w(-z, lat), -zt), 1e-12);
            EXPECT_LT(oracle::rel_err(bkp::zeta_w(z + w1, lat) - zt, 2.0 * lat.eta()), 1e-11);
            EXPECT_LT(oracle::rel_err(bkp::zeta_w(z + w2, lat) - zt, 2.0 * lat.eta_prime()), 1e-11);
            const cplx s = bkp::sigma_w(z, lat);
            EXPECT_LT(oracle::rel_err(bkp::sigma_w(-z, lat), -s), 1e-12);
            EXPECT_LT(oracle::rel_err(bkp::sigma_w(z + w1, lat), -std::exp(2.0 * lat.eta() * (z + lat.omega())) * s),
                      1e-11);
        }
    }
}

TEST(Weierstrass, DifferentialEquationAndDerivativeIdentities)
{
    Rng rng(17);
    for (const auto &lat : all_lattices()) {
        for (int k = 0; k < 100; ++k) {
            const cplx z = rng.cell_point(lat, 0.05 * lat.min_period());
            const bkp::WpDerivs w = bkp::wp_all(z, lat);
            const double scale = 1.0 + std::pow(std::abs(w.p), 3);
            EXPECT_LT(std::abs(w.p1 * w.p1 - (4.0 * w.p * w.p * w.p - lat.g2() * w.p - lat.g3())), 1e-10 * scale);
            EXPECT_LT(std::abs(w.p2 - (6.0 * w.p * w.p - 0.5 * lat.g2())), 1e-10 * scale);
            EXPECT_LT(std::abs(w.p3 - 12.0 * w.p * w.p1), 1e-10 * scale);
            EXPECT_EQ(bkp::wp(z, lat, 3), w.p3);
        }
    }
}

TEST(Weierstrass, DerivativesAgreeWithDifferenceQuotients)
{
    const auto lat = testing_support::skewed_lattice();
    const double h = 1e-3;
    for (const cplx z : {cplx(0.21, 0.13), cplx(-0.3, 0.25), cplx(0.05, -0.33)}) {
        for (int order = 0; order < 3; ++order) {
            auto f = [&](cplx u) { return bkp::wp(u, lat, order); };
            const cplx fd = (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h);
            EXPECT_LT(oracle::rel_err(fd, bkp::wp(z, lat, order + 1)), 1e-7) << "order " << order;
        }
        auto zf = [&](cplx u) { return bkp::zeta_w(u, lat); };
        const cplx fz = (-zf(z + 2.0 * h) + 8.0 * zf(z + h) - 8.0 * zf(z - h) + zf(z - 2.0 * h)) / (12.0 * h);
        EXPECT_LT(oracle::rel_err(-fz, bkp::wp(z, lat)), 1e-7);
    }
}

TEST(Weierstrass, SigmaNormalisationAndRegularParts)
{
    const auto lat = testing_support::square_lattice();
    for (const double r : {1e-8, 1e-5, 1e-3}) {
        const cplx z = std::polar(r, 0.7);
        EXPECT_LT(std::abs(bkp::sigma_w(z, lat) / z - 1.0), 1e-12 + r * r);
        // wp - 1/z^2 = g2 z^2 / 20 + O(z^4), zeta - 1/z = -g2 z^3 / 60 + O(z^5)
        EXPECT_LT(std::abs(bkp::wp_regular(z, lat) - lat.g2() * z * z / 20.0), 1e-12 + 10.0 * std::pow(r, 4));
        EXPECT_LT(std::abs(bkp::zeta_regular(z, lat) + lat.g2() * z * z * z / 60.0), 1e-12 + 10.0 * std::pow(r, 5));
    }
}

TEST(Weierstrass, RationalLimitOfLargeLattice)
{
    const auto lat = bkp::make_lattice(50.0, cplx(0.0, 50.0));
    Rng rng(9);
    for (int k = 0; k < 50; ++k) {
        cplx z = rng.disk(1.0);
        if (std::abs(z) < 0.05) {
            continue;
        }
        EXPECT_LT(std::abs(bkp::wp(z, lat) - 1.0 / (z * z)), 1e-5);
    }
}

TEST(Weierstrass, PoleErrors)
{
    const auto lat = testing_support::square_lattice();
    EXPECT_THROW(bkp::wp(0.0, lat), bkp::pole_error);
    EXPECT_THROW(bkp::wp(2.0 * lat.omega() + 1e-9, lat), bkp::pole_error);
    EXPECT_THROW(bkp::zeta_w(2.0 * lat.omega_prime(), lat), bkp::pole_error);
    EXPECT_NO_THROW(bkp::sigma_w(0.0, lat));
    try {
        bkp::wp(cplx(1e-8, 0.0), lat);
        FAIL() << "expected pole_error";
    } catch (const bkp::pole_error &e) {
        EXPECT_NEAR(e.distance(), 1e-8, 1e-15);
    }
    EXPECT_THROW(bkp::wp(0.3, lat, 4), std::invalid_argument);
    EXPECT_THROW(bkp::wp(0.3, lat, -1), std::invalid_argument);
}

TEST(PhiKernel, MatchesSigmaDefinition)
{
    Rng rng(23);
    for (const auto &lat : all_lattices()) {
        for (int k = 0; k < 4; ++k) {
            const cplx x = rng.cell_point(lat, 0.05 * lat.min_period());
            const cplx l = testing_support::random_lambda(rng, lat);
            if (lat.lattice_distance(x + l) < 0.05 * lat.min_period()) {
                continue;
            }
            EXPECT_LT(oracle::rel_err(bkp::phi(x, l, lat, 0).value, oracle_phi(x, l, lat)), 1e-9);
        }
    }
    const auto sq = testing_support::square_lattice();
    EXPECT_LT(oracle::rel_err(bkp::phi(0.3, cplx(0.0, 0.2), sq, 0).value, oracle_phi(0.3, cplx(0.0, 0.2), sq)),
              1e-9);
}

TEST(PhiKernel, LaurentExpansionAtZero)
{
    for (const auto &lat : all_lattices()) {
        const cplx l(0.17, 0.11);
        const bkp::PhiEval f = bkp::phi(0.2, l, lat);
        const double r = 0.2 * lat.min_period();
        EXPECT_LT(std::abs(laurent_coefficient(-1, l, lat, r) - 1.0), 1e-12);
        EXPECT_LT(std::abs(laurent_coefficient(0, l, lat, r)), 1e-11);
        EXPECT_LT(oracle::rel_err(laurent_coefficient(1, l, lat, r), f.alpha1), 1e-10);
        EXPECT_LT(oracle::rel_err(laurent_coefficient(2, l, lat, r), f.alpha2), 1e-10);
        // x Phi(x) - 1 = alpha1 x^2 + ...
        EXPECT_LT(std::abs(1e-5 * bkp::phi(1e-5, l, lat, 0).value - 1.0), 1e-8);
    }
}

TEST(PhiKernel, DerivativesAgreeWithDifferenceQuotients)
{
    const auto lat = testing_support::hexagonal_lattice();
    const cplx l(0.12, -0.21);
    const double h = 1e-3;
    for (const cplx x : {cplx(0.22, 0.1), cplx(-0.15, 0.3)}) {
        const bkp::PhiEval f = bkp::phi(x, l, lat);
        const std::array<cplx, 4> d{f.value, f.dx1, f.dx2, f.dx3};
        for (int order = 0; order < 3; ++order) {
            auto g = [&](cplx u) {
                const bkp::PhiEval e = bkp::phi(u, l, lat);
                return std::array<cplx, 4>{e.value, e.dx1, e.dx2, e.dx3}[std::size_t(order)];
            };
            const cplx fd = (-g(x + 2.0 * h) + 8.0 * g(x + h) - 8.0 * g(x - h) + g(x - 2.0 * h)) / (12.0 * h);
            EXPECT_LT(oracle::rel_err(fd, d[std::size_t(order + 1)]), 1e-7) << "order " << order;
        }
    }
}

TEST(PhiKernel, QuasiPeriodicityAndProducts)
{
    Rng rng(31);
    for (const auto &lat : all_lattices()) {
        for (int k = 0; k < 20; ++k) {
            const cplx x = rng.cell_point(lat, 0.05 * lat.min_period());
            const cplx l = testing_support::random_lambda(rng, lat);
            if (lat.lattice_distance(x + l) < 0.05 * lat.min_period() ||
                lat.lattice_distance(l - x) < 0.05 * lat.min_period()) {
                continue;
            }
            const cplx f = bkp::phi(x, l, lat, 0).value;
            const cplx mult =
                std::exp(2.0 * (lat.eta() * l - bkp::zeta_w(l, lat) * lat.omega()));
            EXPECT_LT(oracle::rel_err(bkp::phi(x + 2.0 * lat.omega(), l, lat, 0).value, mult * f), 1e-11);
            const cplx prod = f * bkp::phi(-x, l, lat, 0).value;
            const cplx expect = bkp::wp(l, lat) - bkp::wp(x, lat);
            EXPECT_LT(std::abs(prod - expect) / (1.0 + std::abs(prod) + std::abs(expect)), 1e-9);
        }
    }
}

TEST(PhiKernel, AdditionLaw)
{
    Rng rng(41);
    const double margin = 0.05;
    for (const auto &lat : all_lattices()) {
        int done = 0;
        while (done < 50) {
            const cplx x = rng.cell_point(lat, margin), y = rng.cell_point(lat, margin);
            const cplx l = testing_support::random_lambda(rng, lat);
            bool ok = true;
            for (const cplx u : {x + y, x + l, y + l, x + y + l}) {
                ok = ok && lat.lattice_distance(u) > margin;
            }
            if (!ok) {
                continue;
            }
            ++done;
            const cplx lhs = bkp::phi(x, l, lat, 0).value * bkp::phi(y, l, lat, 0).value;
            const cplx rhs = bkp::phi(x + y, l, lat, 0).value *
                             (bkp::zeta_w(x, lat) + bkp::zeta_w(y, lat) - bkp::zeta_w(x + y + l, lat) +
                              bkp::zeta_w(l, lat));
            EXPECT_LT(std::abs(lhs - rhs) / (1.0 + std::abs(lhs) + std::abs(rhs)), 1e-9);
        }
    }
}

TEST(PhiKernel, GaugedFormDropsExponential)
{
    const auto lat = testing_support::square_lattice();
    const cplx x(0.21, -0.08), l(0.03, 0.02);
    const bkp::PhiEval a = bkp::phi(x, l, lat), g = bkp::phi(x, l, lat, 3, true);
    const cplx e = std::exp(bkp::zeta_w(l, lat) * x);
    EXPECT_LT(oracle::rel_err(g.value, a.value * e), 1e-12);
    // each field is the plain derivative times the same factor, as in a diagonal conjugation
    EXPECT_LT(oracle::rel_err(g.dx1, a.dx1 * e), 1e-12);
    EXPECT_LT(oracle::rel_err(g.dx3, a.dx3 * e), 1e-12);
    EXPECT_EQ(g.alpha1, a.alpha1);
}

TEST(PhiKernel, PoleErrors)
{
    const auto lat = testing_support::square_lattice();
    EXPECT_THROW(bkp::phi(0.0, 0.2, lat), bkp::pole_error);
    EXPECT_THROW(bkp::phi(0.2, 0.0, lat), bkp::pole_error);
    EXPECT_THROW(bkp::phi(0.2, -0.2 + 2.0 * lat.omega_prime(), lat), bkp::pole_error);
}
