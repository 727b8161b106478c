#pragma once

// Baker-Akhiezer function from the pole ansatz
//
//   psi(x, t) = e^{x z + t z^3} sum_i c_i Phi(x - x_i, lambda),
//
// where (z, lambda) lies on the spectral curve and c is the matching null vector of
// 3(z^2 - wp(lambda)) I - L. The coefficients evolve as c' = M c.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bkp/dynamics.hpp"
#include "bkp/elliptic.hpp"
#include "bkp/spectral.hpp"

namespace bkp
{

/// Newton iteration on the spectral polynomial did not settle.
class convergence_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// The null space at a root is not one-dimensional, or cannot be normalised.
class degenerate_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct WaveData {
    cplx z;
    cplx lambda;
    std::vector<cplx> c; // c[0] == 1
    PoleState state;
};

struct PsiSample {
    cplx x;
    cplx value;
    cplx dx1, dx2, dx3;
    cplx dt;
};

/// u(x) = -sum_i wp(x - x_i).
inline cplx potential_u(cplx x, const PoleState &s, const Lattice &lat)
{
    cplx u = 0.0;
    for (const cplx xi : s.x) {
        u -= wp(x - xi, lat);
    }
    return u;
}

/// Velocities that make c an eigenvector of L with eigenvalue 3z^2 + 6 alpha1, obtained
/// by solving the second-order pole cancellation condition for each x_i'.
inline PoleState on_shell_state(const std::vector<cplx> &x, cplx lambda, cplx z, const std::vector<cplx> &c,
                                const Lattice &lat, double t = 0.0)
{
    const std::size_t n = x.size();
    if (n == 0 || c.size() != n) {
        throw std::invalid_argument("on_shell_state: need one coefficient per pole");
    }
    double cmax = 0.0;
    for (const cplx ci : c) {
        cmax = std::max(cmax, std::abs(ci));
    }
    for (const cplx ci : c) {
        if (std::abs(ci) <= 1e-12 * cmax) {
            throw std::invalid_argument("on_shell_state: coefficients must all be nonzero");
        }
    }
    const cplx Lambda = 3.0 * z * z - 3.0 * wp(lambda, lat);
    PoleState s{t, x, std::vector<cplx>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        cplx rhs = -Lambda * c[i];
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) {
                continue;
            }
            const cplx d = x[i] - x[k];
            const PhiEval f = phi(d, lambda, lat, 1);
            rhs += -6.0 * z * c[k] * f.value - 6.0 * c[k] * f.dx1 + 6.0 * c[i] * wp(d, lat);
        }
        s.v[i] = rhs / c[i];
    }
    return s;
}

/// All 2N roots of R(., lambda), from the companion matrix.
inline std::vector<cplx> spectral_roots(const SpectralPoly &p)
{
    const auto deg = Eigen::Index(p.degree());
    Matrix comp = Matrix::Zero(deg, deg);
    const cplx lead = p.coeffs.back();
    for (Eigen::Index i = 1; i < deg; ++i) {
        comp(i, i - 1) = 1.0;
    }
    for (Eigen::Index i = 0; i < deg; ++i) {
        comp(i, deg - 1) = -p.coeffs[std::size_t(i)] / lead;
    }
    Eigen::ComplexEigenSolver<Matrix> es(comp, false);
    std::vector<cplx> roots(static_cast<std::size_t>(deg));
    for (Eigen::Index i = 0; i < deg; ++i) {
        roots[std::size_t(i)] = es.eigenvalues()(i);
    }
    return roots;
}

/// Locates a point (z, lambda) of the spectral curve near z_guess and the normalised null vector c.
///
/// Throws convergence_error after 50 Newton steps and degenerate_error when the null
/// space has dimension >= 2 or c_1 vanishes.
inline WaveData wave_data(const PoleState &s, cplx lambda, cplx z_guess, const Lattice &lat)
{
    const MatrixBlocks b = build_blocks(s, lambda, lat, Gauge::plain);
    const SpectralPoly poly = spectral_poly(b);

    cplx z = z_guess;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        const cplx dR = poly.derivative(z);
        if (dR == 0.0) {
            break;
        }
        const cplx step = poly(z) / dR;
        z -= step;
        if (std::abs(step) <= 1e-14 * (1.0 + std::abs(z))) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw convergence_error("wave_data: Newton iteration on R(z, lambda) did not converge from z = (" +
                                std::to_string(z_guess.real()) + ", " + std::to_string(z_guess.imag()) + ")");
    }
    // Two corrections against the determinant itself, which the interpolated polynomial only approximates.
    for (int it = 0; it < 2; ++it) {
        const cplx dR = poly.derivative(z);
        if (dR != 0.0) {
            z -= spectral_det(b, z) / dR;
        }
    }

    const auto n = Eigen::Index(s.size());
    const MatrixPair p = build_pair(b, z);
    Matrix K = p.Lambda * Matrix::Identity(n, n) - p.L;
    Vector c(n);
    if (n == 1) {
        c(0) = 1.0;
    } else {
        Eigen::JacobiSVD<Matrix> svd(K, Eigen::ComputeFullV);
        const auto &sv = svd.singularValues();
        if (sv(n - 2) <= 1e-8 * sv(0)) {
            throw degenerate_error("wave_data: null space of dimension >= 2");
        }
        c = svd.matrixV().col(n - 1);
    }
    if (std::abs(c(0)) <= 1e-12 * c.norm()) {
        throw degenerate_error("wave_data: first component of the null vector vanishes");
    }
    c /= c(0);

    WaveData w{z, lambda, std::vector<cplx>(std::size_t(n)), s};
    for (Eigen::Index i = 0; i < n; ++i) {
        w.c[std::size_t(i)] = c(i);
    }
    return w;
}

inline Vector as_vector(const std::vector<cplx> &c)
{
    Vector out(Eigen::Index(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) {
        out(Eigen::Index(i)) = c[i];
    }
    return out;
}

/// ||L c - Lambda c|| / ||c||.
inline double eigen_residual(const WaveData &w, const Lattice &lat)
{
    const MatrixPair p = build_pair(w.state, w.z, w.lambda, lat, Gauge::plain);
    const Vector c = as_vector(w.c);
    return (p.L * c - p.Lambda * c).norm() / c.norm();
}

/// Time derivative of the coefficients, c' = M c.
inline std::vector<cplx> coefficient_rate(const WaveData &w, const Lattice &lat)
{
    const MatrixPair p = build_pair(w.state, w.z, w.lambda, lat, Gauge::plain);
    const Vector cd = p.M * as_vector(w.c);
    return {cd.data(), cd.data() + cd.size()};
}

namespace detail
{

inline PsiSample psi_eval(cplx x, double t_offset, const WaveData &w, const Lattice &lat,
                          const std::vector<cplx> &cdot)
{
    const cplx z = w.z;
    const cplx e = std::exp(x * z + t_offset * z * z * z);
    cplx f0 = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0, ft = 0.0;
    for (std::size_t i = 0; i < w.c.size(); ++i) {
        const PhiEval f = phi(x - w.state.x[i], w.lambda, lat, 3);
        f0 += w.c[i] * f.value;
        f1 += w.c[i] * f.dx1;
        f2 += w.c[i] * f.dx2;
        f3 += w.c[i] * f.dx3;
        ft += cdot[i] * f.value - w.c[i] * w.state.v[i] * f.dx1;
    }
    PsiSample s;
    s.x = x;
    s.value = e * f0;
    s.dx1 = e * (z * f0 + f1);
    s.dx2 = e * (z * z * f0 + 2.0 * z * f1 + f2);
    s.dx3 = e * (z * z * z * f0 + 3.0 * z * z * f1 + 3.0 * z * f2 + f3);
    s.dt = z * z * z * s.value + e * ft;
    return s;
}

} // namespace detail

inline PsiSample psi_eval(cplx x, double t_offset, const WaveData &w, const Lattice &lat)
{
    return detail::psi_eval(x, t_offset, w, lat, coefficient_rate(w, lat));
}

/// Eight points on a circle of radius 0.37 |2 omega| around the pole centroid, minus any
/// within the pole guard of a pole translate.
inline std::vector<cplx> default_probe_points(const PoleState &s, const Lattice &lat)
{
    cplx centre = 0.0;
    for (const cplx xi : s.x) {
        centre += xi;
    }
    centre /= double(s.size());
    const double r = 0.37 * std::abs(2.0 * lat.omega());
    std::vector<cplx> out;
    for (int k = 0; k < 8; ++k) {
        const cplx p = centre + std::polar(r, 2.0 * std::numbers::pi * double(k) / 8.0);
        bool ok = true;
        for (const cplx xi : s.x) {
            ok = ok && lat.lattice_distance(p - xi) >= lat.pole_guard();
        }
        if (ok) {
            out.push_back(p);
        }
    }
    return out;
}

/// max |psi_t - psi''' - 6 u psi'| / (1 + |psi'''|) over the sample points.
inline double linear_problem_residual(const WaveData &w, const Lattice &lat, std::span<const cplx> x_samples)
{
    const std::vector<cplx> cdot = coefficient_rate(w, lat);
    double worst = 0.0;
    for (const cplx x : x_samples) {
        const PsiSample p = detail::psi_eval(x, 0.0, w, lat, cdot);
        const cplx u = potential_u(x, w.state, lat);
        worst = std::max(worst, std::abs(p.dt - p.dx3 - 6.0 * u * p.dx1) / (1.0 + std::abs(p.dx3)));
    }
    return worst;
}

/// Multipliers b, b' with psi(x + 2 omega) = b psi(x), psi(x + 2 omega') = b' psi(x).
inline std::array<cplx, 2> bloch_multipliers(const WaveData &w, const Lattice &lat)
{
    const cplx zl = zeta_w(w.lambda, lat);
    const cplx b = std::exp(2.0 * (lat.omega() * w.z + lat.eta() * w.lambda - zl * lat.omega()));
    const cplx bp = std::exp(2.0 * (lat.omega_prime() * w.z + lat.eta_prime() * w.lambda - zl * lat.omega_prime()));
    return {b, bp};
}

/// max |psi(x + 2 period) - multiplier psi(x)| / |psi(x)| for period index 0 (omega) or 1 (omega').
inline double bloch_residual(const WaveData &w, const Lattice &lat, int which, std::span<const cplx> x_samples)
{
    const auto mult = bloch_multipliers(w, lat);
    const cplx shift = 2.0 * (which == 0 ? lat.omega() : lat.omega_prime());
    const cplx b = mult[which == 0 ? 0 : 1];
    const std::vector<cplx> cdot(w.c.size(), 0.0);
    double worst = 0.0;
    for (const cplx x : x_samples) {
        const cplx a = detail::psi_eval(x, 0.0, w, lat, cdot).value;
        const cplx s = detail::psi_eval(x + shift, 0.0, w, lat, cdot).value;
        worst = std::max(worst, std::abs(s - b * a) / std::abs(a));
    }
    return worst;
}

} // namespace bkp
