#pragma once

// The matrices L(z, lambda), M(z, lambda) of the auxiliary linear problem, the
// spectral polynomial R(z, lambda) = det(3(z^2 - wp(lambda)) I - L) and the explicit
// integrals of motion.
//
// Block conventions (i != k off the diagonal, x_ik = x_i - x_k):
//   A_ik = Phi(x_ik)   B_ik = Phi'(x_ik)   C_ik = Phi''(x_ik)
//   D_ii = sum wp(x_ij)   Dp_ii = sum wp'(x_ij)   Dppp_ii = sum wp'''(x_ij)
//   L = -Xdot - 6z A - 6B + 6D
//   M = -(6z alpha1 + 12 alpha2) I - 6z B - 6z D - 6C + 6Dp

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bkp/dynamics.hpp"
#include "bkp/elliptic.hpp"

namespace bkp
{

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Below this |lambda| the Phi entries are gauged by e^{zeta(lambda) x_ik}.
inline constexpr double kGaugeRadius = 1e-2;

struct MatrixBlocks {
    Matrix X, Xdot;
    Matrix A, B, C;
    Matrix D, Dp, Dppp;
    Matrix Q, E, S;
    Matrix Qp; // wp'(x_ik) off the diagonal
    cplx lambda;
    cplx alpha1, alpha2;
    // zeta(lambda) when the blocks are in the gauge G^{-1}(.)G, zero otherwise.
    cplx gauge_shift = 0.0;
    bool gauged = false;

    std::size_t size() const noexcept { return std::size_t(X.rows()); }
};

struct MatrixPair {
    Matrix L, M;
    cplx z, lambda;
    cplx Lambda; // 3(z^2 - wp(lambda))
};

enum class Gauge { automatic, plain, gauged };

inline MatrixBlocks build_blocks(const PoleState &s, cplx lambda, const Lattice &lat, Gauge gauge = Gauge::automatic)
{
    const auto n = Eigen::Index(s.size());
    if (n == 0 || s.v.size() != s.x.size()) {
        throw std::invalid_argument("build_blocks: need N >= 1 poles with matching velocities");
    }
    MatrixBlocks b;
    b.lambda = lambda;
    b.gauged = gauge == Gauge::gauged || (gauge == Gauge::automatic && std::abs(lambda) < kGaugeRadius);
    const WpDerivs pl = wp_all(lambda, lat);
    b.alpha1 = -0.5 * pl.p;
    b.alpha2 = -pl.p1 / 6.0;
    b.gauge_shift = b.gauged ? zeta_w(lambda, lat) : cplx(0.0);

    b.X = Matrix::Zero(n, n);
    b.Xdot = Matrix::Zero(n, n);
    b.A = b.B = b.C = b.D = b.Dp = b.Dppp = b.Q = b.Qp = b.S = Matrix::Zero(n, n);
    b.E = Matrix::Ones(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        b.X(i, i) = s.x[std::size_t(i)];
        b.Xdot(i, i) = s.v[std::size_t(i)];
        for (Eigen::Index k = 0; k < n; ++k) {
            if (i == k) {
                continue;
            }
            const cplx d = s.x[std::size_t(i)] - s.x[std::size_t(k)];
            const PhiEval f = phi(d, lambda, lat, 2, b.gauged);
            b.A(i, k) = f.value;
            b.B(i, k) = f.dx1;
            b.C(i, k) = f.dx2;
            const WpDerivs w = wp_all(d, lat);
            b.Q(i, k) = w.p;
            b.Qp(i, k) = w.p1;
            b.S(i, k) = zeta_w(d, lat);
            b.D(i, i) += w.p;
            b.Dp(i, i) += w.p1;
            b.Dppp(i, i) += w.p3;
        }
    }
    return b;
}

inline cplx spectral_Lambda(cplx z, const MatrixBlocks &b)
{
    return 3.0 * z * z + 6.0 * b.alpha1;
}

inline MatrixPair build_pair(const MatrixBlocks &b, cplx z)
{
    const auto n = Eigen::Index(b.size());
    const Matrix Id = Matrix::Identity(n, n);
    MatrixPair p;
    p.z = z;
    p.lambda = b.lambda;
    p.Lambda = spectral_Lambda(z, b);
    p.L = -b.Xdot - 6.0 * z * b.A - 6.0 * b.B + 6.0 * b.D;
    p.M = -(6.0 * z * b.alpha1 + 12.0 * b.alpha2) * Id - 6.0 * z * b.B - 6.0 * z * b.D - 6.0 * b.C + 6.0 * b.Dp;
    if (b.gauged) {
        p.M += b.gauge_shift * b.Xdot;
    }
    return p;
}

inline MatrixPair build_pair(const PoleState &s, cplx z, cplx lambda, const Lattice &lat, Gauge gauge = Gauge::automatic)
{
    return build_pair(build_blocks(s, lambda, lat, gauge), z);
}

/// det(Lambda I - L) at one z, straight from the blocks.
inline cplx spectral_det(const MatrixBlocks &b, cplx z)
{
    Matrix K = b.Xdot + 6.0 * z * b.A + 6.0 * b.B - 6.0 * b.D;
    K.diagonal().array() += spectral_Lambda(z, b);
    return K.partialPivLu().determinant();
}

/// R(z, lambda) = sum_k coeffs[k] z^k at fixed lambda.
struct SpectralPoly {
    cplx lambda;
    std::vector<cplx> coeffs;

    std::size_t degree() const noexcept { return coeffs.size() - 1; }

    cplx operator()(cplx z) const
    {
        cplx acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 0;) {
            acc = acc * z + coeffs[k];
        }
        return acc;
    }

    cplx derivative(cplx z) const
    {
        cplx acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 1;) {
            acc = acc * z + double(k) * coeffs[k];
        }
        return acc;
    }
};

/// Coefficients of R(., lambda) from its values at 2N+1 points on the circle of radius
/// 1 + |wp(lambda)|^{1/2}. On roots of unity the Vandermonde system inverts as a discrete
/// Fourier transform.
inline SpectralPoly spectral_poly(const MatrixBlocks &b)
{
    const std::size_t n = 2 * b.size() + 1;
    const double r = 1.0 + std::sqrt(std::abs(-2.0 * b.alpha1));
    std::vector<cplx> values(n);
    for (std::size_t j = 0; j < n; ++j) {
        const cplx node = std::polar(r, 2.0 * std::numbers::pi * double(j) / double(n));
        values[j] = spectral_det(b, node);
    }
    SpectralPoly p{b.lambda, std::vector<cplx>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += values[j] * std::polar(1.0, -2.0 * std::numbers::pi * double((j * k) % n) / double(n));
        }
        p.coeffs[k] = acc / (double(n) * std::pow(r, double(k)));
    }
    return p;
}

inline SpectralPoly spectral_poly(const PoleState &s, cplx lambda, const Lattice &lat)
{
    return spectral_poly(build_blocks(s, lambda, lat));
}

/// Explicit integrals of motion. I3 is only defined for N = 3.
struct IntegralSet {
    cplx I1;
    cplx I2;
    std::optional<cplx> I3;
    cplx J;
};

inline IntegralSet integrals(const PoleState &s, const Model &m)
{
    const std::size_t n = s.size();
    std::vector<cplx> p(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            p[i * n + j] = p[j * n + i] = m.wp_pair(s.x[i] - s.x[j])[0];
        }
    }
    IntegralSet out{};
    cplx kinetic = 0.0, mixed = 0.0, three = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.I1 += s.v[i];
        kinetic += s.v[i] * s.v[i];
        cplx sp = 0.0, sp2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            mixed += s.v[i] * p[i * n + j];
            sp += p[i * n + j];
            sp2 += p[i * n + j] * p[i * n + j];
        }
        // Ordered triples of distinct indices with i first.
        three += sp * sp - sp2;
    }
    out.I2 = 0.5 * kinetic + 6.0 * mixed - 18.0 * three;

    if (n == 3) {
        const auto &v = s.v;
        const cplx p12 = p[0 * 3 + 1], p13 = p[0 * 3 + 2], p23 = p[1 * 3 + 2];
        out.I3 = (v[0] * v[0] * v[0] + v[1] * v[1] * v[1] + v[2] * v[2] * v[2]) / 3.0 +
                 6.0 * v[0] * v[0] * (p12 + p13) + 6.0 * v[1] * v[1] * (p12 + p23) + 6.0 * v[2] * v[2] * (p13 + p23) +
                 12.0 * (v[0] * v[1] * p12 + v[0] * v[2] * p13 + v[1] * v[2] * p23) - 864.0 * p12 * p13 * p23;
    }

    Matrix K = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
        cplx d = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                K(Eigen::Index(i), Eigen::Index(j)) = -6.0 * p[i * n + j];
                d += p[i * n + j];
            }
        }
        K(Eigen::Index(i), Eigen::Index(i)) = s.v[i] - 6.0 * d;
    }
    out.J = K.partialPivLu().determinant();
    return out;
}

inline IntegralSet integrals(const PoleState &s, const Lattice &lat)
{
    return integrals(s, Model::elliptic(lat));
}

namespace detail
{

// Ldot + [L, M] + 12 Dp (L - Lambda I) for a prescribed acceleration, and Ddot.
inline Matrix triple_lhs(const PoleState &s, const std::vector<cplx> &accel, const MatrixBlocks &b,
                         const MatrixPair &p, Matrix &Ddot)
{
    const auto n = Eigen::Index(b.size());
    if (accel.size() != b.size()) {
        throw std::invalid_argument("accelerations must have one entry per pole");
    }
    Matrix Adot = Matrix::Zero(n, n), Bdot = Matrix::Zero(n, n), Xdd = Matrix::Zero(n, n);
    Ddot = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Xdd(i, i) = accel[std::size_t(i)];
        for (Eigen::Index k = 0; k < n; ++k) {
            if (i == k) {
                continue;
            }
            const cplx vik = s.v[std::size_t(i)] - s.v[std::size_t(k)];
            Adot(i, k) = vik * (b.B(i, k) + b.gauge_shift * b.A(i, k));
            Bdot(i, k) = vik * (b.C(i, k) + b.gauge_shift * b.B(i, k));
            Ddot(i, i) += vik * b.Qp(i, k);
        }
    }
    const Matrix Id = Matrix::Identity(n, n);
    const Matrix Ldot = -Xdd - 6.0 * p.z * Adot - 6.0 * Bdot + 6.0 * Ddot;
    return Ldot + (p.L * p.M - p.M * p.L) + 12.0 * b.Dp * (p.L - p.Lambda * Id);
}

} // namespace detail

/// Frobenius norm of the unconditional matrix identity
///   Ldot + [L,M] + 12 Dp (L - Lambda I) + Xddot - 12 Dp (6D - Xdot) - 6 Ddot + 6 Dppp = 0,
/// which holds for any acceleration list.
inline double manakov_identity_residual(const PoleState &s, const std::vector<cplx> &accel, cplx z, cplx lambda,
                                        const Lattice &lat)
{
    const MatrixBlocks b = build_blocks(s, lambda, lat);
    const MatrixPair p = build_pair(b, z);
    Matrix Ddot;
    Matrix r = detail::triple_lhs(s, accel, b, p, Ddot);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        r(i, i) += accel[std::size_t(i)];
    }
    r += -12.0 * b.Dp * (6.0 * b.D - b.Xdot) - 6.0 * Ddot + 6.0 * b.Dppp;
    return r.norm();
}

/// Frobenius norm of Ldot + [L,M] + 12 Dp (L - Lambda I) for the given accelerations;
/// vanishes exactly when they satisfy the equations of motion.
inline double triple_residual(const PoleState &s, const std::vector<cplx> &accel, cplx z, cplx lambda,
                              const Lattice &lat)
{
    const MatrixBlocks b = build_blocks(s, lambda, lat);
    const MatrixPair p = build_pair(b, z);
    Matrix Ddot;
    return detail::triple_lhs(s, accel, b, p, Ddot).norm();
}

inline double triple_residual(const PoleState &s, cplx z, cplx lambda, const Lattice &lat)
{
    return triple_residual(s, acceleration(s, Model::elliptic(lat)), z, lambda, lat);
}

/// R(1/lambda, lambda), assembled so that the O(lambda^-2) parts of the entries cancel analytically.
inline cplx spectral_det_at_inverse(const PoleState &s, cplx lambda, const Lattice &lat)
{
    const auto n = Eigen::Index(s.size());
    // Lambda = 3(1/lambda^2 - wp(lambda)); off-diagonal 6zA + 6B = 6 Phi~ (zeta(x+l) - zeta(x) + 1/l - zeta(l)).
    const cplx Lambda = -3.0 * wp_regular(lambda, lat);
    const cplx zl_reg = zeta_regular(lambda, lat);
    Matrix K = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx d = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (i == k) {
                continue;
            }
            const cplx x = s.x[std::size_t(i)] - s.x[std::size_t(k)];
            const PhiEval f = phi(x, lambda, lat, 0, true);
            K(i, k) = 6.0 * f.value * (zeta_w(x + lambda, lat) - zeta_w(x, lat) - zl_reg);
            d += wp(x, lat);
        }
        K(i, i) = Lambda + s.v[std::size_t(i)] - 6.0 * d;
    }
    return K.partialPivLu().determinant();
}

/// |R(1/lambda, lambda) - J| at lambda = magnitude (1+i)/sqrt(2).
inline double j_limit_residual(const PoleState &s, const Lattice &lat, double magnitude = 1e-3)
{
    const cplx lambda = magnitude * cplx(1.0, 1.0) / std::sqrt(2.0);
    return std::abs(spectral_det_at_inverse(s, lambda, lat) - integrals(s, lat).J);
}

} // namespace bkp
