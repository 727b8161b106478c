#pragma once

// Weierstrass sigma, zeta and wp on a general complex period lattice, plus the
// Lame-type kernel Phi(x, lambda) = sigma(x+lambda) / (sigma(lambda) sigma(x)) e^{-zeta(lambda) x}.
//
// Conventions: the lattice is generated by 2*omega and 2*omega_prime with
// Im(omega_prime / omega) > 0; eta = zeta(omega), eta_prime = zeta(omega_prime).
// Everything is evaluated by reducing the argument to the period cell centred at
// the origin and summing the nome expansions in q = exp(i pi tau).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace bkp
{

using cplx = std::complex<double>;

inline constexpr cplx I_unit{0.0, 1.0};

/// Raised when an argument lands within the pole guard radius of a lattice point.
class pole_error : public std::domain_error
{
public:
    pole_error(const std::string &what, double distance)
        : std::domain_error(what + " (distance to lattice " + std::to_string(distance) + ")"),
          m_distance(distance)
    {
    }
    double distance() const noexcept
    {
        return m_distance;
    }

private:
    double m_distance;
};

/// Value and x-derivatives of Phi(x, lambda), together with its Laurent data at x = 0.
///
/// When produced in the gauged form every field except alpha1/alpha2 carries the
/// extra factor e^{zeta(lambda) x}.
struct PhiEval {
    cplx value;
    cplx dx1;
    cplx dx2;
    cplx dx3;
    cplx alpha1; // -wp(lambda)/2
    cplx alpha2; // -wp'(lambda)/6
};

/// wp and its first three derivatives at one point.
struct WpDerivs {
    cplx p;
    cplx p1;
    cplx p2;
    cplx p3;
};

class Lattice;
Lattice make_lattice(cplx omega, cplx omega_prime);

/// Immutable period lattice with its invariants and quasi-period constants.
class Lattice
{
public:
    struct Reduced {
        cplx z;   // representative in the centred period cell
        long m;   // multiples of 2*omega removed
        long mp;  // multiples of 2*omega_prime removed
    };

    cplx omega() const noexcept { return m_omega; }
    cplx omega_prime() const noexcept { return m_omega_prime; }
    cplx tau() const noexcept { return m_tau; }
    cplx nome() const noexcept { return m_q; }
    cplx g2() const noexcept { return m_g2; }
    cplx g3() const noexcept { return m_g3; }
    cplx eta() const noexcept { return m_eta; }
    cplx eta_prime() const noexcept { return m_eta_prime; }

    /// Inputs closer than this to a lattice point are rejected as poles.
    double pole_guard() const noexcept { return 1e-6 * std::abs(2.0 * m_omega); }
    double min_period() const noexcept
    {
        return std::min(std::abs(2.0 * m_omega), std::abs(2.0 * m_omega_prime));
    }

    Reduced reduce(cplx z) const
    {
        const cplx w = z / (2.0 * m_omega);
        const double b = w.imag() / m_tau.imag();
        const double a = w.real() - b * m_tau.real();
        const double mp = std::round(b);
        const double m = std::round(a);
        const cplx zr = z - 2.0 * m * m_omega - 2.0 * mp * m_omega_prime;
        return {zr, static_cast<long>(m), static_cast<long>(mp)};
    }

    /// Distance from z to the nearest lattice point.
    double lattice_distance(cplx z) const
    {
        const cplx zr = reduce(z).z;
        double best = std::abs(zr);
        for (int i = -1; i <= 1; ++i) {
            for (int j = -1; j <= 1; ++j) {
                best = std::min(best, std::abs(zr - 2.0 * double(i) * m_omega - 2.0 * double(j) * m_omega_prime));
            }
        }
        return best;
    }

    // Lambert coefficients 1 / (1 - q^{2n}) and the powers q^{2n}, n >= 1.
    const std::vector<cplx> &lambert_inv() const noexcept { return m_inv; }
    const std::vector<cplx> &q2n() const noexcept { return m_q2n; }

    friend Lattice make_lattice(cplx omega, cplx omega_prime);

private:
    Lattice() = default;

    cplx m_omega, m_omega_prime, m_tau, m_q;
    cplx m_g2, m_g3, m_eta, m_eta_prime;
    std::vector<cplx> m_inv, m_q2n;
};

namespace detail
{

inline void guard(const Lattice &lat, cplx z, const char *who)
{
    const double d = lat.lattice_distance(z);
    if (d < lat.pole_guard()) {
        throw pole_error(std::string(who) + ": argument on the period lattice", d);
    }
}

// cot(v) - 1/v and csc^2(v) - 1/v^2 without cancellation for small v.
inline cplx cot_regular(cplx v)
{
    if (std::abs(v) > 0.2) {
        return std::cos(v) / std::sin(v) - 1.0 / v;
    }
    static constexpr std::array<double, 7> c{1.0 / 3.0,          1.0 / 45.0,        2.0 / 945.0,       1.0 / 4725.0,
                                             2.0 / 93555.0,      1382.0 / 638512875.0, 4.0 / 18243225.0};
    const cplx v2 = v * v;
    cplx acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        acc = acc * v2 + c[k];
    }
    return -v * acc;
}

inline cplx csc2_regular(cplx v)
{
    if (std::abs(v) > 0.2) {
        const cplx s = std::sin(v);
        return 1.0 / (s * s) - 1.0 / (v * v);
    }
    // -(d/dv) of cot_regular
    static constexpr std::array<double, 7> c{1.0 / 3.0,          1.0 / 45.0,        2.0 / 945.0,       1.0 / 4725.0,
                                             2.0 / 93555.0,      1382.0 / 638512875.0, 4.0 / 18243225.0};
    const cplx v2 = v * v;
    cplx acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        acc = acc * v2 + double(2 * k + 1) * c[k];
    }
    return acc;
}

// Trigonometric parts of the nome expansions at a reduced argument.
struct SeriesSums {
    cplx s0; // sum 1/(1-q^2n) q^2n sin(2nv)
    cplx c1; // sum n   ... cos
    cplx s2; // sum n^2 ... sin
    cplx c3; // sum n^3 ... cos
    cplx s4; // sum n^4 ... sin
};

inline SeriesSums series_sums(const Lattice &lat, cplx v)
{
    // q^{2n} e^{+-2inv} = exp(2n (i pi tau +- i v)); bounded by |q|^n on the reduced cell.
    const cplx step_p = std::exp(2.0 * I_unit * (std::numbers::pi * lat.tau() + v));
    const cplx step_m = std::exp(2.0 * I_unit * (std::numbers::pi * lat.tau() - v));
    cplx ep = 1.0, em = 1.0;
    SeriesSums s{};
    const auto &inv = lat.lambert_inv();
    for (std::size_t i = 0; i < inv.size(); ++i) {
        ep *= step_p;
        em *= step_m;
        const double n = double(i + 1);
        const cplx cs = 0.5 * (ep + em) * inv[i];
        const cplx sn = (ep - em) / (2.0 * I_unit) * inv[i];
        s.s0 += sn;
        s.c1 += n * cs;
        s.s2 += n * n * sn;
        s.c3 += n * n * n * cs;
        s.s4 += n * n * n * n * sn;
    }
    return s;
}

inline cplx sum_eisenstein(const Lattice &lat, int power)
{
    cplx acc = 0.0;
    const auto &inv = lat.lambert_inv();
    const auto &q2 = lat.q2n();
    for (std::size_t i = 0; i < inv.size(); ++i) {
        acc += std::pow(double(i + 1), power) * q2[i] * inv[i];
    }
    return acc;
}

// zeta on a reduced argument, without the 1/z part when `regular` is set.
inline cplx zeta_reduced(const Lattice &lat, cplx zr, bool regular)
{
    const cplx k = std::numbers::pi / (2.0 * lat.omega());
    const cplx v = k * zr;
    const SeriesSums s = series_sums(lat, v);
    const cplx head = regular ? cot_regular(v) : std::cos(v) / std::sin(v);
    return lat.eta() * zr / lat.omega() + k * (head + 4.0 * s.s0);
}

inline WpDerivs wp_reduced(const Lattice &lat, cplx zr, bool regular)
{
    const cplx k = std::numbers::pi / (2.0 * lat.omega());
    const cplx v = k * zr;
    const SeriesSums s = series_sums(lat, v);
    const cplx sn = std::sin(v);
    const cplx csc2 = 1.0 / (sn * sn);
    const cplx cot = std::cos(v) / sn;
    const cplx k2 = k * k;
    WpDerivs r;
    r.p = -lat.eta() / lat.omega() + k2 * ((regular ? csc2_regular(v) : csc2) - 8.0 * s.c1);
    r.p1 = k2 * k * (-2.0 * csc2 * cot + 16.0 * s.s2);
    r.p2 = k2 * k2 * (2.0 * csc2 * (2.0 * cot * cot + csc2) + 32.0 * s.c3);
    r.p3 = k2 * k2 * k * (-8.0 * csc2 * cot * cot * cot - 16.0 * csc2 * csc2 * cot - 64.0 * s.s4);
    return r;
}

} // namespace detail

/// Builds the lattice with periods 2*omega, 2*omega_prime.
///
/// Throws std::domain_error for a zero period, for Im(omega_prime/omega) <= 0, and for
/// lattices so skewed that the nome expansions would need more than 600 terms.
inline Lattice make_lattice(cplx omega, cplx omega_prime)
{
    if (omega == 0.0 || omega_prime == 0.0) {
        throw std::domain_error("make_lattice: periods must be nonzero");
    }
    const cplx tau = omega_prime / omega;
    if (!(tau.imag() > 0.0)) {
        throw std::domain_error("make_lattice: Im(omega_prime/omega) must be positive");
    }
    Lattice lat;
    lat.m_omega = omega;
    lat.m_omega_prime = omega_prime;
    lat.m_tau = tau;
    lat.m_q = std::exp(I_unit * std::numbers::pi * tau);

    // Terms needed so that n^4 |q|^n drops below 1e-19 (worst case on the cell boundary).
    const double qa = std::abs(lat.m_q);
    std::size_t n = 1;
    while (std::pow(double(n), 4) * std::pow(qa, double(n)) > 1e-19) {
        if (++n > 600) {
            throw std::domain_error("make_lattice: Im(tau) too small for the nome expansion");
        }
    }
    const std::size_t terms = n + 2;
    lat.m_inv.resize(terms);
    lat.m_q2n.resize(terms);
    const cplx q2 = lat.m_q * lat.m_q;
    cplx qp = 1.0;
    for (std::size_t i = 0; i < terms; ++i) {
        qp *= q2;
        lat.m_q2n[i] = qp;
        lat.m_inv[i] = 1.0 / (1.0 - qp);
    }

    const cplx k = std::numbers::pi / (2.0 * omega);
    const cplx k2 = k * k;
    const cplx e2 = 1.0 - 24.0 * detail::sum_eisenstein(lat, 1);
    const cplx e4 = 1.0 + 240.0 * detail::sum_eisenstein(lat, 3);
    const cplx e6 = 1.0 - 504.0 * detail::sum_eisenstein(lat, 5);
    lat.m_eta = std::numbers::pi * std::numbers::pi / (12.0 * omega) * e2;
    lat.m_g2 = 4.0 / 3.0 * k2 * k2 * e4;
    lat.m_g3 = 8.0 / 27.0 * k2 * k2 * k2 * e6;
    // zeta(omega_prime) summed directly on the cell boundary, so the Legendre relation
    // is a genuine consistency check rather than a definition.
    lat.m_eta_prime = detail::zeta_reduced(lat, omega_prime, false);
    return lat;
}

/// wp and derivatives up to order 3 at z.
inline WpDerivs wp_all(cplx z, const Lattice &lat)
{
    detail::guard(lat, z, "wp");
    return detail::wp_reduced(lat, lat.reduce(z).z, false);
}

/// wp^{(order)}(z), order in 0..3.
inline cplx wp(cplx z, const Lattice &lat, int order = 0)
{
    if (order < 0 || order > 3) {
        throw std::invalid_argument("wp: order must be in 0..3");
    }
    const WpDerivs d = wp_all(z, lat);
    switch (order) {
        case 0:
            return d.p;
        case 1:
            return d.p1;
        case 2:
            return d.p2;
        default:
            return d.p3;
    }
}

inline cplx zeta_w(cplx z, const Lattice &lat)
{
    detail::guard(lat, z, "zeta");
    const auto r = lat.reduce(z);
    return detail::zeta_reduced(lat, r.z, false) + 2.0 * double(r.m) * lat.eta() + 2.0 * double(r.mp) * lat.eta_prime();
}

/// zeta(z) - 1/z, accurate for small z. Only valid inside the centred cell.
inline cplx zeta_regular(cplx z, const Lattice &lat)
{
    const auto r = lat.reduce(z);
    if (r.m != 0 || r.mp != 0) {
        return zeta_w(z, lat) - 1.0 / z;
    }
    return detail::zeta_reduced(lat, z, true);
}

/// wp(z) - 1/z^2, accurate for small z.
inline cplx wp_regular(cplx z, const Lattice &lat)
{
    const auto r = lat.reduce(z);
    if (r.m != 0 || r.mp != 0) {
        return wp(z, lat) - 1.0 / (z * z);
    }
    return detail::wp_reduced(lat, z, true).p;
}

/// Principal-branch-free log sigma: exp(log_sigma(z)) == sigma(z). Returns -inf real part on the lattice.
inline cplx log_sigma(cplx z, const Lattice &lat)
{
    const auto r = lat.reduce(z);
    const cplx k = std::numbers::pi / (2.0 * lat.omega());
    const cplx v = k * r.z;
    // theta_1(v) / theta_1'(0) with the common q^{1/4} removed.
    cplx num = 0.0, den = 0.0;
    const cplx logq = I_unit * std::numbers::pi * lat.tau();
    for (int n = 0; n < 64; ++n) {
        const cplx qn = std::exp(logq * double(n * (n + 1)));
        const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
        const cplx tn = sgn * qn * std::sin(double(2 * n + 1) * v);
        num += tn;
        den += sgn * double(2 * n + 1) * qn;
        if (n > 2 && std::abs(tn) <= 1e-18 * std::abs(num) && std::abs(qn) < 1e-18) {
            break;
        }
    }
    cplx out = std::log(num / (den * k)) + lat.eta() * r.z * r.z / (2.0 * lat.omega());
    if (r.m != 0 || r.mp != 0) {
        const double m = double(r.m), mp = double(r.mp);
        const cplx H = 2.0 * m * lat.eta() + 2.0 * mp * lat.eta_prime();
        const cplx halfW = m * lat.omega() + mp * lat.omega_prime();
        const long parity = r.m + r.mp + r.m * r.mp;
        out += H * (r.z + halfW) + I_unit * std::numbers::pi * double(parity % 2);
    }
    return out;
}

inline cplx sigma_w(cplx z, const Lattice &lat)
{
    return std::exp(log_sigma(z, lat));
}

/// Phi(x, lambda) and its x-derivatives up to `order`.
///
/// With `gauged` set the result is multiplied by e^{zeta(lambda) x}, which removes the
/// essential singularity at lambda = 0. Derivatives use the logarithmic derivative
/// g = zeta(x+lambda) - zeta(x) - zeta(lambda): Phi' = Phi g, g' = wp(x) - wp(x+lambda).
inline PhiEval phi(cplx x, cplx lambda, const Lattice &lat, int order = 3, bool gauged = false)
{
    detail::guard(lat, x, "phi(x)");
    detail::guard(lat, lambda, "phi(lambda)");
    detail::guard(lat, x + lambda, "phi(x+lambda)");
    const cplx zl = zeta_w(lambda, lat);
    const WpDerivs pl = wp_all(lambda, lat);
    cplx logv = log_sigma(x + lambda, lat) - log_sigma(lambda, lat) - log_sigma(x, lat);
    if (!gauged) {
        logv -= zl * x;
    }
    PhiEval r{};
    r.value = std::exp(logv);
    r.alpha1 = -0.5 * pl.p;
    r.alpha2 = -pl.p1 / 6.0;
    if (order >= 1) {
        const cplx g = zeta_w(x + lambda, lat) - zeta_w(x, lat) - zl;
        r.dx1 = r.value * g;
        if (order >= 2) {
            const WpDerivs px = wp_all(x, lat);
            const WpDerivs pxl = wp_all(x + lambda, lat);
            const cplx g1 = px.p - pxl.p;
            const cplx g2 = px.p1 - pxl.p1;
            r.dx2 = r.value * (g * g + g1);
            if (order >= 3) {
                r.dx3 = r.value * (g * g * g + 3.0 * g * g1 + g2);
            }
        }
    }
    return r;
}

} // namespace bkp
