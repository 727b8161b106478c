#pragma once

// Randomised property checks for the Phi-kernel and Weierstrass identities used in the
// pole-dynamics derivation. Each case returns its two sides separately so that the
// normalised residual |L - R| / (1 + |L| + |R|) stays meaningful when one side is zero.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bkp/elliptic.hpp"

namespace bkp
{

/// No admissible point was found in 1000 consecutive draws.
class resampling_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct IdentitySides {
    cplx lhs;
    cplx rhs;
};

struct IdentityCase {
    std::string id;
    int arity = 0;
    double tolerance = 1e-8;
    std::function<IdentitySides(std::span<const cplx>, const Lattice &)> sides;
    /// Every argument, sum or difference that must stay off the lattice.
    std::function<std::vector<cplx>(std::span<const cplx>)> guarded;
};

struct IdentityReport {
    std::string id;
    int draws = 0;
    double max_residual = 0.0;
    std::vector<cplx> worst_point;
    double tolerance = 1e-8;
    std::string error; // empty unless the sweep could not run

    bool passed() const { return error.empty() && max_residual < tolerance; }
};

inline double normalized_residual(const IdentitySides &s)
{
    return std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs) + std::abs(s.rhs));
}

namespace detail
{

inline PhiEval phi2(cplx x, cplx lambda, const Lattice &lat) { return phi(x, lambda, lat, 2); }

// Arguments touched by Phi(u, lambda).
inline void push_phi_args(std::vector<cplx> &out, cplx u, cplx lambda)
{
    out.push_back(u);
    out.push_back(u + lambda);
}

inline std::vector<cplx> pair_phi_guard(cplx x, cplx y, cplx lambda)
{
    std::vector<cplx> g{lambda};
    push_phi_args(g, x, lambda);
    push_phi_args(g, y, lambda);
    push_phi_args(g, x + y, lambda);
    return g;
}

inline std::vector<cplx> odd_phi_guard(cplx x, cplx lambda)
{
    std::vector<cplx> g{lambda};
    push_phi_args(g, x, lambda);
    push_phi_args(g, -x, lambda);
    return g;
}

inline std::vector<cplx> pairwise(std::span<const cplx> a)
{
    std::vector<cplx> g;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            g.push_back(a[i] - a[j]);
        }
    }
    return g;
}

// d/dx_i of prod_{j != i} wp(x_i - x_j) over a group of points.
inline cplx cyclic_term(std::span<const cplx> pts, std::size_t i, const Lattice &lat)
{
    std::vector<WpDerivs> w;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j != i) {
            w.push_back(wp_all(pts[i] - pts[j], lat));
        }
    }
    cplx total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        cplx term = w[k].p1;
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (j != k) {
                term *= w[j].p;
            }
        }
        total += term;
    }
    return total;
}

} // namespace detail

/// Phi(x)Phi'(y) - Phi(y)Phi'(x) = Phi(x+y)(wp(x) - wp(y)).
inline IdentitySides phi_wronskian_sides(cplx x, cplx y, cplx lambda, const Lattice &lat)
{
    const PhiEval fx = detail::phi2(x, lambda, lat), fy = detail::phi2(y, lambda, lat);
    const PhiEval fs = detail::phi2(x + y, lambda, lat);
    return {fx.value * fy.dx1 - fy.value * fx.dx1, fs.value * (wp(x, lat) - wp(y, lat))};
}

/// Phi(x)Phi''(y) - Phi(y)Phi''(x) = 2Phi'(x+y)(wp(x) - wp(y)) + Phi(x+y)(wp'(x) - wp'(y)).
inline IdentitySides phi_second_wronskian_sides(cplx x, cplx y, cplx lambda, const Lattice &lat)
{
    const PhiEval fx = detail::phi2(x, lambda, lat), fy = detail::phi2(y, lambda, lat);
    const PhiEval fs = detail::phi2(x + y, lambda, lat);
    const WpDerivs wx = wp_all(x, lat), wy = wp_all(y, lat);
    return {fx.value * fy.dx2 - fy.value * fx.dx2, 2.0 * fs.dx1 * (wx.p - wy.p) + fs.value * (wx.p1 - wy.p1)};
}

/// Phi'(x)Phi''(y) - Phi'(y)Phi''(x) = Phi''(x+y)(wp(x) - wp(y)) + Phi'(x+y)(wp'(x) - wp'(y)).
inline IdentitySides phi_mixed_wronskian_sides(cplx x, cplx y, cplx lambda, const Lattice &lat)
{
    const PhiEval fx = detail::phi2(x, lambda, lat), fy = detail::phi2(y, lambda, lat);
    const PhiEval fs = detail::phi2(x + y, lambda, lat);
    const WpDerivs wx = wp_all(x, lat), wy = wp_all(y, lat);
    return {fx.dx1 * fy.dx2 - fy.dx1 * fx.dx2, fs.dx2 * (wx.p - wy.p) + fs.dx1 * (wx.p1 - wy.p1)};
}

namespace detail
{

// wp(x) - wp(y) = -sigma(x+y) sigma(x-y) / (sigma(x)^2 sigma(y)^2), free of cancellation when y is near -x.
inline cplx wp_difference(cplx x, cplx y, const Lattice &lat)
{
    return -std::exp(log_sigma(x + y, lat) + log_sigma(x - y, lat) - 2.0 * log_sigma(x, lat) - 2.0 * log_sigma(y, lat));
}

} // namespace detail

struct NearLimitSides {
    cplx lhs;
    cplx rhs;
    double scale; // sum of the magnitudes of the terms that cancel in rhs
};

inline double normalized_residual(const NearLimitSides &s)
{
    return std::abs(s.lhs - s.rhs) / (1.0 + std::abs(s.lhs) + s.scale);
}

/// Parent identity of A3, A7 or A8 evaluated at y = -x + eps rather than in the limit.
///
/// The right-hand side is a difference of terms of order |eps|^-1 (A7) or |eps|^-2 (A8), so
/// the residual is measured against their size instead of against the cancelled sum.
inline NearLimitSides near_limit_sides(const std::string &id, cplx x, cplx eps, cplx lambda, const Lattice &lat)
{
    const cplx y = -x + eps;
    const PhiEval fx = detail::phi2(x, lambda, lat), fy = detail::phi2(y, lambda, lat);
    const PhiEval fs = detail::phi2(eps, lambda, lat);
    const cplx dp = detail::wp_difference(x, y, lat);
    const cplx dp1 = wp(x, lat, 1) - wp(y, lat, 1);
    cplx t1, t2, lhs;
    if (id == "A3") {
        lhs = fx.value * fy.dx1 - fy.value * fx.dx1;
        t1 = fs.value * dp;
        t2 = 0.0;
    } else if (id == "A7") {
        lhs = fx.value * fy.dx2 - fy.value * fx.dx2;
        t1 = 2.0 * fs.dx1 * dp;
        t2 = fs.value * dp1;
    } else if (id == "A8") {
        lhs = fx.dx1 * fy.dx2 - fy.dx1 * fx.dx2;
        t1 = fs.dx2 * dp;
        t2 = fs.dx1 * dp1;
    } else {
        throw std::invalid_argument("near_limit_sides: no limit form for case " + id);
    }
    return {lhs, t1 + t2, std::abs(t1) + std::abs(t2)};
}

/// The registered catalogue, in report order.
inline const std::vector<IdentityCase> &identity_cases()
{
    using A = std::span<const cplx>;
    using L = const Lattice &;
    static const std::vector<IdentityCase> cases = [] {
        std::vector<IdentityCase> c;
        auto pair_guard = [](A a) { return detail::pair_phi_guard(a[0], a[1], a[2]); };
        auto odd_guard = [](A a) { return detail::odd_phi_guard(a[0], a[1]); };
        auto wp_lambda_guard = [](A a) { return std::vector<cplx>{a[0], a[1], a[0] + a[1], a[0] - a[1]}; };

        c.push_back({"A1", 3, 1e-8, [](A a, L lat) { return phi_wronskian_sides(a[0], a[1], a[2], lat); }, pair_guard});
        c.push_back({"A2", 3, 1e-8,
                     [](A a, L lat) {
                         const cplx x = a[0], y = a[1], l = a[2];
                         return IdentitySides{phi(x, l, lat, 0).value * phi(y, l, lat, 0).value,
                                              phi(x + y, l, lat, 0).value * (zeta_w(x, lat) + zeta_w(y, lat) -
                                                                             zeta_w(x + y + l, lat) + zeta_w(l, lat))};
                     },
                     pair_guard});
        c.push_back({"A3", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         return IdentitySides{p.value * m.dx1 - m.value * p.dx1, wp(a[0], lat, 1)};
                     },
                     odd_guard});
        c.push_back(
            {"A5", 3, 1e-8, [](A a, L lat) { return phi_second_wronskian_sides(a[0], a[1], a[2], lat); }, pair_guard});
        c.push_back(
            {"A6", 3, 1e-8, [](A a, L lat) { return phi_mixed_wronskian_sides(a[0], a[1], a[2], lat); }, pair_guard});
        c.push_back({"A7", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         return IdentitySides{p.value * m.dx2, m.value * p.dx2};
                     },
                     odd_guard});
        c.push_back({"A8", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         const WpDerivs w = wp_all(a[0], lat);
                         return IdentitySides{p.dx1 * m.dx2 - m.dx1 * p.dx2, -w.p3 / 6.0 + 2.0 * p.alpha1 * w.p1};
                     },
                     odd_guard});
        c.push_back({"A11", 2, 1e-8,
                     [](A a, L lat) {
                         return IdentitySides{phi(a[0], a[1], lat, 0).value * phi(-a[0], a[1], lat, 0).value,
                                              wp(a[1], lat) - wp(a[0], lat)};
                     },
                     odd_guard});
        c.push_back({"A12", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         return IdentitySides{p.dx1 * m.value + m.dx1 * p.value, wp(a[1], lat, 1)};
                     },
                     odd_guard});
        c.push_back({"A13", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         const cplx px = wp(a[0], lat), pl = wp(a[1], lat);
                         return IdentitySides{p.dx1 * m.dx1, px * px + pl * px + pl * pl - 0.25 * lat.g2()};
                     },
                     odd_guard});
        c.push_back({"A14", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         const cplx px = wp(a[0], lat), pl = wp(a[1], lat);
                         return IdentitySides{p.value * m.dx2, pl * pl + pl * px - 2.0 * px * px};
                     },
                     odd_guard});
        c.push_back({"A15", 2, 1e-8,
                     [](A a, L lat) {
                         const PhiEval p = detail::phi2(a[0], a[1], lat), m = detail::phi2(-a[0], a[1], lat);
                         const WpDerivs wx = wp_all(a[0], lat), wl = wp_all(a[1], lat);
                         return IdentitySides{p.dx1 * m.dx2, (wl.p1 - wx.p1) * (wx.p + 0.5 * wl.p)};
                     },
                     odd_guard});
        c.push_back({"A16", 2, 1e-8,
                     [](A a, L lat) {
                         const cplx x = a[0], l = a[1];
                         return IdentitySides{2.0 * zeta_w(l, lat) - zeta_w(l + x, lat) - zeta_w(l - x, lat),
                                              wp(l, lat, 1) / (wp(x, lat) - wp(l, lat))};
                     },
                     wp_lambda_guard});
        c.push_back({"A16a", 1, 1e-8,
                     [](A a, L lat) {
                         const WpDerivs w = wp_all(a[0], lat);
                         return IdentitySides{w.p1 * w.p1, 4.0 * w.p * w.p * w.p - lat.g2() * w.p - lat.g3()};
                     },
                     [](A a) { return std::vector<cplx>{a[0]}; }});
        c.push_back({"A17", 2, 1e-8,
                     [](A a, L lat) {
                         const WpDerivs wx = wp_all(a[0], lat), wl = wp_all(a[1], lat);
                         const cplx d = wx.p - wl.p;
                         return IdentitySides{wp(a[0] + a[1], lat) - wp(a[0] - a[1], lat), -wl.p1 * wx.p1 / (d * d)};
                     },
                     wp_lambda_guard});
        c.push_back({"A18", 2, 1e-8,
                     [](A a, L lat) {
                         const WpDerivs wx = wp_all(a[0], lat), wl = wp_all(a[1], lat);
                         const cplx d = wx.p - wl.p;
                         return IdentitySides{wp(a[0] + a[1], lat) + wp(a[0] - a[1], lat),
                                              0.5 * (wx.p1 * wx.p1 + wl.p1 * wl.p1) / (d * d) - 2.0 * (wx.p + wl.p)};
                     },
                     wp_lambda_guard});
        c.push_back({"A19", 2, 1e-8,
                     [](A a, L lat) {
                         const cplx x = a[0], s = a[1];
                         const WpDerivs wx = wp_all(x, lat);
                         const cplx pxa = wp(x - s, lat), pa = wp(s, lat);
                         const cplx lhs = 2.0 * wx.p * (pxa + pa + wx.p) -
                                          wx.p1 * (zeta_w(x - s, lat) + zeta_w(s, lat) - zeta_w(x, lat));
                         return IdentitySides{lhs, wx.p * pa + wx.p * pxa + pa * pxa + 0.25 * lat.g2()};
                     },
                     [](A a) { return std::vector<cplx>{a[0], a[1], a[0] - a[1]}; }});
        c.push_back({"a8", 3, 1e-8,
                     [](A a, L lat) {
                         return IdentitySides{detail::cyclic_term(a, 0, lat),
                                              -(detail::cyclic_term(a, 1, lat) + detail::cyclic_term(a, 2, lat))};
                     },
                     detail::pairwise});
        c.push_back({"a9", 4, 1e-8,
                     [](A a, L lat) {
                         return IdentitySides{detail::cyclic_term(a, 0, lat) + detail::cyclic_term(a, 1, lat),
                                              -(detail::cyclic_term(a, 2, lat) + detail::cyclic_term(a, 3, lat))};
                     },
                     detail::pairwise});
        c.push_back({"wp3", 1, 1e-8,
                     [](A a, L lat) {
                         const WpDerivs w = wp_all(a[0], lat);
                         return IdentitySides{w.p3, 12.0 * w.p * w.p1};
                     },
                     [](A a) { return std::vector<cplx>{a[0]}; }});
        c.push_back({"det3", 3, 1e-8,
                     [](A a, L lat) {
                         // rows (1, wp(u), wp'(u)) for u = x_ij, x_jk, x_ki; expanded along the first column
                         const WpDerivs r1 = wp_all(a[0] - a[1], lat), r2 = wp_all(a[1] - a[2], lat),
                                        r3 = wp_all(a[2] - a[0], lat);
                         return IdentitySides{r2.p * r3.p1 + r1.p * r2.p1 + r3.p * r1.p1,
                                              r3.p * r2.p1 + r2.p * r1.p1 + r1.p * r3.p1};
                     },
                     detail::pairwise});
        return c;
    }();
    return cases;
}

inline const IdentityCase &identity_case(const std::string &id)
{
    for (const IdentityCase &c : identity_cases()) {
        if (c.id == id) {
            return c;
        }
    }
    throw std::invalid_argument("unknown identity case: " + id);
}

namespace detail
{

inline double uniform53(std::mt19937_64 &gen) { return double(gen() >> 11) * 0x1.0p-53; }

inline std::mt19937_64 case_generator(const std::string &id, std::uint64_t seed)
{
    std::vector<std::uint32_t> words{std::uint32_t(seed), std::uint32_t(seed >> 32)};
    for (const char ch : id) {
        words.push_back(std::uint32_t(static_cast<unsigned char>(ch)));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

} // namespace detail

/// Evaluates one case at `draws` seeded points of the centred fundamental cell.
///
/// A point is rejected when any guarded combination lies within 0.05 * min_period of the
/// lattice; 1000 rejections in a row raise resampling_error.
inline IdentityReport verify_identity(const IdentityCase &c, const Lattice &lat, int draws, std::uint64_t seed)
{
    if (draws < 1) {
        throw std::invalid_argument("verify_identity: draws must be >= 1");
    }
    std::mt19937_64 gen = detail::case_generator(c.id, seed);
    const double margin = 0.05 * lat.min_period();
    const cplx w1 = 2.0 * lat.omega(), w2 = 2.0 * lat.omega_prime();

    IdentityReport r;
    r.id = c.id;
    r.draws = draws;
    r.tolerance = c.tolerance;
    std::vector<cplx> args(std::size_t(c.arity));
    for (int d = 0; d < draws; ++d) {
        int rejects = 0;
        for (;;) {
            for (cplx &a : args) {
                const double u = detail::uniform53(gen) - 0.5;
                const double v = detail::uniform53(gen) - 0.5;
                a = u * w1 + v * w2;
            }
            const std::vector<cplx> g = c.guarded(args);
            const bool ok = std::all_of(g.begin(), g.end(), [&](cplx p) { return lat.lattice_distance(p) >= margin; });
            if (ok) {
                break;
            }
            if (++rejects >= 1000) {
                throw resampling_error("verify_identity: 1000 consecutive draws rejected for case " + c.id);
            }
        }
        const double res = normalized_residual(c.sides(args, lat));
        if (d == 0 || (!std::isnan(r.max_residual) && (std::isnan(res) || res > r.max_residual))) {
            r.max_residual = res;
            r.worst_point = args;
        }
    }
    return r;
}

/// Runs every registered case; a case that throws is reported with its message and an infinite residual.
inline std::vector<IdentityReport> verify_all(const Lattice &lat, int draws, std::uint64_t seed)
{
    std::vector<IdentityReport> out;
    for (const IdentityCase &c : identity_cases()) {
        try {
            out.push_back(verify_identity(c, lat, draws, seed));
        } catch (const std::exception &e) {
            IdentityReport r;
            r.id = c.id;
            r.draws = draws;
            r.tolerance = c.tolerance;
            r.max_residual = std::numeric_limits<double>::infinity();
            r.error = e.what();
            out.push_back(r);
        }
    }
    return out;
}

} // namespace bkp
