#pragma once

// Pole equations of motion
//
//   x_i'' = -6 sum_{j!=i} (x_i' + x_j') wp'(x_ij) + 72 sum_{j!=k, j,k!=i} wp(x_ij) wp'(x_ik)
//
// with either the Weierstrass wp (elliptic model) or wp(x) = 1/x^2 (rational model),
// and an adaptive Dormand-Prince 5(4) integrator with PI step control and dense output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bkp/elliptic.hpp"

namespace bkp
{

/// Pole positions and velocities at time t.
struct PoleState {
    double t = 0.0;
    std::vector<cplx> x;
    std::vector<cplx> v;

    std::size_t size() const noexcept { return x.size(); }
};

/// Two poles came closer than the collision threshold.
class collision_error : public std::runtime_error
{
public:
    collision_error(std::size_t i, std::size_t j, double separation)
        : std::runtime_error("poles " + std::to_string(i) + " and " + std::to_string(j) +
                             " collided (separation " + std::to_string(separation) + ")"),
          m_i(i), m_j(j), m_sep(separation)
    {
    }
    std::size_t first() const noexcept { return m_i; }
    std::size_t second() const noexcept { return m_j; }
    double separation() const noexcept { return m_sep; }

private:
    std::size_t m_i, m_j;
    double m_sep;
};

/// Elliptic (with a lattice) or rational interaction.
class Model
{
public:
    static Model elliptic(Lattice lat) { return Model(std::move(lat)); }
    static Model rational() { return Model(); }

    bool is_elliptic() const noexcept { return m_lattice.has_value(); }
    const Lattice &lattice() const
    {
        if (!m_lattice) {
            throw std::logic_error("rational model has no lattice");
        }
        return *m_lattice;
    }

    /// wp and wp' of a pair difference.
    std::array<cplx, 2> wp_pair(cplx d) const
    {
        if (m_lattice) {
            const WpDerivs w = wp_all(d, *m_lattice);
            return {w.p, w.p1};
        }
        const cplx inv = 1.0 / d;
        const cplx inv2 = inv * inv;
        return {inv2, -2.0 * inv2 * inv};
    }

    /// Lattice-reduced distance (elliptic) or plain modulus (rational).
    double distance(cplx d) const
    {
        return m_lattice ? m_lattice->lattice_distance(d) : std::abs(d);
    }

    /// Integration aborts once two poles are closer than this.
    double collision_threshold() const
    {
        return m_lattice ? 1e-4 * m_lattice->min_period() : 1e-6;
    }

    /// Accelerations refuse states closer than this.
    double pole_guard() const
    {
        return m_lattice ? m_lattice->pole_guard() : 1e-6;
    }

private:
    Model() = default;
    explicit Model(Lattice lat) : m_lattice(std::move(lat)) {}

    std::optional<Lattice> m_lattice;
};

/// Minimum pairwise separation; +infinity for a single pole.
inline double min_separation(const std::vector<cplx> &x, const Model &m)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            best = std::min(best, m.distance(x[i] - x[j]));
        }
    }
    return best;
}

inline double min_separation(const PoleState &s, const Model &m)
{
    return min_separation(s.x, m);
}

namespace detail
{

inline void check_pairs(const std::vector<cplx> &x, const Model &m, double threshold)
{
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double d = m.distance(x[i] - x[j]);
            if (d < threshold) {
                throw collision_error(i, j, d);
            }
        }
    }
}

inline std::vector<cplx> acceleration(const std::vector<cplx> &x, const std::vector<cplx> &v, const Model &m)
{
    const std::size_t n = x.size();
    check_pairs(x, m, m.pole_guard());
    std::vector<cplx> p(n * n), p1(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto w = m.wp_pair(x[i] - x[j]);
            p[i * n + j] = p[j * n + i] = w[0];
            p1[i * n + j] = w[1];
            p1[j * n + i] = -w[1];
        }
    }
    std::vector<cplx> a(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx two_body = 0.0, sp = 0.0, sp1 = 0.0, diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            two_body += (v[i] + v[j]) * p1[i * n + j];
            sp += p[i * n + j];
            sp1 += p1[i * n + j];
            diag += p[i * n + j] * p1[i * n + j];
        }
        // Ordered pairs j != k, both != i.
        const cplx three_body = sp * sp1 - diag;
        a[i] = -6.0 * two_body + 72.0 * three_body;
    }
    return a;
}

} // namespace detail

/// Right-hand side of the pole equations of motion.
///
/// Throws collision_error naming the offending pair if two poles sit within the pole guard.
inline std::vector<cplx> acceleration(const PoleState &s, const Model &m)
{
    return detail::acceleration(s.x, s.v, m);
}

struct Trajectory {
    std::vector<PoleState> samples;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double min_separation_seen = std::numeric_limits<double>::infinity();
};

struct IntegrateOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-11;
    // Extra output times in (t0, t_end); t0 and t_end are always sampled.
    std::vector<double> sample_times;
};

/// Integration stopped early. Carries the trajectory recorded so far.
class integration_error : public std::runtime_error
{
public:
    enum class Kind { collision, step_underflow };

    integration_error(Kind kind, const std::string &what, Trajectory partial, PoleState last_good)
        : std::runtime_error(what), m_kind(kind), m_partial(std::move(partial)), m_last(std::move(last_good))
    {
    }
    Kind kind() const noexcept { return m_kind; }
    const Trajectory &partial() const noexcept { return m_partial; }
    const PoleState &last_good() const noexcept { return m_last; }

private:
    Kind m_kind;
    Trajectory m_partial;
    PoleState m_last;
};

namespace detail
{

using Vec = std::vector<cplx>;

// y = [x_1..x_N, v_1..v_N]
inline Vec rhs(const Vec &y, const Model &m)
{
    const std::size_t n = y.size() / 2;
    const Vec x(y.begin(), y.begin() + long(n));
    const Vec v(y.begin() + long(n), y.end());
    const Vec a = acceleration(x, v, m);
    Vec f(2 * n);
    std::copy(v.begin(), v.end(), f.begin());
    std::copy(a.begin(), a.end(), f.begin() + long(n));
    return f;
}

inline PoleState unpack(double t, const Vec &y)
{
    const std::size_t n = y.size() / 2;
    return {t, Vec(y.begin(), y.begin() + long(n)), Vec(y.begin() + long(n), y.end())};
}

// axpy-style combination y + h * sum_k c_k k_k
inline Vec combine(const Vec &y, double h, std::initializer_list<std::pair<double, const Vec *>> terms)
{
    Vec out = y;
    for (const auto &[c, k] : terms) {
        if (c == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += h * c * (*k)[i];
        }
    }
    return out;
}

// Dormand-Prince 5(4) tableau.
struct DoPri {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline double error_norm(const Vec &err, const Vec &y0, const Vec &y1, double rtol, double atol)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = std::abs(err[i]) / sk;
        acc += r * r;
    }
    return std::sqrt(acc / double(err.size()));
}

} // namespace detail

/// Integrates the pole flow from s0 to t_end.
///
/// Throws integration_error (collision or step underflow) with the partial trajectory,
/// std::invalid_argument on bad tolerances or t_end <= s0.t.
inline Trajectory integrate(const PoleState &s0, const Model &m, double t_end, const IntegrateOptions &opt = {})
{
    using namespace detail;
    if (!(t_end > s0.t)) {
        throw std::invalid_argument("integrate: t_end must exceed the initial time");
    }
    for (double tol : {opt.rel_tol, opt.abs_tol}) {
        if (!(tol > 1e-14 && tol < 1e-2)) {
            throw std::invalid_argument("integrate: tolerances must lie in (1e-14, 1e-2)");
        }
    }
    if (s0.x.empty() || s0.x.size() != s0.v.size()) {
        throw std::invalid_argument("integrate: need N >= 1 poles with matching velocities");
    }

    std::vector<double> outputs;
    for (double ts : opt.sample_times) {
        if (ts > s0.t && ts < t_end) {
            outputs.push_back(ts);
        }
    }
    std::sort(outputs.begin(), outputs.end());
    outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
    outputs.push_back(t_end);
    std::size_t next_out = 0;

    Trajectory traj;
    traj.samples.push_back(s0);
    traj.min_separation_seen = min_separation(s0, m);
    const double threshold = m.collision_threshold();
    if (traj.min_separation_seen < threshold) {
        throw integration_error(integration_error::Kind::collision, "integrate: initial state already collided", traj,
                                s0);
    }

    const double span = t_end - s0.t;
    const double h_min = 1e-12 * span;
    const double rtol = opt.rel_tol, atol = opt.abs_tol;

    Vec y(2 * s0.size());
    std::copy(s0.x.begin(), s0.x.end(), y.begin());
    std::copy(s0.v.begin(), s0.v.end(), y.begin() + long(s0.size()));
    double t = s0.t;
    Vec k1 = rhs(y, m);

    // Starting step from the scaled size of y and f.
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double sk = atol + rtol * std::abs(y[i]);
            d0 += std::norm(y[i]) / (sk * sk);
            d1 += std::norm(k1[i]) / (sk * sk);
        }
        d0 = std::sqrt(d0 / double(y.size()));
        d1 = std::sqrt(d1 / double(y.size()));
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
        h = std::min(h, 0.1 * span);
    }

    using D = DoPri;
    constexpr double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
    double facold = 1e-4;
    bool last_rejected = false;

    auto fail = [&](integration_error::Kind kind, const std::string &msg) {
        throw integration_error(kind, msg, traj, unpack(t, y));
    };

    while (t < t_end) {
        if (h < h_min) {
            fail(integration_error::Kind::step_underflow, "integrate: step size underflow at t = " + std::to_string(t));
        }
        const bool final_step = t + 1.01 * h >= t_end;
        if (final_step) {
            h = t_end - t;
        }
        const double t_new = final_step ? t_end : t + h;
        Vec k2, k3, k4, k5, k6, k7, y1;
        try {
            k2 = rhs(combine(y, h, {{D::a21, &k1}}), m);
            k3 = rhs(combine(y, h, {{D::a31, &k1}, {D::a32, &k2}}), m);
            k4 = rhs(combine(y, h, {{D::a41, &k1}, {D::a42, &k2}, {D::a43, &k3}}), m);
            k5 = rhs(combine(y, h, {{D::a51, &k1}, {D::a52, &k2}, {D::a53, &k3}, {D::a54, &k4}}), m);
            k6 = rhs(combine(y, h, {{D::a61, &k1}, {D::a62, &k2}, {D::a63, &k3}, {D::a64, &k4}, {D::a65, &k5}}), m);
            y1 = combine(y, h, {{D::a71, &k1}, {D::a73, &k3}, {D::a74, &k4}, {D::a75, &k5}, {D::a76, &k6}});
            k7 = rhs(y1, m);
        } catch (const collision_error &e) {
            // A trial stage hit the pole guard: shrink, and report a collision if that underflows.
            ++traj.rejected;
            h *= 0.25;
            last_rejected = true;
            if (h < h_min) {
                fail(integration_error::Kind::collision, std::string("integrate: ") + e.what());
            }
            continue;
        }
        Vec err = combine(Vec(y.size(), 0.0), h,
                          {{D::e1, &k1}, {D::e3, &k3}, {D::e4, &k4}, {D::e5, &k5}, {D::e6, &k6}, {D::e7, &k7}});
        const double en = error_norm(err, y, y1, rtol, atol);
        const double fac11 = std::pow(std::max(en, 1e-300), expo1);

        if (en <= 1.0) {
            const double sep = min_separation(std::vector<cplx>(y1.begin(), y1.begin() + long(s0.size())), m);
            if (sep < threshold) {
                fail(integration_error::Kind::collision,
                     "integrate: poles collided near t = " + std::to_string(t + h));
            }
            traj.min_separation_seen = std::min(traj.min_separation_seen, sep);

            // Dense output on [t, t + h].
            while (next_out < outputs.size() && outputs[next_out] <= t_new) {
                const double ts = outputs[next_out];
                Vec ys;
                if (ts == t_new) {
                    ys = y1;
                } else {
                    const double th = (ts - t) / h, th1 = 1.0 - th;
                    ys.resize(y.size());
                    for (std::size_t i = 0; i < y.size(); ++i) {
                        const cplx r1 = y[i];
                        const cplx r2 = y1[i] - y[i];
                        const cplx r3 = h * k1[i] - r2;
                        const cplx r4 = r2 - h * k7[i] - r3;
                        const cplx r5 = h * (D::d1 * k1[i] + D::d3 * k3[i] + D::d4 * k4[i] + D::d5 * k5[i] +
                                             D::d6 * k6[i] + D::d7 * k7[i]);
                        ys[i] = r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
                    }
                }
                traj.samples.push_back(unpack(ts, ys));
                ++next_out;
            }

            ++traj.accepted;
            facold = std::max(en, 1e-4);
            double fac = fac11 / std::pow(facold, beta);
            fac = std::clamp(fac / safe, 0.1, 5.0);
            double hnew = h / fac;
            if (last_rejected) {
                hnew = std::min(hnew, h);
            }
            last_rejected = false;
            t = t_new;
            y = std::move(y1);
            k1 = std::move(k7);
            h = hnew;
        } else {
            ++traj.rejected;
            h /= std::min(5.0, fac11 / safe);
            last_rejected = true;
        }
    }
    return traj;
}

} // namespace bkp
