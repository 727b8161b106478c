#pragma once

// Run configuration for bkp-pole-lab: a JSON object, complex numbers as [re, im].

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bkp/dynamics.hpp"
#include "bkp/elliptic.hpp"

namespace lab
{

using bkp::cplx;

class config_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct BakerSettings {
    std::optional<cplx> z;
    std::vector<cplx> coefficients; // empty: drawn from the seed
};

struct RunConfig {
    std::string model = "elliptic";
    cplx omega{0.5, 0.0};
    cplx omega_prime{0.0, 0.5};
    std::vector<cplx> poles;
    std::vector<cplx> velocities;
    double t_end = 0.5;
    double rel_tol = 1e-9;
    double abs_tol = 1e-11;
    int samples = 50;
    std::vector<cplx> lambda_samples;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    int identity_draws = 100;
    BakerSettings baker;

    bool elliptic() const { return model == "elliptic"; }
};

namespace detail
{

inline cplx as_complex(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw config_error(what + ": expected a complex number as [re, im]");
    }
    const cplx c{j[0].get<double>(), j[1].get<double>()};
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
        throw config_error(what + ": non-finite value");
    }
    return c;
}

inline std::vector<cplx> as_complex_list(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_array()) {
        throw config_error(what + ": expected a list of [re, im] pairs");
    }
    std::vector<cplx> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(as_complex(j[i], what + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline double as_real(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_number()) {
        throw config_error(what + ": expected a number");
    }
    return j.get<double>();
}

inline int as_int(const nlohmann::json &j, const std::string &what)
{
    if (!j.is_number_integer()) {
        throw config_error(what + ": expected an integer");
    }
    return j.get<int>();
}

} // namespace detail

/// Default spectral sample points, scaled by the length of the first period.
inline std::vector<cplx> default_lambda_samples(cplx omega)
{
    const double s = std::abs(2.0 * omega);
    return {cplx(0.31, 0.17) * s, cplx(0.11, -0.23) * s, cplx(0.0, 0.41) * s};
}

inline RunConfig parse_config(const nlohmann::json &j)
{
    if (!j.is_object()) {
        throw config_error("config: top level must be an object");
    }
    static const std::set<std::string> known{"model",   "omega",          "omega_prime", "poles",      "velocities",
                                             "t_end",   "rel_tol",        "abs_tol",     "samples",    "lambda_samples",
                                             "output_dir", "seed",        "identity_draws", "baker"};
    for (const auto &item : j.items()) {
        if (!known.count(item.key())) {
            throw config_error("config: unknown key '" + item.key() + "'");
        }
    }
    RunConfig c;
    if (!j.contains("model") || !j["model"].is_string()) {
        throw config_error("model: required, \"elliptic\" or \"rational\"");
    }
    c.model = j["model"].get<std::string>();
    if (c.model != "elliptic" && c.model != "rational") {
        throw config_error("model: must be \"elliptic\" or \"rational\"");
    }
    if (c.elliptic()) {
        if (!j.contains("omega") || !j.contains("omega_prime")) {
            throw config_error("omega, omega_prime: required for the elliptic model");
        }
        c.omega = detail::as_complex(j["omega"], "omega");
        c.omega_prime = detail::as_complex(j["omega_prime"], "omega_prime");
    }
    if (!j.contains("poles") || !j.contains("velocities")) {
        throw config_error("poles, velocities: required");
    }
    c.poles = detail::as_complex_list(j["poles"], "poles");
    c.velocities = detail::as_complex_list(j["velocities"], "velocities");
    if (c.poles.empty()) {
        throw config_error("poles: at least one pole is required");
    }
    if (c.poles.size() != c.velocities.size()) {
        throw config_error("poles/velocities: lengths differ (" + std::to_string(c.poles.size()) + " vs " +
                           std::to_string(c.velocities.size()) + ")");
    }
    if (j.contains("t_end")) {
        c.t_end = detail::as_real(j["t_end"], "t_end");
    }
    if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) {
        throw config_error("t_end: must be positive");
    }
    if (j.contains("rel_tol")) {
        c.rel_tol = detail::as_real(j["rel_tol"], "rel_tol");
    }
    if (j.contains("abs_tol")) {
        c.abs_tol = detail::as_real(j["abs_tol"], "abs_tol");
    }
    for (const double tol : {c.rel_tol, c.abs_tol}) {
        if (!(tol > 1e-14 && tol < 1e-2)) {
            throw config_error("rel_tol, abs_tol: must lie in (1e-14, 1e-2)");
        }
    }
    if (j.contains("samples")) {
        c.samples = detail::as_int(j["samples"], "samples");
        if (c.samples < 1) {
            throw config_error("samples: must be >= 1");
        }
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) {
            throw config_error("output_dir: expected a string");
        }
        c.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) {
            throw config_error("seed: expected a non-negative integer");
        }
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("identity_draws")) {
        c.identity_draws = detail::as_int(j["identity_draws"], "identity_draws");
        if (c.identity_draws < 1) {
            throw config_error("identity_draws: must be >= 1");
        }
    }
    if (j.contains("lambda_samples")) {
        c.lambda_samples = detail::as_complex_list(j["lambda_samples"], "lambda_samples");
        if (c.lambda_samples.empty()) {
            throw config_error("lambda_samples: must not be empty when given");
        }
    } else if (c.elliptic()) {
        c.lambda_samples = default_lambda_samples(c.omega);
    }
    if (j.contains("baker")) {
        const auto &b = j["baker"];
        if (!b.is_object()) {
            throw config_error("baker: expected an object");
        }
        for (const auto &item : b.items()) {
            if (item.key() != "z" && item.key() != "coefficients") {
                throw config_error("baker: unknown key '" + item.key() + "'");
            }
        }
        if (b.contains("z")) {
            c.baker.z = detail::as_complex(b["z"], "baker.z");
        }
        if (b.contains("coefficients")) {
            c.baker.coefficients = detail::as_complex_list(b["coefficients"], "baker.coefficients");
            if (c.baker.coefficients.size() != c.poles.size()) {
                throw config_error("baker.coefficients: need one coefficient per pole");
            }
        }
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot open config file " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error &e) {
        throw config_error(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline bkp::Lattice config_lattice(const RunConfig &c)
{
    try {
        return bkp::make_lattice(c.omega, c.omega_prime);
    } catch (const std::domain_error &e) {
        throw config_error(std::string("omega, omega_prime: ") + e.what());
    }
}

inline bkp::Model config_model(const RunConfig &c)
{
    return c.elliptic() ? bkp::Model::elliptic(config_lattice(c)) : bkp::Model::rational();
}

/// Checks that depend on the model: pole separation and lambda samples off the lattice.
inline void validate_geometry(const RunConfig &c, const bkp::Model &m)
{
    const double sep = bkp::min_separation(c.poles, m);
    if (sep < m.collision_threshold()) {
        throw config_error("poles: two poles closer than the collision threshold");
    }
    if (m.is_elliptic()) {
        const bkp::Lattice &lat = m.lattice();
        for (const cplx l : c.lambda_samples) {
            if (lat.lattice_distance(l) < lat.pole_guard()) {
                throw config_error("lambda_samples: point on the period lattice");
            }
        }
    }
}

} // namespace lab
