#include "lab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bkp/baker.hpp"
#include "bkp/dynamics.hpp"
#include "bkp/identities.hpp"
#include "bkp/spectral.hpp"
#include "lab/output.hpp"

#ifndef BKP_VERSION
#define BKP_VERSION "0.0.0"
#endif

namespace lab
{

namespace
{

constexpr double kConservationTol = 1e-6;
constexpr double kLinearTol = 1e-7;
constexpr double kEigenTol = 1e-8;
constexpr double kBlochTol = 1e-8;
constexpr double kInvolutionTol = 1e-8;

json config_echo(const RunConfig &c)
{
    json j;
    j["model"] = c.model;
    if (c.elliptic()) {
        j["omega"] = to_json(c.omega);
        j["omega_prime"] = to_json(c.omega_prime);
    }
    j["poles"] = to_json_list(c.poles);
    j["velocities"] = to_json_list(c.velocities);
    j["t_end"] = c.t_end;
    j["rel_tol"] = c.rel_tol;
    j["abs_tol"] = c.abs_tol;
    j["samples"] = c.samples;
    j["lambda_samples"] = to_json_list(c.lambda_samples);
    j["output_dir"] = c.output_dir.generic_string();
    j["seed"] = c.seed;
    j["identity_draws"] = c.identity_draws;
    if (c.baker.z || !c.baker.coefficients.empty()) {
        json b;
        if (c.baker.z) {
            b["z"] = to_json(*c.baker.z);
        }
        if (!c.baker.coefficients.empty()) {
            b["coefficients"] = to_json_list(c.baker.coefficients);
        }
        j["baker"] = b;
    }
    return j;
}

json run_meta(const std::string &command, const RunConfig &c, int code, const std::vector<std::string> &files)
{
    json j;
    j["program"] = "bkp-pole-lab";
    j["version"] = BKP_VERSION;
    j["command"] = command;
    j["exit_code"] = code;
    j["files"] = files;
    j["build"] = {{"compiler", __VERSION__},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    j["config"] = config_echo(c);
    return j;
}

void prepare_output_dir(const RunConfig &c)
{
    std::filesystem::create_directories(c.output_dir);
}

bkp::PoleState initial_state(const RunConfig &c)
{
    return bkp::PoleState{0.0, c.poles, c.velocities};
}

struct Run {
    bkp::Trajectory traj;
    bool completed = true;
    bool collided = false;
    std::string message;
};

Run run_trajectory(const RunConfig &c, const bkp::Model &m)
{
    bkp::IntegrateOptions opt;
    opt.rel_tol = c.rel_tol;
    opt.abs_tol = c.abs_tol;
    for (int k = 1; k < c.samples; ++k) {
        opt.sample_times.push_back(c.t_end * double(k) / double(c.samples));
    }
    Run r;
    try {
        r.traj = bkp::integrate(initial_state(c), m, c.t_end, opt);
    } catch (const bkp::integration_error &e) {
        r.traj = e.partial();
        r.completed = false;
        r.collided = e.kind() == bkp::integration_error::Kind::collision;
        r.message = e.what();
    }
    return r;
}

std::string trajectory_csv(const bkp::Trajectory &traj, std::size_t n)
{
    std::ostringstream out;
    out << "t";
    for (const char *part : {"x", "v"}) {
        for (std::size_t i = 1; i <= n; ++i) {
            out << ",re_" << part << i << ",im_" << part << i;
        }
    }
    out << "\n";
    for (const bkp::PoleState &s : traj.samples) {
        out << fmt17(s.t);
        for (const auto *vec : {&s.x, &s.v}) {
            for (const cplx c : *vec) {
                out << "," << fmt17(c.real()) << "," << fmt17(c.imag());
            }
        }
        out << "\n";
    }
    return out.str();
}

// Named conserved quantities at one state.
std::vector<std::pair<std::string, cplx>> monitored(const bkp::PoleState &s, const bkp::Model &m,
                                                    const std::vector<cplx> &lambdas)
{
    std::vector<std::pair<std::string, cplx>> q;
    const bkp::IntegralSet in = bkp::integrals(s, m);
    q.emplace_back("I1", in.I1);
    q.emplace_back("I2", in.I2);
    if (in.I3) {
        q.emplace_back("I3", *in.I3);
    }
    q.emplace_back("J", in.J);
    if (m.is_elliptic()) {
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
            const bkp::SpectralPoly p = bkp::spectral_poly(s, lambdas[l], m.lattice());
            for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
                q.emplace_back("R" + std::to_string(k) + "@lambda" + std::to_string(l), p.coeffs[k]);
            }
        }
    }
    return q;
}

json conservation_report(const bkp::Trajectory &traj, const bkp::Model &m, const std::vector<cplx> &lambdas,
                         bool &all_pass)
{
    const auto first = monitored(traj.samples.front(), m, lambdas);
    std::vector<double> max_abs(first.size(), 0.0);
    for (std::size_t s = 1; s < traj.samples.size(); ++s) {
        const auto cur = monitored(traj.samples[s], m, lambdas);
        for (std::size_t k = 0; k < cur.size(); ++k) {
            max_abs[k] = std::max(max_abs[k], std::abs(cur[k].second - first[k].second));
        }
    }
    all_pass = true;
    json quantities = json::array();
    for (std::size_t k = 0; k < first.size(); ++k) {
        const double rel = max_abs[k] / (1.0 + std::abs(first[k].second));
        const bool pass = rel < kConservationTol;
        all_pass = all_pass && pass;
        quantities.push_back({{"name", first[k].first},
                              {"initial", to_json(first[k].second)},
                              {"max_abs_drift", max_abs[k]},
                              {"max_rel_drift", rel},
                              {"pass", pass}});
    }
    json j;
    j["relative_drift_definition"] = "max_t |Q(t) - Q(0)| / (1 + |Q(0)|)";
    j["threshold"] = kConservationTol;
    j["samples"] = traj.samples.size();
    j["t_final"] = traj.samples.back().t;
    j["lambda_samples"] = to_json_list(lambdas);
    j["quantities"] = quantities;
    j["all_pass"] = all_pass;
    return j;
}

json integration_summary(const Run &r)
{
    return {{"completed", r.completed},
            {"collision", r.collided},
            {"message", r.message},
            {"accepted_steps", r.traj.accepted},
            {"rejected_steps", r.traj.rejected},
            {"min_separation_seen", r.traj.min_separation_seen}};
}

std::vector<cplx> seeded_coefficients(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::vector<cplx> c{1.0};
    for (std::size_t i = 1; i < n; ++i) {
        const double r = 0.5 + bkp::detail::uniform53(gen);
        const double phase = 2.0 * std::numbers::pi * bkp::detail::uniform53(gen);
        c.push_back(std::polar(r, phase));
    }
    return c;
}

} // namespace

int cmd_simulate(const RunConfig &cfg)
{
    const bkp::Model m = config_model(cfg);
    validate_geometry(cfg, m);
    const Run r = run_trajectory(cfg, m);
    bool conserved = false;
    json cons = conservation_report(r.traj, m, cfg.lambda_samples, conserved);
    cons["completed"] = r.completed;

    int code = exit_ok;
    if (r.collided) {
        code = exit_collision;
    } else if (!r.completed || !conserved) {
        code = exit_check_failed;
    }
    prepare_output_dir(cfg);
    write_atomic(cfg.output_dir / "trajectory.csv", trajectory_csv(r.traj, cfg.poles.size()));
    write_json(cfg.output_dir / "conservation.json", cons);
    json meta = run_meta("simulate", cfg, code, {"trajectory.csv", "conservation.json", "run_meta.json"});
    meta["integration"] = integration_summary(r);
    write_json(cfg.output_dir / "run_meta.json", meta);
    if (!r.completed) {
        std::cerr << "bkp-pole-lab: " << r.message << "\n";
    }
    return code;
}

int cmd_verify_identities(const RunConfig &cfg)
{
    if (!cfg.elliptic()) {
        throw config_error("verify-identities: needs the elliptic model");
    }
    const bkp::Lattice lat = config_lattice(cfg);
    const std::vector<bkp::IdentityReport> reports = bkp::verify_all(lat, cfg.identity_draws, cfg.seed);
    bool all_pass = true;
    json cases = json::array();
    for (const bkp::IdentityReport &r : reports) {
        all_pass = all_pass && r.passed();
        json jr{{"id", r.id},
                {"arity", bkp::identity_case(r.id).arity},
                {"draws", r.draws},
                {"tolerance", r.tolerance},
                {"max_residual", r.error.empty() ? json(r.max_residual) : json(nullptr)},
                {"worst_point", to_json_list(r.worst_point)},
                {"passed", r.passed()}};
        if (!r.error.empty()) {
            jr["error"] = r.error;
        }
        cases.push_back(jr);
    }
    json out;
    out["residual_definition"] = "|LHS - RHS| / (1 + |LHS| + |RHS|)";
    out["seed"] = cfg.seed;
    out["draws"] = cfg.identity_draws;
    out["g2"] = to_json(lat.g2());
    out["g3"] = to_json(lat.g3());
    out["cases"] = cases;
    out["all_pass"] = all_pass;

    const int code = all_pass ? exit_ok : exit_identity_failed;
    prepare_output_dir(cfg);
    write_json(cfg.output_dir / "identities.json", out);
    write_json(cfg.output_dir / "run_meta.json",
               run_meta("verify-identities", cfg, code, {"identities.json", "run_meta.json"}));
    return code;
}

int cmd_spectral_scan(const RunConfig &cfg)
{
    if (!cfg.elliptic()) {
        throw config_error("spectral-scan: needs the elliptic model");
    }
    const bkp::Model m = config_model(cfg);
    const bkp::Lattice &lat = m.lattice();
    validate_geometry(cfg, m);
    const Run r = run_trajectory(cfg, m);

    std::ostringstream csv;
    csv << "t,re_lambda,im_lambda,k,re_R,im_R\n";
    std::vector<std::vector<cplx>> first(cfg.lambda_samples.size());
    std::vector<double> drift(cfg.lambda_samples.size(), 0.0);
    for (const bkp::PoleState &s : r.traj.samples) {
        for (std::size_t l = 0; l < cfg.lambda_samples.size(); ++l) {
            const cplx lam = cfg.lambda_samples[l];
            const bkp::SpectralPoly p = bkp::spectral_poly(s, lam, lat);
            if (first[l].empty()) {
                first[l] = p.coeffs;
            }
            for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
                csv << fmt17(s.t) << "," << fmt17(lam.real()) << "," << fmt17(lam.imag()) << "," << k << ","
                    << fmt17(p.coeffs[k].real()) << "," << fmt17(p.coeffs[k].imag()) << "\n";
                drift[l] = std::max(drift[l], std::abs(p.coeffs[k] - first[l][k]) / (1.0 + std::abs(first[l][k])));
            }
        }
    }

    const bkp::PoleState &s0 = r.traj.samples.front();
    bool checks_pass = true;
    json per_lambda = json::array();
    for (std::size_t l = 0; l < cfg.lambda_samples.size(); ++l) {
        const cplx lam = cfg.lambda_samples[l];
        const bkp::SpectralPoly plus = bkp::spectral_poly(s0, lam, lat);
        const bkp::SpectralPoly minus = bkp::spectral_poly(s0, -lam, lat);
        double inv = 0.0;
        for (std::size_t k = 0; k < plus.coeffs.size(); ++k) {
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            inv = std::max(inv, std::abs(minus.coeffs[k] - sign * plus.coeffs[k]) / (1.0 + std::abs(plus.coeffs[k])));
        }
        const bool pass = inv < kInvolutionTol && drift[l] < kConservationTol;
        checks_pass = checks_pass && pass;
        per_lambda.push_back({{"lambda", to_json(lam)},
                              {"involution_residual", inv},
                              {"max_rel_coefficient_drift", drift[l]},
                              {"pass", pass}});
    }
    const double j3 = bkp::j_limit_residual(s0, lat, 1e-3);
    const double j4 = bkp::j_limit_residual(s0, lat, 1e-4);
    const cplx J = bkp::integrals(s0, lat).J;
    const bool j_bound = j3 < 1e-2 * (1.0 + std::abs(J));
    checks_pass = checks_pass && j_bound;

    int code = exit_ok;
    if (r.collided) {
        code = exit_collision;
    } else if (!r.completed || !checks_pass) {
        code = exit_check_failed;
    }
    prepare_output_dir(cfg);
    write_atomic(cfg.output_dir / "spectral.csv", csv.str());
    json meta = run_meta("spectral-scan", cfg, code, {"spectral.csv", "run_meta.json"});
    meta["integration"] = integration_summary(r);
    meta["checks"] = {{"involution_tolerance", kInvolutionTol},
                      {"drift_tolerance", kConservationTol},
                      {"per_lambda", per_lambda},
                      {"j_limit",
                       {{"J", to_json(J)},
                        {"residual_at_1e-3", j3},
                        {"residual_at_1e-4", j4},
                        {"decay_ratio", j4 > 0.0 ? j3 / j4 : 0.0},
                        {"bound", 1e-2 * (1.0 + std::abs(J))},
                        {"pass", j_bound}}},
                      {"all_pass", checks_pass}};
    write_json(cfg.output_dir / "run_meta.json", meta);
    if (!r.completed) {
        std::cerr << "bkp-pole-lab: " << r.message << "\n";
    }
    return code;
}

int cmd_check_linear_problem(const RunConfig &cfg)
{
    if (!cfg.elliptic()) {
        throw config_error("check-linear-problem: needs the elliptic model");
    }
    const bkp::Model m = config_model(cfg);
    const bkp::Lattice &lat = m.lattice();
    validate_geometry(cfg, m);
    const std::size_t n = cfg.poles.size();
    const cplx z0 = cfg.baker.z.value_or(cplx(0.8, 0.4) / std::abs(2.0 * lat.omega()));
    const std::vector<cplx> coeffs =
        cfg.baker.coefficients.empty() ? seeded_coefficients(n, cfg.seed) : cfg.baker.coefficients;

    bool all_pass = true;
    bool root_missing = false;
    json samples = json::array();
    for (const cplx lam : cfg.lambda_samples) {
        bkp::PoleState s;
        try {
            s = bkp::on_shell_state(cfg.poles, lam, z0, coeffs, lat);
        } catch (const std::invalid_argument &e) {
            throw config_error(std::string("baker.coefficients: ") + e.what());
        }
        std::vector<cplx> guesses{z0};
        std::vector<cplx> roots = bkp::spectral_roots(bkp::spectral_poly(s, lam, lat));
        std::sort(roots.begin(), roots.end(),
                  [&](cplx a, cplx b) { return std::abs(a - z0) < std::abs(b - z0); });
        guesses.insert(guesses.end(), roots.begin(), roots.end());

        json entry{{"lambda", to_json(lam)}, {"velocities", to_json_list(s.v)}};
        std::optional<bkp::WaveData> w;
        std::size_t used = 0;
        for (; used < guesses.size() && !w; ++used) {
            try {
                w = bkp::wave_data(s, lam, guesses[used], lat);
            } catch (const bkp::convergence_error &) {
            } catch (const bkp::degenerate_error &) {
            } catch (const bkp::pole_error &) {
            }
        }
        if (!w) {
            root_missing = true;
            all_pass = false;
            entry["error"] = "Newton iteration failed for every branch guess";
            entry["pass"] = false;
            samples.push_back(entry);
            continue;
        }
        const std::vector<cplx> probes = bkp::default_probe_points(s, lat);
        const double eig = bkp::eigen_residual(*w, lat);
        const double lin = bkp::linear_problem_residual(*w, lat, probes);
        const double b0 = bkp::bloch_residual(*w, lat, 0, probes);
        const double b1 = bkp::bloch_residual(*w, lat, 1, probes);
        const auto mult = bkp::bloch_multipliers(*w, lat);
        const bool pass = eig < kEigenTol && lin < kLinearTol && b0 < kBlochTol && b1 < kBlochTol;
        all_pass = all_pass && pass;
        entry["branch_guess"] = used - 1;
        entry["z"] = to_json(w->z);
        entry["coefficients"] = to_json_list(w->c);
        entry["probe_points"] = probes.size();
        entry["eigen_residual"] = eig;
        entry["linear_problem_residual"] = lin;
        entry["bloch_multiplier_omega"] = to_json(mult[0]);
        entry["bloch_multiplier_omega_prime"] = to_json(mult[1]);
        entry["bloch_residual_omega"] = b0;
        entry["bloch_residual_omega_prime"] = b1;
        entry["pass"] = pass;
        samples.push_back(entry);
    }

    json out;
    out["z_on_shell"] = to_json(z0);
    out["coefficients"] = to_json_list(coeffs);
    out["thresholds"] = {{"eigen_residual", kEigenTol},
                         {"linear_problem_residual", kLinearTol},
                         {"bloch_residual", kBlochTol}};
    out["samples"] = samples;
    out["all_pass"] = all_pass;

    const int code = root_missing ? exit_no_root : (all_pass ? exit_ok : exit_check_failed);
    prepare_output_dir(cfg);
    write_json(cfg.output_dir / "baker.json", out);
    write_json(cfg.output_dir / "run_meta.json",
               run_meta("check-linear-problem", cfg, code, {"baker.json", "run_meta.json"}));
    return code;
}

int run_command(const std::string &name, const RunConfig &cfg)
{
    try {
        if (name == "simulate") {
            return cmd_simulate(cfg);
        }
        if (name == "verify-identities") {
            return cmd_verify_identities(cfg);
        }
        if (name == "spectral-scan") {
            return cmd_spectral_scan(cfg);
        }
        if (name == "check-linear-problem") {
            return cmd_check_linear_problem(cfg);
        }
        std::cerr << "bkp-pole-lab: unknown command '" << name << "'\n";
        return exit_bad_config;
    } catch (const config_error &e) {
        std::cerr << "bkp-pole-lab: invalid config: " << e.what() << "\n";
        return exit_bad_config;
    } catch (const std::exception &e) {
        std::cerr << "bkp-pole-lab: " << e.what() << "\n";
        return exit_check_failed;
    }
}

} // namespace lab
