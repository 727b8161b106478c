#pragma once

#include <string>

#include "lab/config.hpp"

namespace lab
{

enum exit_code : int {
    exit_ok = 0,
    exit_check_failed = 1,
    exit_collision = 2,
    exit_bad_config = 3,
    exit_identity_failed = 4,
    exit_no_root = 5,
};

int cmd_simulate(const RunConfig &cfg);
int cmd_verify_identities(const RunConfig &cfg);
int cmd_spectral_scan(const RunConfig &cfg);
int cmd_check_linear_problem(const RunConfig &cfg);

/// Dispatches by subcommand name; config errors become exit_bad_config.
int run_command(const std::string &name, const RunConfig &cfg);

} // namespace lab
