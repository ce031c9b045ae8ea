#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace relunet {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,        // unreadable or invalid configuration
    kExitSolverAbort = 2,   // a step failed; trace so far is written
    kExitPrecondition = 3,  // check refused (breakpoint on a kink, no exact solution)
    kExitVerification = 4,  // FD mismatch, Hessian not SPD, or sigma >= 1
    kExitInapplicable = 5,  // convergence condition needs every c_i != 0
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> iters;
    std::optional<std::string> scheme;
    bool quiet = false;
};

int cmd_run(const std::string& config_path, const CliOverrides& o, std::ostream& out, std::ostream& err);
int cmd_check(const std::string& config_path, const CliOverrides& o, std::ostream& out, std::ostream& err);
int cmd_certify(const std::string& config_path, const std::string& network_path, const CliOverrides& o,
                std::ostream& out, std::ostream& err);
int cmd_error(const std::string& config_path, const std::string& network_path, const CliOverrides& o,
              std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace relunet
