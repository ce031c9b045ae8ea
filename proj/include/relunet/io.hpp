#pragma once

#include "relunet/assembly.hpp"
#include "relunet/model.hpp"
#include "relunet/problems.hpp"
#include "relunet/quadrature.hpp"
#include "relunet/solver.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>

namespace relunet {

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MatrixXd& m);  // row-major nested arrays
nlohmann::json to_json(const VectorXd& v);
nlohmann::json to_json(const AssembledSystem& sys);

/// One row per record, header k,F,gnorm_c,gnorm_b,S1,S2,step_c,step_b,relH1err.
void write_trace_csv(std::ostream& out, const IterationTrace& trace);

struct RunOutputs {
    std::optional<std::string> trace_csv;
    std::optional<std::string> final_json;
    bool certify = false;
};

struct RunConfig {
    Problem problem;
    SolverConfig solver;
    QuadratureSpec quadrature;
    Network init;
    RunOutputs outputs;
};

RunConfig parse_run_config(const nlohmann::json& j);

/// Reads and parses a config file; syntax errors carry the byte offset.
RunConfig load_run_config(const std::string& path);
nlohmann::json load_json_file(const std::string& path);

SolverConfig solver_config_from_json(const nlohmann::json& j);
QuadratureSpec quadrature_from_json(const nlohmann::json& j);

}  // namespace relunet
