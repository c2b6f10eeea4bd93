#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfolio/evaluation.hpp"

namespace rfolio {

// Explicit simulation source: mean/covariance given directly.
struct SimBlock {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    int samples = 0;
};

// Inputs merged from flags and an optional JSON config file; flags override
// config-file values, which override the defaults below (the paper-protocol
// settings).  Exactly one data source: a CSV path, or a simulate block, or
// CSV + samples (draws from the CSV's estimated moments).
struct RunConfig {
    std::string csv;
    bool csv_is_returns = false;
    std::optional<SimBlock> simulate_block;
    int samples = 0;
    double alpha = 0.05;
    int beta = 8000;
    std::vector<double> lambda_grid = {2.0, 2.5, 3.0, 3.5, 4.0};
    double rf_annual = 0.06;
    int periods_per_year = 252;
    std::uint64_t seed = 0;
    double solver_tolerance = 1e-8;
    int solver_max_iterations = 200000;
    std::string out = ".";
    std::string label;
    bool forward_fill = false;
    bool passthrough = false;
    int threads = 0;
    std::string model;                 // frontier subcommand
    std::vector<std::string> inputs;   // summary subcommand
};

// Bad invocation or config (maps to exit code 2; computation errors map to 1).
class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void load_config_file(const std::string& path, RunConfig& cfg);

// Resolve the configured data source; seeds for simulation and bootstrap are
// derived from cfg.seed per purpose, so changing beta never perturbs the data.
Dataset resolve_dataset(const RunConfig& cfg);

EvalConfig eval_config(const RunConfig& cfg);

void cmd_ingest(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_compare(const RunConfig& cfg);
void cmd_frontier(const RunConfig& cfg);
void cmd_summary(const RunConfig& cfg);

// Full argv entry point; returns the process exit code (0/1/2).
int run_cli(int argc, const char* const* argv);

}  // namespace rfolio
