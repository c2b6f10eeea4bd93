#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <variant>
#include <vector>

#include "rfolio/estimation.hpp"
#include "rfolio/market_data.hpp"
#include "rfolio/optimizer.hpp"

namespace rfolio {

inline constexpr std::array<ModelKind, 4> kAllModels = {ModelKind::Mark, ModelKind::Box,
                                                        ModelKind::Ellip, ModelKind::Sep};

std::vector<double> log_spaced(double lo, double hi, int count);

struct EvalConfig {
    std::vector<double> lambda_grid = {2.0, 2.5, 3.0, 3.5, 4.0};
    std::vector<double> frontier_lambdas = log_spaced(0.05, 200.0, 60);
    double rf_annual = 0.06;
    int periods_per_year = 252;
    double alpha = 0.05;
    int beta = 8000;
    std::uint64_t seed = 0;
    SolverConfig solver;
    int threads = 0;         // bootstrap worker count; 0 = one per core
    std::string label;       // dataset tag carried into reports
};

struct CalibratedSets {
    BoxSet box;
    EllipsoidSet ellipsoid;
    SeparableSet separable;
};

struct PortfolioStats {
    double ret = 0.0;
    double risk = 0.0;
};

// Evaluation is model-blind: always against the point estimates (mu_hat, sigma_hat).
PortfolioStats portfolio_stats(const Eigen::VectorXd& x, const MomentEstimates& moments);

// Per-period riskfree rate under the log-return convention.
double risk_free_per_period(const EvalConfig& config);

double sharpe_ratio(double ret, double risk, const EvalConfig& config);

struct FrontierPoint {
    double lambda = 0.0;
    double risk = 0.0;
    double ret = 0.0;
    Eigen::VectorXd weights;
};

// Conventions and provenance stamped into every report artifact.
struct ReportMeta {
    std::string label;
    std::string source;
    int assets = 0;
    int observations = 0;
    double alpha = 0.05;
    int beta = 8000;
    std::uint64_t seed = 0;
    double rf_annual = 0.06;
    int periods_per_year = 252;
    std::string rf_convention = "rf_period = log(1 + rf_annual) / periods_per_year";
    std::string sigma_mu_convention = "sigma_mu = sigma_hat / n";
    std::string covariance_divisor = "n (maximum likelihood)";
    std::string quantile_rule = "nearest-rank";
    std::string rng;
    double solver_tolerance = 1e-8;
    int solver_max_iterations = 200000;
    std::string version;
};

// Per-lambda Sharpe ratios for the four models plus the average row.
struct SweepReport {
    std::vector<double> lambdas;
    Eigen::MatrixXd sharpe;  // lambdas.size() x 4, columns Mark, Box, Ellip, Sep
    Eigen::Vector4d average;
    ReportMeta meta;
};

ModelSpec make_model(ModelKind kind, const MomentEstimates& moments, const CalibratedSets& sets,
                     double lambda);

SweepReport lambda_sweep(const MomentEstimates& moments, const CalibratedSets& sets,
                         const EvalConfig& config);

std::vector<FrontierPoint> efficient_frontier(ModelKind kind, const MomentEstimates& moments,
                                              const CalibratedSets& sets, const EvalConfig& config);

// Piecewise-linear interpolation of a frontier's return at a risk level,
// clamped to the end points.
double frontier_return_at_risk(const std::vector<FrontierPoint>& frontier, double risk);

struct SummaryRow {
    std::string label;
    double max_avg_sharpe = 0.0;
};

std::vector<SummaryRow> summarize_max_avg_sharpe(const std::vector<SweepReport>& reports);

using Dataset = std::variant<ReturnMatrix, SimulationConfig>;

struct ExperimentResult {
    ReturnMatrix data;
    MomentEstimates moments;
    CalibratedSets sets;
    SweepReport report;
    std::array<std::vector<FrontierPoint>, 4> frontiers;  // kAllModels order
};

// Full pipeline: estimate, calibrate the three sets, sweep, trace frontiers.
// Deterministic given config.seed (bootstrap stream derived per purpose).
ExperimentResult run_experiment(const Dataset& dataset, const EvalConfig& config);

// Report CSV: 3-decimal Sharpe values, final row labelled Avg; the JSON
// sibling keeps full precision.  Frontier CSV: model,lambda,risk,return.
std::string sweep_csv(const SweepReport& report);
std::string frontier_csv(ModelKind kind, const std::vector<FrontierPoint>& frontier);
std::string summary_csv(const std::vector<SummaryRow>& rows);

void to_json(nlohmann::json& j, const ReportMeta& m);
void from_json(const nlohmann::json& j, ReportMeta& m);
void to_json(nlohmann::json& j, const SweepReport& r);
void from_json(const nlohmann::json& j, SweepReport& r);

}  // namespace rfolio
