#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rfolio/estimation.hpp"

namespace rfolio {

// Concave objectives maximized over the long-only simplex {x >= 0, 1'x = 1}:
//
//   Mark   mu'x - lambda x'Sigma x
//   Box    mu'x - lambda x'Sigma x - delta'|x|
//   Ellip  mu'x - lambda x'Sigma x - sqrt(delta_sq) * sqrt(x'Sigma_mu x)
//   Sep    mu_lo'x - lambda x'Sigma_hi x
//
// Sep reuses the Mark form with the bound pair substituted for the point
// estimates; the solver is projected gradient ascent with KKT certification.

enum class ModelKind { Mark, Box, Ellip, Sep };

const char* model_name(ModelKind kind);
ModelKind model_from_name(std::string_view name);

using UncertaintySpec = std::variant<std::monostate, BoxSet, EllipsoidSet, SeparableSet>;

struct ModelSpec {
    ModelKind kind = ModelKind::Mark;
    Eigen::VectorXd mu_hat;  // Sep: the lower mean bound
    Eigen::MatrixXd sigma;   // Sep: the upper covariance bound
    double lambda = 1.0;
    UncertaintySpec set;     // payload matching kind
};

ModelSpec make_mark(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, double lambda);
ModelSpec make_box(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, BoxSet set, double lambda);
ModelSpec make_ellip(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, EllipsoidSet set, double lambda);
ModelSpec make_sep(SeparableSet set, double lambda);

enum class StepRule {
    AdaptiveArmijo,   // backtracking with growth; default
    DiminishingSqrt,  // c / sqrt(k), c scaled from the initial gradient norm
};

struct SolverConfig {
    int max_iterations = 200000;
    double tolerance = 1e-8;  // stopping threshold on the KKT residual
    StepRule step_rule = StepRule::AdaptiveArmijo;
    Eigen::VectorXd start;    // empty = uniform weights
    bool record_trace = false;
};

struct PortfolioSolution {
    Eigen::VectorXd weights;
    double objective = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
    bool converged = false;
    std::vector<double> objective_trace;  // accepted objectives, when recorded
};

// Raised when an iterate produces NaN/Inf; carries the last finite iterate.
class numeric_error : public std::runtime_error {
public:
    numeric_error(const std::string& what, Eigen::VectorXd last)
        : std::runtime_error(what), last_iterate_(std::move(last)) {}
    const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

private:
    Eigen::VectorXd last_iterate_;
};

double objective_value(const ModelSpec& model, const Eigen::VectorXd& x);

// Gradient of the objective; at x'Sigma_mu x below 1e-12 the Ellip cone term
// contributes the zero subgradient.
Eigen::VectorXd objective_subgradient(const ModelSpec& model, const Eigen::VectorXd& x);

// Euclidean projection onto the unit simplex (sort-and-threshold).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

// First-order optimality violation on the simplex: with nu the largest
// gradient entry over the support {i : x_i > 1e-9}, combines the gradient
// spread on the support with any off-support entry exceeding nu.
double kkt_residual(const ModelSpec& model, const Eigen::VectorXd& x);

PortfolioSolution solve(const ModelSpec& model, const SolverConfig& config = {});

void to_json(nlohmann::json& j, const ModelSpec& m);
void from_json(const nlohmann::json& j, ModelSpec& m);
void to_json(nlohmann::json& j, const PortfolioSolution& s);
void from_json(const nlohmann::json& j, PortfolioSolution& s);

}  // namespace rfolio
