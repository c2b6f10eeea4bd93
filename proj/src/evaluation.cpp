#include "rfolio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "rfolio/json_io.hpp"
#include "rfolio/rng.hpp"
#include "rfolio/version.hpp"

namespace rfolio {

namespace {

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::vector<double> log_spaced(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
        throw std::invalid_argument("log_spaced needs 0 < lo < hi and count >= 2");
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

PortfolioStats portfolio_stats(const Eigen::VectorXd& x, const MomentEstimates& moments) {
    if (x.size() != moments.mu_hat.size())
        throw std::invalid_argument("portfolio_stats: weight dimension mismatch");
    PortfolioStats stats;
    stats.ret = moments.mu_hat.dot(x);
    stats.risk = std::sqrt(std::max(x.dot(moments.sigma_hat * x), 0.0));
    return stats;
}

double risk_free_per_period(const EvalConfig& config) {
    if (!(config.rf_annual >= 0.0 && config.rf_annual < 1.0))
        throw std::invalid_argument("rf_annual must be in [0, 1)");
    if (config.periods_per_year < 1) throw std::invalid_argument("periods_per_year must be >= 1");
    return std::log1p(config.rf_annual) / config.periods_per_year;
}

double sharpe_ratio(double ret, double risk, const EvalConfig& config) {
    if (!(risk > 0.0)) throw std::domain_error("sharpe_ratio: risk must be positive");
    return (ret - risk_free_per_period(config)) / risk;
}

ModelSpec make_model(ModelKind kind, const MomentEstimates& moments, const CalibratedSets& sets,
                     double lambda) {
    switch (kind) {
        case ModelKind::Mark: return make_mark(moments.mu_hat, moments.sigma_hat, lambda);
        case ModelKind::Box: return make_box(moments.mu_hat, moments.sigma_hat, sets.box, lambda);
        case ModelKind::Ellip:
            return make_ellip(moments.mu_hat, moments.sigma_hat, sets.ellipsoid, lambda);
        case ModelKind::Sep: return make_sep(sets.separable, lambda);
    }
    throw std::invalid_argument("unknown model kind");
}

namespace {

PortfolioSolution solve_cell(ModelKind kind, double lambda, const MomentEstimates& moments,
                             const CalibratedSets& sets, const EvalConfig& config) {
    const ModelSpec model = make_model(kind, moments, sets, lambda);
    PortfolioSolution sol = solve(model, config.solver);
    if (!sol.converged) {
        std::ostringstream os;
        os << "solver did not converge for model " << model_name(kind) << " at lambda "
           << format_short(lambda) << " (kkt residual " << format_full(sol.kkt_residual) << ")";
        throw std::runtime_error(os.str());
    }
    return sol;
}

ReportMeta build_meta(const MomentEstimates& moments, const EvalConfig& config,
                      const std::string& source) {
    ReportMeta meta;
    meta.label = config.label;
    meta.source = source;
    meta.assets = static_cast<int>(moments.mu_hat.size());
    meta.observations = static_cast<int>(moments.n);
    meta.alpha = config.alpha;
    meta.beta = config.beta;
    meta.seed = config.seed;
    meta.rf_annual = config.rf_annual;
    meta.periods_per_year = config.periods_per_year;
    meta.rng = kRngDescription;
    meta.solver_tolerance = config.solver.tolerance;
    meta.solver_max_iterations = config.solver.max_iterations;
    meta.version = kVersion;
    return meta;
}

}  // namespace

SweepReport lambda_sweep(const MomentEstimates& moments, const CalibratedSets& sets,
                         const EvalConfig& config) {
    if (config.lambda_grid.empty()) throw std::invalid_argument("lambda grid is empty");
    SweepReport report;
    report.lambdas = config.lambda_grid;
    report.sharpe.resize(static_cast<Eigen::Index>(config.lambda_grid.size()), 4);
    for (std::size_t row = 0; row < config.lambda_grid.size(); ++row) {
        const double lambda = config.lambda_grid[row];
        if (!(lambda > 0.0)) throw std::invalid_argument("lambda grid entries must be positive");
        for (std::size_t col = 0; col < kAllModels.size(); ++col) {
            const PortfolioSolution sol = solve_cell(kAllModels[col], lambda, moments, sets, config);
            const PortfolioStats stats = portfolio_stats(sol.weights, moments);
            report.sharpe(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                sharpe_ratio(stats.ret, stats.risk, config);
        }
    }
    report.average = report.sharpe.colwise().mean();
    report.meta = build_meta(moments, config, "");
    return report;
}

std::vector<FrontierPoint> efficient_frontier(ModelKind kind, const MomentEstimates& moments,
                                              const CalibratedSets& sets, const EvalConfig& config) {
    if (config.frontier_lambdas.empty()) throw std::invalid_argument("frontier lambda grid is empty");
    std::vector<FrontierPoint> frontier;
    frontier.reserve(config.frontier_lambdas.size());
    for (double lambda : config.frontier_lambdas) {
        if (!(lambda > 0.0)) throw std::invalid_argument("frontier lambdas must be positive");
        const PortfolioSolution sol = solve_cell(kind, lambda, moments, sets, config);
        const PortfolioStats stats = portfolio_stats(sol.weights, moments);
        FrontierPoint point;
        point.lambda = lambda;
        point.risk = stats.risk;
        point.ret = stats.ret;
        point.weights = sol.weights;
        frontier.push_back(std::move(point));
    }
    return frontier;
}

double frontier_return_at_risk(const std::vector<FrontierPoint>& frontier, double risk) {
    if (frontier.empty()) throw std::invalid_argument("empty frontier");
    std::vector<const FrontierPoint*> by_risk;
    by_risk.reserve(frontier.size());
    for (const FrontierPoint& p : frontier) by_risk.push_back(&p);
    std::sort(by_risk.begin(), by_risk.end(),
              [](const FrontierPoint* a, const FrontierPoint* b) { return a->risk < b->risk; });
    if (risk <= by_risk.front()->risk) return by_risk.front()->ret;
    if (risk >= by_risk.back()->risk) return by_risk.back()->ret;
    for (std::size_t i = 1; i < by_risk.size(); ++i) {
        if (risk <= by_risk[i]->risk) {
            const FrontierPoint& a = *by_risk[i - 1];
            const FrontierPoint& b = *by_risk[i];
            if (b.risk == a.risk) return std::max(a.ret, b.ret);
            const double w = (risk - a.risk) / (b.risk - a.risk);
            return a.ret + w * (b.ret - a.ret);
        }
    }
    return by_risk.back()->ret;
}

std::vector<SummaryRow> summarize_max_avg_sharpe(const std::vector<SweepReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("no reports to summarize");
    std::vector<SummaryRow> rows;
    rows.reserve(reports.size());
    for (const SweepReport& report : reports) {
        SummaryRow row;
        row.label = report.meta.label;
        row.max_avg_sharpe = report.average.maxCoeff();
        rows.push_back(std::move(row));
    }
    return rows;
}

ExperimentResult run_experiment(const Dataset& dataset, const EvalConfig& config) {
    ExperimentResult result;
    std::string source;
    if (const auto* sim = std::get_if<SimulationConfig>(&dataset)) {
        result.data = simulate_returns(*sim);
        source = "simulated(samples=" + std::to_string(sim->sample_count) + ")";
    } else {
        result.data = std::get<ReturnMatrix>(dataset);
        source = "returns(n=" + std::to_string(result.data.returns.rows()) + ")";
    }
    result.moments = estimate_moments(result.data);
    result.sets.box = calibrate_box(result.moments, config.alpha);
    result.sets.ellipsoid = calibrate_ellipsoid(result.moments, config.alpha);
    result.sets.separable = bootstrap_separable(result.data, config.alpha, config.beta,
                                                derive_seed(config.seed, "bootstrap"), config.threads);
    result.report = lambda_sweep(result.moments, result.sets, config);
    result.report.meta.source = source;
    for (std::size_t m = 0; m < kAllModels.size(); ++m)
        result.frontiers[m] = efficient_frontier(kAllModels[m], result.moments, result.sets, config);
    return result;
}

std::string sweep_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "lambda,SR_Mark,SR_Box,SR_Ellip,SR_Sep\n";
    for (std::size_t row = 0; row < report.lambdas.size(); ++row) {
        os << format_short(report.lambdas[row]);
        for (Eigen::Index col = 0; col < 4; ++col)
            os << ',' << format_fixed3(report.sharpe(static_cast<Eigen::Index>(row), col));
        os << '\n';
    }
    os << "Avg";
    for (Eigen::Index col = 0; col < 4; ++col) os << ',' << format_fixed3(report.average(col));
    os << '\n';
    return os.str();
}

std::string frontier_csv(ModelKind kind, const std::vector<FrontierPoint>& frontier) {
    std::ostringstream os;
    os << "model,lambda,risk,return\n";
    for (const FrontierPoint& p : frontier)
        os << model_name(kind) << ',' << format_full(p.lambda) << ',' << format_full(p.risk) << ','
           << format_full(p.ret) << '\n';
    return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "label,max_avg_sharpe\n";
    for (const SummaryRow& row : rows) os << row.label << ',' << format_fixed3(row.max_avg_sharpe) << '\n';
    return os.str();
}

void to_json(nlohmann::json& j, const ReportMeta& m) {
    j = nlohmann::json{{"label", m.label},
                       {"source", m.source},
                       {"assets", m.assets},
                       {"observations", m.observations},
                       {"alpha", m.alpha},
                       {"beta", m.beta},
                       {"seed", m.seed},
                       {"rf_annual", m.rf_annual},
                       {"periods_per_year", m.periods_per_year},
                       {"rf_convention", m.rf_convention},
                       {"sigma_mu_convention", m.sigma_mu_convention},
                       {"covariance_divisor", m.covariance_divisor},
                       {"quantile_rule", m.quantile_rule},
                       {"rng", m.rng},
                       {"solver_tolerance", m.solver_tolerance},
                       {"solver_max_iterations", m.solver_max_iterations},
                       {"version", m.version}};
}

void from_json(const nlohmann::json& j, ReportMeta& m) {
    j.at("label").get_to(m.label);
    j.at("source").get_to(m.source);
    j.at("assets").get_to(m.assets);
    j.at("observations").get_to(m.observations);
    j.at("alpha").get_to(m.alpha);
    j.at("beta").get_to(m.beta);
    j.at("seed").get_to(m.seed);
    j.at("rf_annual").get_to(m.rf_annual);
    j.at("periods_per_year").get_to(m.periods_per_year);
    j.at("rf_convention").get_to(m.rf_convention);
    j.at("sigma_mu_convention").get_to(m.sigma_mu_convention);
    j.at("covariance_divisor").get_to(m.covariance_divisor);
    j.at("quantile_rule").get_to(m.quantile_rule);
    j.at("rng").get_to(m.rng);
    j.at("solver_tolerance").get_to(m.solver_tolerance);
    j.at("solver_max_iterations").get_to(m.solver_max_iterations);
    j.at("version").get_to(m.version);
}

void to_json(nlohmann::json& j, const SweepReport& r) {
    j = nlohmann::json{{"lambdas", r.lambdas},
                       {"columns", {"SR_Mark", "SR_Box", "SR_Ellip", "SR_Sep"}},
                       {"sharpe", mat_json(r.sharpe)},
                       {"average", vec_json(r.average)},
                       {"meta", r.meta}};
}

void from_json(const nlohmann::json& j, SweepReport& r) {
    j.at("lambdas").get_to(r.lambdas);
    r.sharpe = mat_from_json(j.at("sharpe"));
    const Eigen::VectorXd avg = vec_from_json(j.at("average"));
    if (avg.size() != 4) throw std::invalid_argument("report average row must have 4 entries");
    r.average = avg;
    j.at("meta").get_to(r.meta);
}

}  // namespace rfolio
