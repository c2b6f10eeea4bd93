// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
// Each criterion carries its runtime budget; tolerances are pinned in code.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rfolio/cli.hpp"
#include "rfolio/evaluation.hpp"
#include "rfolio/rng.hpp"

using namespace rfolio;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

// Equity-like daily ground truth: annual returns 5-25%, vols 15-40%, one-factor
// correlation 0.3 (the scale of the indices the protocol samples from).
SimulationConfig daily_truth(int assets, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed * 1009 + 17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SimulationConfig sim;
    sim.mean.resize(assets);
    Eigen::VectorXd vol(assets);
    for (int i = 0; i < assets; ++i) {
        sim.mean(i) = (0.05 + 0.20 * u(rng)) / 252.0;
        vol(i) = (0.15 + 0.25 * u(rng)) / std::sqrt(252.0);
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(assets, assets, 0.3);
    corr.diagonal().setOnes();
    sim.covariance = vol.asDiagonal() * corr * vol.asDiagonal();
    sim.sample_count = samples;
    sim.seed = seed;
    return sim;
}

BoxSet box_of(const Eigen::VectorXd& delta) { return BoxSet{delta, 0.05}; }

EllipsoidSet ellip_of(double delta_sq, Eigen::MatrixXd sigma_mu) {
    return EllipsoidSet{delta_sq, std::move(sigma_mu), 0.05};
}

SeparableSet sep_of(Eigen::VectorXd mu_lo, Eigen::MatrixXd sigma_hi) {
    SeparableSet set;
    set.mu_hi = mu_lo.array() + 0.01;
    set.mu_lo = std::move(mu_lo);
    set.sigma_lo = sigma_hi * 0.8;
    set.sigma_hi = std::move(sigma_hi);
    set.alpha = 0.05;
    set.beta = 8000;
    return set;
}

Eigen::VectorXd interior_point(std::mt19937_64& rng, int assets) {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    Eigen::VectorXd x(assets);
    for (int i = 0; i < assets; ++i) x(i) = unif(rng);
    x /= x.sum();
    return x;
}

// ---- criterion 1: reduction identities -------------------------------------

Outcome reduction_identities() {
    Outcome out;
    std::mt19937_64 rng(20240101);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::array<int, 3> sizes = {2, 5, 31};
    SolverConfig config;
    config.tolerance = 1e-10;
    for (int trial = 0; trial < 100; ++trial) {
        const int assets = sizes[static_cast<std::size_t>(trial % 3)];
        const oracle::Instance inst = oracle::random_instance(rng, assets);
        Eigen::VectorXd delta(assets);
        for (int i = 0; i < assets; ++i) delta(i) = 0.05 * unif(rng);

        const PortfolioSolution box =
            solve(make_box(inst.mu, inst.sigma, box_of(delta), inst.lambda), config);
        const PortfolioSolution shifted =
            solve(make_mark(inst.mu - delta, inst.sigma, inst.lambda), config);
        const double box_gap = (box.weights - shifted.weights).cwiseAbs().maxCoeff();
        out.require(box_gap <= 1e-8, "Box/Mark weight gap " + std::to_string(box_gap));

        const PortfolioSolution mark = solve(make_mark(inst.mu, inst.sigma, inst.lambda), config);
        const PortfolioSolution ellip = solve(
            make_ellip(inst.mu, inst.sigma, ellip_of(1e-12, inst.sigma / 100.0), inst.lambda),
            config);
        const double ellip_gap = (ellip.weights - mark.weights).cwiseAbs().maxCoeff();
        out.require(ellip_gap <= 1e-5, "Ellip/Mark weight gap " + std::to_string(ellip_gap));

        SeparableSet degenerate;
        degenerate.mu_lo = inst.mu;
        degenerate.mu_hi = inst.mu;
        degenerate.sigma_lo = inst.sigma;
        degenerate.sigma_hi = inst.sigma;
        degenerate.alpha = 0.05;
        degenerate.beta = 8000;
        const PortfolioSolution sep = solve(make_sep(degenerate, inst.lambda), config);
        const double sep_gap = (sep.weights - mark.weights).cwiseAbs().maxCoeff();
        out.require(sep_gap <= 1e-5, "Sep/Mark weight gap " + std::to_string(sep_gap));
    }
    return out;
}

// ---- criterion 2: grid-oracle optimality ------------------------------------

Outcome oracle_optimality() {
    Outcome out;
    std::mt19937_64 rng(20240202);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SolverConfig config;
    config.tolerance = 1e-9;
    for (int model_index = 0; model_index < 4; ++model_index) {
        for (int trial = 0; trial < 50; ++trial) {
            const int assets = trial % 2 == 0 ? 2 : 3;
            const oracle::Instance inst = oracle::random_instance(rng, assets);
            ModelSpec model;
            switch (model_index) {
                case 0: model = make_mark(inst.mu, inst.sigma, inst.lambda); break;
                case 1: {
                    Eigen::VectorXd delta(assets);
                    for (int i = 0; i < assets; ++i) delta(i) = 0.05 * unif(rng);
                    model = make_box(inst.mu, inst.sigma, box_of(delta), inst.lambda);
                    break;
                }
                case 2:
                    model = make_ellip(
                        inst.mu, inst.sigma,
                        ellip_of(0.25 + 3.0 * unif(rng), inst.sigma / (20.0 + 80.0 * unif(rng))),
                        inst.lambda);
                    break;
                default:
                    model = make_sep(sep_of(inst.mu.array() - 0.02 * unif(rng), inst.sigma),
                                     inst.lambda);
            }
            const PortfolioSolution sol = solve(model, config);
            out.require(sol.kkt_residual <= 1e-8,
                        std::string(model_name(model.kind)) + " kkt residual " +
                            std::to_string(sol.kkt_residual));
            const double grid = oracle::grid_best(
                [&](const Eigen::VectorXd& x) { return objective_value(model, x); }, assets, 1000);
            out.require(sol.objective >= grid - 1e-6,
                        std::string(model_name(model.kind)) + " objective below grid oracle by " +
                            std::to_string(grid - sol.objective));
        }
    }
    return out;
}

// ---- criterion 3: closed-form Mark optimum ----------------------------------

Outcome closed_form() {
    Outcome out;
    const PortfolioSolution sol =
        solve(make_mark(Eigen::Vector2d(0.2, 0.1), Eigen::Matrix2d::Identity(), 2.0));
    out.require(std::abs(sol.weights(0) - 0.5125) <= 1e-6 &&
                    std::abs(sol.weights(1) - 0.4875) <= 1e-6,
                "weights (" + std::to_string(sol.weights(0)) + ", " +
                    std::to_string(sol.weights(1)) + ")");
    return out;
}

// ---- criterion 4: quantile accuracy -----------------------------------------

Outcome quantile_accuracy() {
    Outcome out;
    const double z = normal_quantile(0.975);
    out.require(std::abs(z - 1.959964) <= 1e-6, "normal_quantile(0.975) = " + std::to_string(z));
    out.require(std::abs(z - oracle::normal_quantile(0.975)) <= 1e-9,
                "normal quantile vs bisection oracle");

    const double chi31 = chi_square_quantile(31, 0.95);
    out.require(std::abs(chi31 - 44.985) <= 1e-2, "chi2(31, 0.95) = " + std::to_string(chi31));
    out.require(std::abs(chi31 - oracle::chi_square_quantile(31, 0.95)) <= 1e-6,
                "chi2(31) vs quadrature oracle");

    const double chi98 = chi_square_quantile(98, 0.95);
    out.require(std::abs(chi98 - 122.108) <= 1e-2, "chi2(98, 0.95) = " + std::to_string(chi98));
    out.require(std::abs(chi98 - oracle::chi_square_quantile(98, 0.95)) <= 1e-6,
                "chi2(98) vs quadrature oracle");
    return out;
}

// ---- criterion 5: frontier dominance and monotonicity ------------------------

Outcome frontier_dominance() {
    Outcome out;
    const ReturnMatrix data = simulate_returns(daily_truth(31, 193, 33));
    const MomentEstimates moments = estimate_moments(data);
    CalibratedSets sets;
    sets.box = calibrate_box(moments, 0.05);
    sets.ellipsoid = calibrate_ellipsoid(moments, 0.05);
    sets.separable = bootstrap_separable(data, 0.05, 8000, derive_seed(33, "bootstrap"));

    EvalConfig cfg;
    cfg.solver.tolerance = 1e-9;
    // The Mark reference polyline is sampled densely so that secant error of
    // the interpolation (O(spacing^2), ~7e-7 at the default 60 points) stays
    // an order below the 1e-8 dominance tolerance being certified.
    EvalConfig reference = cfg;
    reference.frontier_lambdas = log_spaced(0.05, 200.0, 1921);
    const std::vector<FrontierPoint> mark =
        efficient_frontier(ModelKind::Mark, moments, sets, reference);
    double worst_margin = -1.0;
    for (ModelKind kind : {ModelKind::Box, ModelKind::Ellip, ModelKind::Sep}) {
        const std::vector<FrontierPoint> frontier = efficient_frontier(kind, moments, sets, cfg);
        for (const FrontierPoint& p : frontier) {
            const double margin = p.ret - frontier_return_at_risk(mark, p.risk);
            worst_margin = std::max(worst_margin, margin);
            out.require(margin <= 1e-8, std::string(model_name(kind)) +
                                            " point above Mark frontier by " +
                                            std::to_string(margin));
        }
        for (std::size_t i = 1; i < frontier.size(); ++i)
            out.require(frontier[i].risk <= frontier[i - 1].risk + 1e-8,
                        std::string(model_name(kind)) + " risk not monotone at lambda " +
                            std::to_string(frontier[i].lambda));
    }
    const std::vector<FrontierPoint> mark_default =
        efficient_frontier(ModelKind::Mark, moments, sets, cfg);
    for (std::size_t i = 1; i < mark_default.size(); ++i)
        out.require(mark_default[i].risk <= mark_default[i - 1].risk + 1e-8,
                    "mark risk not monotone");
    std::ostringstream os;
    os << "worst dominance margin " << worst_margin;
    if (out.pass) out.detail = os.str();
    return out;
}

// ---- criterion 6: bootstrap contract ----------------------------------------

Outcome bootstrap_contract() {
    Outcome out;
    const ReturnMatrix data = simulate_returns(daily_truth(5, 200, 2024));
    const MomentEstimates m = estimate_moments(data);
    const SeparableSet set = bootstrap_separable(data, 0.05, 8000, 7, 1);
    for (int i = 0; i < 5; ++i) {
        out.require(set.mu_lo(i) <= m.mu_hat(i) && m.mu_hat(i) <= set.mu_hi(i),
                    "mu_hat outside bootstrap interval at asset " + std::to_string(i));
        for (int j = 0; j < 5; ++j)
            out.require(set.sigma_lo(i, j) <= m.sigma_hat(i, j) &&
                            m.sigma_hat(i, j) <= set.sigma_hi(i, j),
                        "sigma_hat outside bootstrap interval at entry " + std::to_string(i) + "," +
                            std::to_string(j));
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(set.sigma_hi);
    out.require(eig.eigenvalues().minCoeff() >= -1e-10, "sigma_hi not PSD after repair");

    const SeparableSet rerun = bootstrap_separable(data, 0.05, 8000, 7, 1);
    out.require(rerun.mu_lo == set.mu_lo && rerun.mu_hi == set.mu_hi &&
                    rerun.sigma_lo == set.sigma_lo && rerun.sigma_hi == set.sigma_hi,
                "rerun with the same seed is not bitwise identical");
    const SeparableSet parallel = bootstrap_separable(data, 0.05, 8000, 7, 2);
    out.require(parallel.mu_lo == set.mu_lo && parallel.mu_hi == set.mu_hi &&
                    parallel.sigma_lo == set.sigma_lo && parallel.sigma_hi == set.sigma_hi,
                "parallel bootstrap differs from serial");
    return out;
}

// ---- criterion 7: protocol reproduction (directional) ------------------------

Outcome protocol_reproduction() {
    Outcome out;
    const fs::path root = "acceptance_tmp";
    fs::remove_all(root);
    int favorable = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SimulationConfig truth = daily_truth(31, 193, 900 + seed);
        double diff_sum = 0.0;
        for (int samples : {193, 1000}) {
            RunConfig cfg;
            SimBlock block;
            block.mean = truth.mean;
            block.covariance = truth.covariance;
            block.samples = samples;
            cfg.simulate_block = block;
            cfg.seed = seed;
            cfg.label = "n31-s" + std::to_string(samples);
            cfg.out =
                (root / ("seed" + std::to_string(seed) + "_s" + std::to_string(samples))).string();
            cmd_compare(cfg);

            // shape: lambda rows 2..4 step 0.5 plus Avg
            std::istringstream csv(read_text_file(cfg.out + "/report.csv"));
            std::string line;
            std::getline(csv, line);
            out.require(line == "lambda,SR_Mark,SR_Box,SR_Ellip,SR_Sep", "report header");
            const std::array<std::string, 6> prefixes = {"2,", "2.5,", "3,", "3.5,", "4,", "Avg,"};
            for (const std::string& prefix : prefixes) {
                std::getline(csv, line);
                out.require(line.rfind(prefix, 0) == 0, "report row should start with " + prefix);
            }
            out.require(!std::getline(csv, line), "report has extra rows");

            const nlohmann::json report =
                nlohmann::json::parse(read_text_file(cfg.out + "/report.json"));
            const std::vector<double> avg = report.at("average").get<std::vector<double>>();
            diff_sum += avg[2] - avg[0];  // SR_Ellip - SR_Mark
        }
        if (diff_sum / 2.0 >= 0.0) ++favorable;
    }
    std::ostringstream os;
    os << "Ellip >= Mark average Sharpe in " << favorable << "/20 seed runs";
    out.require(favorable >= 14, os.str());
    if (out.pass) out.detail = os.str();
    return out;
}

// ---- criterion 8: gradient correctness ---------------------------------------

Outcome gradient_correctness() {
    Outcome out;
    std::mt19937_64 rng(20240808);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int assets = 2 + trial % 5;
        const oracle::Instance inst = oracle::random_instance(rng, assets);
        Eigen::VectorXd delta(assets);
        for (int i = 0; i < assets; ++i) delta(i) = 0.05 * unif(rng);
        std::vector<ModelSpec> models;
        models.push_back(make_mark(inst.mu, inst.sigma, inst.lambda));
        models.push_back(make_box(inst.mu, inst.sigma, box_of(delta), inst.lambda));
        models.push_back(make_ellip(inst.mu, inst.sigma, ellip_of(1.0 + unif(rng), inst.sigma / 40.0),
                                    inst.lambda));
        models.push_back(make_sep(sep_of(inst.mu.array() - 0.02, inst.sigma), inst.lambda));
        const Eigen::VectorXd x = interior_point(rng, assets);
        for (const ModelSpec& model : models) {
            const Eigen::VectorXd g = objective_subgradient(model, x);
            const Eigen::VectorXd fd = oracle::fd_gradient(
                [&](const Eigen::VectorXd& p) { return objective_value(model, p); }, x);
            const double rel =
                (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff());
            out.require(rel <= 1e-6, std::string(model_name(model.kind)) +
                                         " gradient mismatch (relative " + std::to_string(rel) +
                                         ")");
        }
    }
    return out;
}

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "reduction identities (Box/Ellip/Sep vs Mark)", 60.0, reduction_identities},
        {2, "grid-oracle optimality and KKT certificates", 120.0, oracle_optimality},
        {3, "closed-form Mark optimum", 60.0, closed_form},
        {4, "quantile accuracy vs CDF-inversion oracles", 60.0, quantile_accuracy},
        {5, "frontier dominance and risk monotonicity (N = 31)", 120.0, frontier_dominance},
        {6, "bootstrap contract (beta = 8000, alpha = 0.05)", 60.0, bootstrap_contract},
        {7, "protocol reproduction, directional (20 seeds, 2 arms)", 600.0, protocol_reproduction},
        {8, "subgradients vs central finite differences", 60.0, gradient_correctness},
    };

    const int only = argc > 1 ? std::atoi(argv[1]) : 0;
    int failures = 0;
    for (const Criterion& criterion : criteria) {
        if (only != 0 && criterion.number != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criterion.budget_seconds) {
            outcome.pass = false;
            outcome.detail += (outcome.detail.empty() ? "" : "; ") + std::string("over time budget");
        }
        std::printf("%s  criterion %d: %s (%.1fs)%s%s\n", outcome.pass ? "PASS" : "FAIL",
                    criterion.number, criterion.name.c_str(), elapsed,
                    outcome.detail.empty() ? "" : " - ", outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
