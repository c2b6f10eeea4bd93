#include "rfolio/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "rfolio/json_io.hpp"

namespace rfolio {

namespace {

constexpr double kSocThreshold = 1e-12;    // on x'Sigma_mu x, below = zero subgradient
constexpr double kActivityThreshold = 1e-9;  // KKT support cut
constexpr double kArmijoSlope = 1e-4;
constexpr int kMaxBacktracks = 60;

void check_model(const ModelSpec& model, const Eigen::VectorXd& x) {
    const Eigen::Index n = model.mu_hat.size();
    if (n < 1) throw std::invalid_argument("model has no assets");
    if (model.sigma.rows() != n || model.sigma.cols() != n)
        throw std::invalid_argument("model sigma dimensions do not match mu");
    if (x.size() != n) throw std::invalid_argument("weight vector dimension mismatch");
    if (!(model.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    switch (model.kind) {
        case ModelKind::Box: {
            const auto* box = std::get_if<BoxSet>(&model.set);
            if (!box || box->delta.size() != n)
                throw std::invalid_argument("Box model needs a delta vector of matching size");
            break;
        }
        case ModelKind::Ellip: {
            const auto* ell = std::get_if<EllipsoidSet>(&model.set);
            if (!ell || ell->sigma_mu.rows() != n || ell->sigma_mu.cols() != n)
                throw std::invalid_argument("Ellip model needs sigma_mu of matching size");
            if (ell->delta_sq < 0.0) throw std::invalid_argument("Ellip delta_sq must be nonnegative");
            break;
        }
        case ModelKind::Mark:
        case ModelKind::Sep:
            break;
    }
}

struct Eval {
    double value;
    Eigen::VectorXd gradient;
};

// One sigma*x product serves both the value and the gradient.
Eval evaluate(const ModelSpec& model, const Eigen::VectorXd& x) {
    Eval out;
    const Eigen::VectorXd sigma_x = model.sigma * x;
    out.value = model.mu_hat.dot(x) - model.lambda * x.dot(sigma_x);
    out.gradient = model.mu_hat - 2.0 * model.lambda * sigma_x;
    switch (model.kind) {
        case ModelKind::Mark:
        case ModelKind::Sep:
            break;
        case ModelKind::Box: {
            const auto& box = std::get<BoxSet>(model.set);
            out.value -= box.delta.dot(x.cwiseAbs());
            // On x >= 0 the |x| penalty differentiates to delta itself; the
            // sign flips only for (infeasible) negative coordinates.
            for (Eigen::Index i = 0; i < x.size(); ++i)
                out.gradient(i) -= x(i) < 0.0 ? -box.delta(i) : box.delta(i);
            break;
        }
        case ModelKind::Ellip: {
            const auto& ell = std::get<EllipsoidSet>(model.set);
            if (ell.delta_sq > 0.0) {
                const double delta = std::sqrt(ell.delta_sq);
                const Eigen::VectorXd sigma_mu_x = ell.sigma_mu * x;
                const double q = std::max(x.dot(sigma_mu_x), 0.0);
                out.value -= delta * std::sqrt(q);
                if (q > kSocThreshold) out.gradient -= (delta / std::sqrt(q)) * sigma_mu_x;
            }
            break;
        }
    }
    return out;
}

double residual_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& x) {
    double support_max = -std::numeric_limits<double>::infinity();
    double support_min = std::numeric_limits<double>::infinity();
    double overall_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        overall_max = std::max(overall_max, g(i));
        if (x(i) > kActivityThreshold) {
            support_max = std::max(support_max, g(i));
            support_min = std::min(support_min, g(i));
        }
    }
    const double spread = support_max - support_min;
    const double overshoot = std::max(0.0, overall_max - support_max);
    return std::max(spread, overshoot);
}

Eigen::VectorXd uniform_start(Eigen::Index n) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

}  // namespace

const char* model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Mark: return "mark";
        case ModelKind::Box: return "box";
        case ModelKind::Ellip: return "ellip";
        case ModelKind::Sep: return "sep";
    }
    return "unknown";
}

ModelKind model_from_name(std::string_view name) {
    if (name == "mark") return ModelKind::Mark;
    if (name == "box") return ModelKind::Box;
    if (name == "ellip") return ModelKind::Ellip;
    if (name == "sep") return ModelKind::Sep;
    throw std::invalid_argument("unknown model name '" + std::string(name) +
                                "' (expected mark|box|ellip|sep)");
}

ModelSpec make_mark(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, double lambda) {
    ModelSpec m;
    m.kind = ModelKind::Mark;
    m.mu_hat = std::move(mu_hat);
    m.sigma = std::move(sigma);
    m.lambda = lambda;
    return m;
}

ModelSpec make_box(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, BoxSet set, double lambda) {
    ModelSpec m;
    m.kind = ModelKind::Box;
    m.mu_hat = std::move(mu_hat);
    m.sigma = std::move(sigma);
    m.lambda = lambda;
    m.set = std::move(set);
    return m;
}

ModelSpec make_ellip(Eigen::VectorXd mu_hat, Eigen::MatrixXd sigma, EllipsoidSet set, double lambda) {
    ModelSpec m;
    m.kind = ModelKind::Ellip;
    m.mu_hat = std::move(mu_hat);
    m.sigma = std::move(sigma);
    m.lambda = lambda;
    m.set = std::move(set);
    return m;
}

ModelSpec make_sep(SeparableSet set, double lambda) {
    ModelSpec m;
    m.kind = ModelKind::Sep;
    m.mu_hat = set.mu_lo;
    m.sigma = set.sigma_hi;
    m.lambda = lambda;
    m.set = std::move(set);
    return m;
}

double objective_value(const ModelSpec& model, const Eigen::VectorXd& x) {
    check_model(model, x);
    return evaluate(model, x).value;
}

Eigen::VectorXd objective_subgradient(const ModelSpec& model, const Eigen::VectorXd& x) {
    check_model(model, x);
    return evaluate(model, x).gradient;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    if (!v.allFinite()) throw std::invalid_argument("project_simplex: input has non-finite entries");
    const Eigen::Index n = v.size();
    if (n < 1) throw std::invalid_argument("project_simplex: empty vector");

    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = sorted[0] - 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += sorted[static_cast<std::size_t>(j)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
    }
    Eigen::VectorXd x = (v.array() - theta).cwiseMax(0.0);
    x /= x.sum();
    return x;
}

double kkt_residual(const ModelSpec& model, const Eigen::VectorXd& x) {
    check_model(model, x);
    return residual_from_gradient(evaluate(model, x).gradient, x);
}

PortfolioSolution solve(const ModelSpec& model, const SolverConfig& config) {
    const Eigen::Index n = model.mu_hat.size();
    Eigen::VectorXd x = config.start.size() > 0 ? project_simplex(config.start) : uniform_start(n);
    check_model(model, x);
    if (!(config.tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
    if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");

    PortfolioSolution sol;
    Eval cur = evaluate(model, x);
    if (!std::isfinite(cur.value) || !cur.gradient.allFinite())
        throw numeric_error("objective or gradient is non-finite at the start point", x);
    if (config.record_trace) sol.objective_trace.push_back(cur.value);

    // Step scale from the initial gradient so instances of any magnitude start
    // with O(1) movement across the simplex.
    const double g0_norm = cur.gradient.norm();
    const double base_step = 1.0 / std::max(g0_norm, 1e-300);
    double step = base_step;

    Eigen::VectorXd best_x = x;
    double best_value = cur.value;
    double residual = residual_from_gradient(cur.gradient, x);
    double best_residual = residual;
    int iterations = 0;
    bool converged = residual <= config.tolerance;

    for (int k = 1; k <= config.max_iterations && !converged; ++k) {
        iterations = k;
        bool moved = false;

        if (config.step_rule == StepRule::AdaptiveArmijo) {
            for (int bt = 0; bt < kMaxBacktracks; ++bt) {
                const Eigen::VectorXd z = project_simplex(x + step * cur.gradient);
                if ((z - x).cwiseAbs().maxCoeff() == 0.0) break;  // projection fixed point
                const Eval trial = evaluate(model, z);
                if (!std::isfinite(trial.value) || !trial.gradient.allFinite())
                    throw numeric_error("objective or gradient became non-finite during ascent", x);
                const double gain = cur.gradient.dot(z - x);
                const bool armijo = trial.value >= cur.value + kArmijoSlope * std::max(gain, 0.0);
                // Once objective changes sit inside the double-precision noise
                // band, steps are judged by the optimality certificate instead
                // (the trial gradient is already in hand).
                const double slack = 1e-15 * (1.0 + std::abs(cur.value));
                const bool polish = !armijo && std::abs(trial.value - cur.value) <= slack &&
                                    residual_from_gradient(trial.gradient, z) < residual;
                if (armijo || polish) {
                    x = z;
                    cur = trial;
                    if (armijo) step = std::min(step * 1.3, 1e15 * base_step);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
        } else {
            const double t = base_step / std::sqrt(static_cast<double>(k));
            const Eigen::VectorXd z = project_simplex(x + t * cur.gradient);
            const Eval trial = evaluate(model, z);
            if (!std::isfinite(trial.value) || !trial.gradient.allFinite())
                throw numeric_error("objective or gradient became non-finite during ascent", x);
            if (trial.value >= cur.value - 1e-12 * std::max(1.0, std::abs(cur.value))) {
                x = z;
                cur = trial;
                moved = true;
            }
        }

        if (moved) {
            if (config.record_trace) sol.objective_trace.push_back(cur.value);
            residual = residual_from_gradient(cur.gradient, x);
            // Best iterate follows residual improvements too: polish steps
            // refine the certificate without a measurable objective change.
            const double slack = 1e-15 * (1.0 + std::abs(best_value));
            if (cur.value >= best_value - slack &&
                (cur.value > best_value || residual < best_residual)) {
                best_value = cur.value;
                best_residual = residual;
                best_x = x;
            }
        } else if (config.step_rule == StepRule::AdaptiveArmijo) {
            break;  // no ascent direction left at this numeric scale
        }

        converged = residual <= config.tolerance;
    }

    sol.weights = best_x;
    const Eval final_eval = evaluate(model, best_x);
    sol.objective = final_eval.value;
    sol.kkt_residual = residual_from_gradient(final_eval.gradient, best_x);
    sol.converged = sol.kkt_residual <= config.tolerance;
    sol.iterations = iterations;
    return sol;
}

void to_json(nlohmann::json& j, const ModelSpec& m) {
    j = nlohmann::json{{"kind", model_name(m.kind)},
                       {"mu_hat", vec_json(m.mu_hat)},
                       {"sigma", mat_json(m.sigma)},
                       {"lambda", m.lambda}};
    switch (m.kind) {
        case ModelKind::Mark: break;
        case ModelKind::Box: j["set"] = std::get<BoxSet>(m.set); break;
        case ModelKind::Ellip: j["set"] = std::get<EllipsoidSet>(m.set); break;
        case ModelKind::Sep: j["set"] = std::get<SeparableSet>(m.set); break;
    }
}

void from_json(const nlohmann::json& j, ModelSpec& m) {
    m.kind = model_from_name(j.at("kind").get<std::string>());
    m.mu_hat = vec_from_json(j.at("mu_hat"));
    m.sigma = mat_from_json(j.at("sigma"));
    m.lambda = j.at("lambda").get<double>();
    switch (m.kind) {
        case ModelKind::Mark: m.set = std::monostate{}; break;
        case ModelKind::Box: m.set = j.at("set").get<BoxSet>(); break;
        case ModelKind::Ellip: m.set = j.at("set").get<EllipsoidSet>(); break;
        case ModelKind::Sep: m.set = j.at("set").get<SeparableSet>(); break;
    }
}

void to_json(nlohmann::json& j, const PortfolioSolution& s) {
    j = nlohmann::json{{"weights", vec_json(s.weights)},
                       {"objective", s.objective},
                       {"iterations", s.iterations},
                       {"kkt_residual", s.kkt_residual},
                       {"converged", s.converged}};
}

void from_json(const nlohmann::json& j, PortfolioSolution& s) {
    s.weights = vec_from_json(j.at("weights"));
    s.objective = j.at("objective").get<double>();
    s.iterations = j.at("iterations").get<int>();
    s.kkt_residual = j.at("kkt_residual").get<double>();
    s.converged = j.at("converged").get<bool>();
}

}  // namespace rfolio
