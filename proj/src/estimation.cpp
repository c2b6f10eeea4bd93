#include "rfolio/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rfolio/json_io.hpp"
#include "rfolio/rng.hpp"

namespace rfolio {

MomentEstimates estimate_moments(const ReturnMatrix& returns) {
    const Eigen::Index n = returns.returns.rows();
    const Eigen::Index assets = returns.returns.cols();
    if (n < 2)
        throw std::invalid_argument("insufficient data: need at least 2 return rows, got " +
                                    std::to_string(n));
    if (!returns.returns.allFinite()) throw std::invalid_argument("return matrix has non-finite entries");

    MomentEstimates m;
    m.n = static_cast<std::size_t>(n);
    m.mu_hat = returns.returns.colwise().mean();
    const Eigen::MatrixXd centered = returns.returns.rowwise() - m.mu_hat.transpose();
    m.sigma_hat = (centered.transpose() * centered) / static_cast<double>(n);
    m.sigma_hat = ((m.sigma_hat + m.sigma_hat.transpose()) / 2.0).eval();
    m.per_asset_std = m.sigma_hat.diagonal().cwiseMax(0.0).cwiseSqrt();
    (void)assets;
    return m;
}

// Wichura's AS 241 (PPND16) rational approximations.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must be in (0, 1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return q < 0.0 ? -value : value;
}

namespace {

// Regularized lower incomplete gamma P(a, x): series for x < a + 1, Lentz
// continued fraction for the complement otherwise.
double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int k = 1; k < 10000; ++k) {
            term *= x / (a + k);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return std::exp(log_prefactor) * sum;
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(log_prefactor) * h;
}

double chi_square_cdf(double x, int df) { return gamma_p(df / 2.0, x / 2.0); }

double chi_square_pdf(double x, int df) {
    if (x <= 0.0) return 0.0;
    const double half = df / 2.0;
    return std::exp((half - 1.0) * std::log(x) - x / 2.0 - half * std::log(2.0) -
                    std::lgamma(half));
}

}  // namespace

double chi_square_quantile(int df, double p) {
    if (df < 1) throw std::domain_error("chi_square_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chi_square_quantile: p must be in (0, 1)");

    // Wilson-Hilferty start, then safeguarded Newton on the CDF.
    const double z = normal_quantile(p);
    const double c = 2.0 / (9.0 * df);
    double x = df * std::pow(std::max(1.0 - c + z * std::sqrt(c), 1e-8), 3);

    double lo = 0.0;
    double hi = std::max(x, 1.0);
    while (chi_square_cdf(hi, df) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    x = std::clamp(x, lo + 1e-300, hi);
    for (int it = 0; it < 200; ++it) {
        const double f = chi_square_cdf(x, df) - p;
        if (f > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        const double d = chi_square_pdf(x, df);
        double next = d > 0.0 ? x - f / d : 0.0;
        if (!(next > lo && next < hi)) next = (lo + hi) / 2.0;
        const double step = std::abs(next - x);
        x = next;
        if (step <= 1e-14 * std::max(x, 1.0)) break;
    }
    return x;
}

BoxSet calibrate_box(const MomentEstimates& moments, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("calibrate_box: alpha must be in (0, 1)");
    if (moments.n < 1) throw std::invalid_argument("calibrate_box: moments carry no observations");
    BoxSet set;
    set.alpha = alpha;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    set.delta = moments.per_asset_std * (z / std::sqrt(static_cast<double>(moments.n)));
    return set;
}

EllipsoidSet calibrate_ellipsoid(const MomentEstimates& moments, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("calibrate_ellipsoid: alpha must be in (0, 1)");
    if (moments.n < 1) throw std::invalid_argument("calibrate_ellipsoid: moments carry no observations");
    EllipsoidSet set;
    set.alpha = alpha;
    set.delta_sq = chi_square_quantile(static_cast<int>(moments.mu_hat.size()), 1.0 - alpha);
    set.sigma_mu = moments.sigma_hat / static_cast<double>(moments.n);
    return set;
}

int bootstrap_rank(double q, int beta) {
    const int k = static_cast<int>(std::ceil(q * beta - 1e-9));
    return std::clamp(k, 1, beta);
}

SeparableSet bootstrap_separable(const ReturnMatrix& returns, double alpha, int beta,
                                 std::uint64_t seed, int threads) {
    const Eigen::Index n = returns.returns.rows();
    const Eigen::Index assets = returns.returns.cols();
    if (n < 2) throw std::invalid_argument("bootstrap_separable: need at least 2 return rows");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("bootstrap_separable: alpha must be in (0, 1)");
    if (beta < 100) throw std::invalid_argument("bootstrap_separable: beta must be >= 100");

    const Eigen::MatrixXd& data = returns.returns;
    const Eigen::Index packed = assets * (assets + 1) / 2;
    Eigen::MatrixXd mu_samples(beta, assets);
    Eigen::MatrixXd sig_samples(beta, packed);

    const auto run_range = [&](int b_begin, int b_end) {
        Eigen::VectorXd weights(n);
        Eigen::MatrixXd weighted(n, assets);
        Eigen::VectorXd mu(assets);
        Eigen::MatrixXd second(assets, assets);
        for (int b = b_begin; b < b_end; ++b) {
            std::mt19937_64 rng(derive_seed(seed, "bootstrap", static_cast<std::uint64_t>(b)));
            weights.setZero();
            for (Eigen::Index k = 0; k < n; ++k)
                weights(static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(n)))) += 1.0;
            mu = data.transpose() * weights / static_cast<double>(n);
            weighted = weights.asDiagonal() * data;
            second = data.transpose() * weighted / static_cast<double>(n);
            second -= mu * mu.transpose();
            mu_samples.row(b) = mu.transpose();
            Eigen::Index slot = 0;
            for (Eigen::Index i = 0; i < assets; ++i)
                for (Eigen::Index j = 0; j <= i; ++j) sig_samples(b, slot++) = second(i, j);
        }
    };

    int worker_count = threads > 0 ? threads
                                   : static_cast<int>(std::min(8u, std::max(1u, std::thread::hardware_concurrency())));
    worker_count = std::min(worker_count, beta);
    if (worker_count <= 1) {
        run_range(0, beta);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (beta + worker_count - 1) / worker_count;
        for (int w = 0; w < worker_count; ++w) {
            const int b0 = w * chunk;
            const int b1 = std::min(beta, b0 + chunk);
            if (b0 < b1) pool.emplace_back(run_range, b0, b1);
        }
        for (std::thread& t : pool) t.join();
    }

    const int k_lo = bootstrap_rank(alpha / 2.0, beta);
    const int k_hi = bootstrap_rank(1.0 - alpha / 2.0, beta);
    std::vector<double> buf(static_cast<std::size_t>(beta));
    const auto column_bounds = [&](const Eigen::MatrixXd& samples, Eigen::Index col, double& lo,
                                   double& hi) {
        for (int b = 0; b < beta; ++b) buf[static_cast<std::size_t>(b)] = samples(b, col);
        std::nth_element(buf.begin(), buf.begin() + (k_lo - 1), buf.end());
        lo = buf[static_cast<std::size_t>(k_lo - 1)];
        std::nth_element(buf.begin(), buf.begin() + (k_hi - 1), buf.end());
        hi = buf[static_cast<std::size_t>(k_hi - 1)];
    };

    SeparableSet set;
    set.alpha = alpha;
    set.beta = beta;
    set.seed = seed;
    set.mu_lo.resize(assets);
    set.mu_hi.resize(assets);
    for (Eigen::Index i = 0; i < assets; ++i) column_bounds(mu_samples, i, set.mu_lo(i), set.mu_hi(i));

    set.sigma_lo.resize(assets, assets);
    set.sigma_hi.resize(assets, assets);
    Eigen::Index slot = 0;
    for (Eigen::Index i = 0; i < assets; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double lo = 0.0, hi = 0.0;
            column_bounds(sig_samples, slot++, lo, hi);
            set.sigma_lo(i, j) = set.sigma_lo(j, i) = lo;
            set.sigma_hi(i, j) = set.sigma_hi(j, i) = hi;
        }
    }
    set.sigma_hi = nearest_psd(set.sigma_hi, 0.0);
    return set;
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& matrix, double floor_eigenvalue) {
    if (matrix.rows() != matrix.cols()) throw std::invalid_argument("nearest_psd: matrix must be square");
    if (floor_eigenvalue < 0.0) throw std::domain_error("nearest_psd: floor must be nonnegative");
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("nearest_psd: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(matrix);
    if (eigen.info() != Eigen::Success) throw std::runtime_error("nearest_psd: eigendecomposition failed");
    if (eigen.eigenvalues().minCoeff() >= floor_eigenvalue) return matrix;

    const Eigen::VectorXd clipped = eigen.eigenvalues().cwiseMax(floor_eigenvalue);
    Eigen::MatrixXd repaired =
        eigen.eigenvectors() * clipped.asDiagonal() * eigen.eigenvectors().transpose();
    return ((repaired + repaired.transpose()) / 2.0).eval();
}

void to_json(nlohmann::json& j, const MomentEstimates& m) {
    j = nlohmann::json{{"mu_hat", vec_json(m.mu_hat)},
                       {"sigma_hat", mat_json(m.sigma_hat)},
                       {"n", m.n},
                       {"per_asset_std", vec_json(m.per_asset_std)}};
}

void from_json(const nlohmann::json& j, MomentEstimates& m) {
    m.mu_hat = vec_from_json(j.at("mu_hat"));
    m.sigma_hat = mat_from_json(j.at("sigma_hat"));
    m.n = j.at("n").get<std::size_t>();
    m.per_asset_std = vec_from_json(j.at("per_asset_std"));
}

void to_json(nlohmann::json& j, const BoxSet& s) {
    j = nlohmann::json{{"delta", vec_json(s.delta)}, {"alpha", s.alpha}};
}

void from_json(const nlohmann::json& j, BoxSet& s) {
    s.delta = vec_from_json(j.at("delta"));
    s.alpha = j.at("alpha").get<double>();
}

void to_json(nlohmann::json& j, const EllipsoidSet& s) {
    j = nlohmann::json{{"delta_sq", s.delta_sq}, {"sigma_mu", mat_json(s.sigma_mu)}, {"alpha", s.alpha}};
}

void from_json(const nlohmann::json& j, EllipsoidSet& s) {
    s.delta_sq = j.at("delta_sq").get<double>();
    s.sigma_mu = mat_from_json(j.at("sigma_mu"));
    s.alpha = j.at("alpha").get<double>();
}

void to_json(nlohmann::json& j, const SeparableSet& s) {
    j = nlohmann::json{{"mu_lo", vec_json(s.mu_lo)},     {"mu_hi", vec_json(s.mu_hi)},
                       {"sigma_lo", mat_json(s.sigma_lo)}, {"sigma_hi", mat_json(s.sigma_hi)},
                       {"alpha", s.alpha},                {"beta", s.beta},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SeparableSet& s) {
    s.mu_lo = vec_from_json(j.at("mu_lo"));
    s.mu_hi = vec_from_json(j.at("mu_hi"));
    s.sigma_lo = mat_from_json(j.at("sigma_lo"));
    s.sigma_hi = mat_from_json(j.at("sigma_hi"));
    s.alpha = j.at("alpha").get<double>();
    s.beta = j.at("beta").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace rfolio
