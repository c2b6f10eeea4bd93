#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rfolio {

// Adjusted-close price table: one row per trading day, one column per asset.
// Invariants after ingestion: dates strictly ascending ISO-8601, every price
// positive, no missing cells.
struct PriceTable {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd prices;  // n_days x N
};

// Per-period log returns, n x N.  `labels` carries the row keys used when the
// matrix round-trips through CSV (dates for ingested data, period indices for
// simulated data); it is either empty or has one entry per row.
struct ReturnMatrix {
    std::vector<std::string> tickers;
    Eigen::MatrixXd returns;
    std::vector<std::string> labels;
};

// Seeded multivariate-normal sampling setup.  jitter == 0 means "auto": if the
// plain factorization of the covariance fails, retry with
// 1e-10 * max diagonal entry added to the diagonal.
struct SimulationConfig {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    int sample_count = 1;
    std::uint64_t seed = 0;
    double jitter = 0.0;
};

// Parse a price CSV (header "date,<ticker1>,...,<tickerN>").  Rows are sorted
// ascending by date; duplicate dates, ragged rows, malformed numbers, missing
// cells and non-positive prices are rejected with the offending row/column
// named.  With forward_fill, an empty cell inherits the previous day's price.
PriceTable parse_price_table(const std::string& csv_text, bool forward_fill = false);

// returns[t][i] = ln(prices[t+1][i] / prices[t][i]); needs >= 3 price rows.
ReturnMatrix compute_log_returns(const PriceTable& prices);

// sample_count i.i.d. draws from N(mean, covariance) via a lower-triangular
// factorization of (covariance + jitter * I); deterministic given the seed.
ReturnMatrix simulate_returns(const SimulationConfig& config);

// Returns CSV uses the price layout minus the first date row: header
// "date,<tickers>", one labelled row per period, values in full precision.
std::string return_csv(const ReturnMatrix& returns);
ReturnMatrix parse_return_csv(const std::string& csv_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace rfolio
