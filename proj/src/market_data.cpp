#include "rfolio/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rfolio/rng.hpp"

namespace rfolio {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    if (!cur.empty()) lines.push_back(cur);
    // strip UTF-8 BOM
    if (!lines.empty() && lines[0].rfind("\xEF\xBB\xBF", 0) == 0) lines[0].erase(0, 3);
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(5, 2));
    const int d = std::stoi(s.substr(8, 2));
    if (m < 1 || m > 12 || d < 1) return false;
    static const int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int limit = days[m - 1];
    if (m == 2 && is_leap(y)) limit = 29;
    return d <= limit;
}

// Strict finite-double parse of a whole cell; "inf"/"nan" are rejected.
bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

[[noreturn]] void fail_cell(const std::string& what, int line, const std::string& column) {
    std::ostringstream os;
    os << what << " at line " << line << ", column '" << column << "'";
    throw std::invalid_argument(os.str());
}

// Semidefinite-tolerant lower Cholesky.  Pivots within -tol of zero are
// clamped, so exactly singular covariances (zero matrix, rank-deficient
// bootstrap resamples) factor cleanly.  Returns false for indefinite input.
bool cholesky_psd(const Eigen::MatrixXd& a, double tol, Eigen::MatrixXd& l) {
    const Eigen::Index n = a.rows();
    l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d < -tol) return false;
        l(j, j) = std::sqrt(std::max(d, 0.0));
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double off = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) off -= l(i, k) * l(j, k);
            if (l(j, j) > 0.0) {
                l(i, j) = off / l(j, j);
            } else if (std::abs(off) > tol) {
                return false;  // zero pivot with coupling left over
            }
        }
    }
    return true;
}

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

PriceTable parse_price_table(const std::string& csv_text, bool forward_fill) {
    const std::vector<std::string> lines = split_lines(csv_text);
    if (lines.size() < 2) throw std::invalid_argument("price CSV needs a header and at least one data row");

    const std::vector<std::string> header = split_fields(lines[0]);
    if (header.empty() || trim(header[0]) != "date")
        throw std::invalid_argument("price CSV header must start with 'date'");
    if (header.size() < 2) throw std::invalid_argument("price CSV has no ticker columns");

    PriceTable table;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string t = trim(header[i]);
        if (t.empty()) fail_cell("empty ticker name", 1, "#" + std::to_string(i + 1));
        if (std::find(table.tickers.begin(), table.tickers.end(), t) != table.tickers.end())
            fail_cell("duplicate ticker", 1, t);
        table.tickers.push_back(t);
    }
    const std::size_t cols = table.tickers.size();

    struct Row {
        std::string date;
        std::vector<double> values;  // NaN marks a missing cell until filled
        int line;
    };
    std::vector<Row> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const std::vector<std::string> fields = split_fields(lines[li]);
        const int line_no = static_cast<int>(li + 1);
        if (fields.size() != cols + 1) {
            std::ostringstream os;
            os << "ragged row at line " << line_no << ": expected " << cols + 1 << " fields, got "
               << fields.size();
            throw std::invalid_argument(os.str());
        }
        Row row;
        row.line = line_no;
        row.date = trim(fields[0]);
        if (!is_iso_date(row.date)) fail_cell("malformed ISO-8601 date '" + row.date + "'", line_no, "date");
        row.values.resize(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string cell = trim(fields[c + 1]);
            if (cell.empty()) {
                if (!forward_fill) fail_cell("missing price", line_no, table.tickers[c]);
                row.values[c] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double v = 0.0;
            if (!parse_double(cell, v)) fail_cell("malformed number '" + cell + "'", line_no, table.tickers[c]);
            row.values[c] = v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("price CSV has no data rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].date == rows[r - 1].date)
            throw std::invalid_argument("duplicate date '" + rows[r].date + "' at line " +
                                        std::to_string(rows[r].line));

    // Forward-fill runs in date order so gaps inherit the latest earlier close.
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (std::isnan(rows[r].values[c])) {
                if (r == 0) fail_cell("missing price with no earlier value to fill from", rows[r].line,
                                      table.tickers[c]);
                rows[r].values[c] = rows[r - 1].values[c];
            }
        }
    }

    table.dates.reserve(rows.size());
    table.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        table.dates.push_back(rows[r].date);
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = rows[r].values[c];
            if (v <= 0.0) fail_cell("non-positive price " + format_full(v), rows[r].line, table.tickers[c]);
            table.prices(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return table;
}

ReturnMatrix compute_log_returns(const PriceTable& prices) {
    const Eigen::Index days = prices.prices.rows();
    if (days < 3)
        throw std::invalid_argument("insufficient data: need at least 3 price rows, got " +
                                    std::to_string(days));
    ReturnMatrix out;
    out.tickers = prices.tickers;
    out.returns = (prices.prices.bottomRows(days - 1).array() /
                   prices.prices.topRows(days - 1).array())
                      .log()
                      .matrix();
    out.labels.assign(prices.dates.begin() + 1, prices.dates.end());
    return out;
}

ReturnMatrix simulate_returns(const SimulationConfig& config) {
    const Eigen::Index n = config.mean.size();
    if (n < 1) throw std::invalid_argument("simulation mean vector is empty");
    if (config.covariance.rows() != n || config.covariance.cols() != n)
        throw std::invalid_argument("simulation covariance dimensions do not match the mean");
    if (config.sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
    if (config.jitter < 0.0) throw std::invalid_argument("jitter must be nonnegative");
    const double scale = config.covariance.cwiseAbs().maxCoeff();
    if (!config.covariance.isApprox(config.covariance.transpose(), 1e-9) && scale > 0.0)
        throw std::invalid_argument("simulation covariance is not symmetric");

    const double max_diag = n > 0 ? config.covariance.diagonal().maxCoeff() : 0.0;
    const double pivot_tol = 1e-12 * std::max(max_diag, 0.0);
    Eigen::MatrixXd chol;
    if (!cholesky_psd(config.covariance, pivot_tol, chol)) {
        const double jitter = config.jitter > 0.0 ? config.jitter : 1e-10 * max_diag;
        Eigen::MatrixXd bumped = config.covariance;
        bumped.diagonal().array() += jitter;
        if (!cholesky_psd(bumped, pivot_tol, chol))
            throw std::runtime_error("covariance is not positive semidefinite (factorization failed "
                                     "after jitter " + format_full(jitter) + ")");
    }

    ReturnMatrix out;
    out.tickers.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.tickers.push_back("a" + std::to_string(i + 1));
    out.returns.resize(config.sample_count, n);
    NormalSampler normal(derive_seed(config.seed, "simulate"));
    Eigen::VectorXd z(n);
    for (int r = 0; r < config.sample_count; ++r) {
        for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
        out.returns.row(r) = (config.mean + chol * z).transpose();
    }
    out.labels.reserve(static_cast<std::size_t>(config.sample_count));
    for (int r = 0; r < config.sample_count; ++r) out.labels.push_back(std::to_string(r + 1));
    return out;
}

std::string return_csv(const ReturnMatrix& returns) {
    const Eigen::Index n = returns.returns.rows();
    const Eigen::Index cols = returns.returns.cols();
    if (!returns.labels.empty() && returns.labels.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("return matrix labels do not match the row count");
    std::ostringstream os;
    os << "date";
    for (const std::string& t : returns.tickers) os << ',' << t;
    os << '\n';
    for (Eigen::Index r = 0; r < n; ++r) {
        os << (returns.labels.empty() ? std::to_string(r + 1) : returns.labels[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < cols; ++c) os << ',' << format_full(returns.returns(r, c));
        os << '\n';
    }
    return os.str();
}

ReturnMatrix parse_return_csv(const std::string& csv_text) {
    const std::vector<std::string> lines = split_lines(csv_text);
    if (lines.size() < 2) throw std::invalid_argument("return CSV needs a header and at least one data row");
    const std::vector<std::string> header = split_fields(lines[0]);
    if (header.size() < 2 || trim(header[0]) != "date")
        throw std::invalid_argument("return CSV header must be 'date,<tickers>'");

    ReturnMatrix out;
    for (std::size_t i = 1; i < header.size(); ++i) out.tickers.push_back(trim(header[i]));
    const std::size_t cols = out.tickers.size();

    std::vector<std::vector<double>> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const std::vector<std::string> fields = split_fields(lines[li]);
        const int line_no = static_cast<int>(li + 1);
        if (fields.size() != cols + 1) {
            std::ostringstream os;
            os << "ragged row at line " << line_no << ": expected " << cols + 1 << " fields, got "
               << fields.size();
            throw std::invalid_argument(os.str());
        }
        out.labels.push_back(trim(fields[0]));
        std::vector<double> vals(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            if (!parse_double(fields[c + 1], vals[c]))
                fail_cell("malformed number '" + trim(fields[c + 1]) + "'", line_no, out.tickers[c]);
        }
        rows.push_back(std::move(vals));
    }
    if (rows.size() < 2) throw std::invalid_argument("return CSV needs at least 2 data rows");
    out.returns.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out.returns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace rfolio
