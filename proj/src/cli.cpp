#include "rfolio/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "rfolio/json_io.hpp"
#include "rfolio/rng.hpp"

namespace rfolio {

namespace {

namespace fs = std::filesystem;

std::string path_stem(const std::string& path) { return fs::path(path).stem().string(); }

std::string default_label(const RunConfig& cfg) {
    if (!cfg.label.empty()) return cfg.label;
    if (cfg.simulate_block) {
        const int samples = cfg.samples > 0 ? cfg.samples : cfg.simulate_block->samples;
        return "sim" + std::to_string(cfg.simulate_block->mean.size()) + "x" + std::to_string(samples);
    }
    if (!cfg.csv.empty() && cfg.samples > 0) return path_stem(cfg.csv) + "-sim" + std::to_string(cfg.samples);
    if (!cfg.csv.empty()) return path_stem(cfg.csv);
    return "dataset";
}

ReturnMatrix load_returns_from_csv(const RunConfig& cfg) {
    const std::string text = read_text_file(cfg.csv);
    if (cfg.csv_is_returns) return parse_return_csv(text);
    return compute_log_returns(parse_price_table(text, cfg.forward_fill));
}

void write_artifact(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    write_text_file((dir / name).string(), content);
}

}  // namespace

void load_config_file(const std::string& path, RunConfig& cfg) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw usage_error("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw usage_error("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "csv") cfg.csv = value.get<std::string>();
        else if (key == "returns") cfg.csv_is_returns = value.get<bool>();
        else if (key == "samples") cfg.samples = value.get<int>();
        else if (key == "alpha") cfg.alpha = value.get<double>();
        else if (key == "beta") cfg.beta = value.get<int>();
        else if (key == "lambda_grid") cfg.lambda_grid = value.get<std::vector<double>>();
        else if (key == "rf_annual") cfg.rf_annual = value.get<double>();
        else if (key == "periods_per_year") cfg.periods_per_year = value.get<int>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "out") cfg.out = value.get<std::string>();
        else if (key == "label") cfg.label = value.get<std::string>();
        else if (key == "threads") cfg.threads = value.get<int>();
        else if (key == "forward_fill") cfg.forward_fill = value.get<bool>();
        else if (key == "solver") {
            for (const auto& [skey, svalue] : value.items()) {
                if (skey == "tolerance") cfg.solver_tolerance = svalue.get<double>();
                else if (skey == "max_iterations") cfg.solver_max_iterations = svalue.get<int>();
                else throw usage_error("unknown solver config key '" + skey + "'");
            }
        } else if (key == "simulate") {
            SimBlock block;
            if (!value.contains("mean") || !value.contains("covariance"))
                throw usage_error("simulate block needs 'mean' and 'covariance'");
            block.mean = vec_from_json(value.at("mean"));
            block.covariance = mat_from_json(value.at("covariance"));
            if (value.contains("samples")) block.samples = value.at("samples").get<int>();
            cfg.simulate_block = std::move(block);
        } else {
            throw usage_error("unknown config key '" + key + "'");
        }
    }
}

Dataset resolve_dataset(const RunConfig& cfg) {
    const bool has_csv = !cfg.csv.empty();
    const bool has_block = cfg.simulate_block.has_value();
    if (has_csv == has_block)
        throw usage_error("exactly one data source required: --csv <path> or a simulate config block");

    if (has_block) {
        SimulationConfig sim;
        sim.mean = cfg.simulate_block->mean;
        sim.covariance = cfg.simulate_block->covariance;
        sim.sample_count = cfg.samples > 0 ? cfg.samples : cfg.simulate_block->samples;
        if (sim.sample_count < 1) throw usage_error("simulate block needs a positive sample count");
        sim.seed = cfg.seed;
        return sim;
    }

    const ReturnMatrix returns = load_returns_from_csv(cfg);
    if (cfg.samples > 0) {
        const MomentEstimates moments = estimate_moments(returns);
        SimulationConfig sim;
        sim.mean = moments.mu_hat;
        sim.covariance = moments.sigma_hat;
        sim.sample_count = cfg.samples;
        sim.seed = cfg.seed;
        return sim;
    }
    return returns;
}

EvalConfig eval_config(const RunConfig& cfg) {
    EvalConfig config;
    config.lambda_grid = cfg.lambda_grid;
    config.rf_annual = cfg.rf_annual;
    config.periods_per_year = cfg.periods_per_year;
    config.alpha = cfg.alpha;
    config.beta = cfg.beta;
    config.seed = cfg.seed;
    config.solver.tolerance = cfg.solver_tolerance;
    config.solver.max_iterations = cfg.solver_max_iterations;
    config.threads = cfg.threads;
    config.label = default_label(cfg);
    return config;
}

void cmd_ingest(const RunConfig& cfg) {
    if (cfg.csv.empty()) throw usage_error("ingest needs --csv <path>");
    const std::string text = read_text_file(cfg.csv);
    const ReturnMatrix returns =
        cfg.passthrough ? parse_return_csv(text) : compute_log_returns(parse_price_table(text, cfg.forward_fill));
    write_artifact(cfg.out, "returns.csv", return_csv(returns));
    std::cout << (fs::path(cfg.out) / "returns.csv").string() << '\n';
}

void cmd_simulate(const RunConfig& cfg) {
    const Dataset dataset = resolve_dataset(cfg);
    const auto* sim = std::get_if<SimulationConfig>(&dataset);
    if (!sim) throw usage_error("simulate needs --samples <k> or a simulate config block");
    write_artifact(cfg.out, "returns.csv", return_csv(simulate_returns(*sim)));
    std::cout << (fs::path(cfg.out) / "returns.csv").string() << '\n';
}

void cmd_compare(const RunConfig& cfg) {
    const Dataset dataset = resolve_dataset(cfg);
    const EvalConfig config = eval_config(cfg);
    const ExperimentResult result = run_experiment(dataset, config);

    const fs::path dir(cfg.out);
    write_artifact(dir, "report.csv", sweep_csv(result.report));
    write_artifact(dir, "report.json", nlohmann::json(result.report).dump(2) + "\n");
    for (std::size_t m = 0; m < kAllModels.size(); ++m) {
        const std::string name = std::string("frontier_") + model_name(kAllModels[m]) + ".csv";
        write_artifact(dir, name, frontier_csv(kAllModels[m], result.frontiers[m]));
    }
    write_artifact(dir, "metadata.json", nlohmann::json(result.report.meta).dump(2) + "\n");
    nlohmann::json calibration{{"alpha", config.alpha},
                               {"beta", config.beta},
                               {"seed", config.seed},
                               {"moments", result.moments},
                               {"box", result.sets.box},
                               {"ellipsoid", result.sets.ellipsoid},
                               {"separable", result.sets.separable}};
    write_artifact(dir, "calibration.json", calibration.dump(2) + "\n");
    std::cout << (dir / "report.csv").string() << '\n';
}

void cmd_frontier(const RunConfig& cfg) {
    const ModelKind kind = model_from_name(cfg.model);
    const Dataset dataset = resolve_dataset(cfg);
    const EvalConfig config = eval_config(cfg);

    ReturnMatrix data;
    if (const auto* sim = std::get_if<SimulationConfig>(&dataset)) {
        data = simulate_returns(*sim);
    } else {
        data = std::get<ReturnMatrix>(dataset);
    }
    const MomentEstimates moments = estimate_moments(data);

    // Only the set the requested model consumes is calibrated.
    CalibratedSets sets;
    if (kind == ModelKind::Box) sets.box = calibrate_box(moments, config.alpha);
    if (kind == ModelKind::Ellip) sets.ellipsoid = calibrate_ellipsoid(moments, config.alpha);
    if (kind == ModelKind::Sep)
        sets.separable = bootstrap_separable(data, config.alpha, config.beta,
                                             derive_seed(config.seed, "bootstrap"), config.threads);

    const std::vector<FrontierPoint> frontier = efficient_frontier(kind, moments, sets, config);
    const std::string name = std::string("frontier_") + model_name(kind) + ".csv";
    write_artifact(cfg.out, name, frontier_csv(kind, frontier));
    std::cout << (fs::path(cfg.out) / name).string() << '\n';
}

void cmd_summary(const RunConfig& cfg) {
    if (cfg.inputs.empty()) throw usage_error("summary needs at least one report.json path");
    std::vector<SweepReport> reports;
    reports.reserve(cfg.inputs.size());
    for (const std::string& path : cfg.inputs)
        reports.push_back(nlohmann::json::parse(read_text_file(path)).get<SweepReport>());
    const std::vector<SummaryRow> rows = summarize_max_avg_sharpe(reports);
    const std::string csv = summary_csv(rows);
    write_artifact(cfg.out, "summary.csv", csv);
    std::cout << csv;
}

int run_cli(int argc, const char* const* argv) {
    RunConfig cfg;

    // The config file seeds the defaults, so flags parsed afterwards win.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) {
                load_config_file(argv[i + 1], cfg);
            } else if (arg.rfind("--config=", 0) == 0) {
                load_config_file(arg.substr(9), cfg);
            }
        } catch (const usage_error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
    }

    CLI::App app{"robust portfolio optimization toolkit"};
    app.require_subcommand(1);
    std::string config_path;  // consumed above; registered so CLI11 accepts it

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--seed", cfg.seed, "root seed for all randomness");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--label", cfg.label, "dataset label stamped into reports");
    };
    const auto add_data = [&](CLI::App* sub) {
        sub->add_option("--csv", cfg.csv, "price CSV (header date,<tickers>)");
        sub->add_flag("--returns", cfg.csv_is_returns, "treat --csv as a returns file");
        sub->add_option("--samples", cfg.samples, "simulate this many draws from the CSV's moments");
        sub->add_flag("--forward-fill", cfg.forward_fill, "fill missing prices from the previous day");
    };
    const auto add_model_params = [&](CLI::App* sub) {
        sub->add_option("--alpha", cfg.alpha, "uncertainty-set confidence parameter");
        sub->add_option("--beta", cfg.beta, "bootstrap resample count");
        sub->add_option("--lambda-grid", cfg.lambda_grid, "risk-aversion grid")->delimiter(',');
        sub->add_option("--rf-annual", cfg.rf_annual, "annual riskfree rate");
        sub->add_option("--periods-per-year", cfg.periods_per_year, "periods per year");
        sub->add_option("--tolerance", cfg.solver_tolerance, "solver KKT tolerance");
        sub->add_option("--max-iterations", cfg.solver_max_iterations, "solver iteration cap");
        sub->add_option("--threads", cfg.threads, "bootstrap worker threads (0 = auto)");
    };

    CLI::App* ingest = app.add_subcommand("ingest", "convert a price CSV into a log-return CSV");
    add_common(ingest);
    ingest->add_option("--csv", cfg.csv, "price CSV path")->required();
    ingest->add_flag("--passthrough", cfg.passthrough, "input is already a returns file");
    ingest->add_flag("--forward-fill", cfg.forward_fill, "fill missing prices from the previous day");

    CLI::App* simulate = app.add_subcommand("simulate", "draw seeded multivariate-normal returns");
    add_common(simulate);
    add_data(simulate);

    CLI::App* compare = app.add_subcommand("compare", "run the model comparison and emit reports");
    add_common(compare);
    add_data(compare);
    add_model_params(compare);

    CLI::App* frontier = app.add_subcommand("frontier", "trace one model's efficient frontier");
    add_common(frontier);
    add_data(frontier);
    add_model_params(frontier);
    frontier->add_option("--model", cfg.model, "mark|box|ellip|sep")
        ->required()
        ->check(CLI::IsMember({"mark", "box", "ellip", "sep"}));

    CLI::App* summary = app.add_subcommand("summary", "max average Sharpe per report");
    add_common(summary);
    summary->add_option("reports", cfg.inputs, "report.json files")->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ingest->parsed()) cmd_ingest(cfg);
        else if (simulate->parsed()) cmd_simulate(cfg);
        else if (compare->parsed()) cmd_compare(cfg);
        else if (frontier->parsed()) cmd_frontier(cfg);
        else if (summary->parsed()) cmd_summary(cfg);
        return 0;
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace rfolio
