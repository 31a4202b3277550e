// Command-line front end: analyze | train | eval | ablate | theory | bench.
// Configuration precedence: built-in defaults < --config file < flags/--set.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcdf/cli.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string data_path;
    std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "flat key=value config file");
    cmd->add_option("-s,--set", opts.overrides, "override a config key, e.g. --set epochs=50")
        ->take_all();
    cmd->add_option("-d,--data", opts.data_path, "input CSV path (overrides data_path)");
    cmd->add_option("-o,--output-dir", opts.output_dir, "artifact/report directory");
}

pcdf::PipelineConfig build_config(const CommonOpts& opts) {
    pcdf::PipelineConfig config;
    if (!opts.config_path.empty()) config = pcdf::load_config_file(opts.config_path);
    for (const auto& entry : opts.overrides) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw pcdf::ConfigError("--set expects key=value, got '" + entry + "'");
        pcdf::apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (!opts.data_path.empty()) config.data_path = opts.data_path;
    if (!opts.output_dir.empty()) config.output_dir = opts.output_dir;
    if (config.data_path.empty())
        throw pcdf::ConfigError("no input data: set data_path in the config or pass --data");
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"predictability-aware channel compression pipeline for multichannel time series"};
    app.require_subcommand(1);

    CommonOpts analyze_opts, train_opts, eval_opts, ablate_opts, bench_opts;
    auto* analyze = app.add_subcommand("analyze", "data diagnostics: periods, redundancy, scores");
    add_common(analyze, analyze_opts);
    auto* train = app.add_subcommand("train", "train the pipeline and write artifacts");
    add_common(train, train_opts);
    auto* eval = app.add_subcommand("eval", "evaluate trained artifacts: MSE, runtime, CDPI");
    add_common(eval, eval_opts);
    auto* ablate = app.add_subcommand("ablate", "run all five framework variants");
    add_common(ablate, ablate_opts);
    auto* bench = app.add_subcommand("bench", "latency: compressed predictor vs multichannel");
    add_common(bench, bench_opts);

    auto* theory = app.add_subcommand("theory", "closed-form calculators");
    pcdf::TheoryArgs theory_args;
    std::optional<std::size_t> opt_d, opt_e, opt_tau, opt_c, opt_l;
    std::optional<double> opt_sigma;
    theory->add_option("-D,--depth", opt_d, "predictor depth D");
    theory->add_option("-E,--epochs", opt_e, "training epochs E");
    theory->add_option("-t,--tau", opt_tau, "shared seasonal period tau");
    theory->add_option("-C,--channels", opt_c, "channel count C");
    theory->add_option("-L,--length", opt_l, "sequence length L");
    theory->add_option("--sigma2", opt_sigma, "redundancy noise variance sigma^2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // --help and friends exit cleanly; everything else is a usage error.
        return code == 0 ? 0 : static_cast<int>(pcdf::ExitCode::usage);
    }

    try {
        pcdf::json report;
        if (analyze->parsed()) {
            report = pcdf::cmd_analyze(build_config(analyze_opts));
        } else if (train->parsed()) {
            report = pcdf::cmd_train(build_config(train_opts));
        } else if (eval->parsed()) {
            report = pcdf::cmd_eval(build_config(eval_opts));
        } else if (ablate->parsed()) {
            report = pcdf::cmd_ablate(build_config(ablate_opts));
        } else if (bench->parsed()) {
            report = pcdf::cmd_bench(build_config(bench_opts));
        } else if (theory->parsed()) {
            theory_args.depth = opt_d;
            theory_args.epochs = opt_e;
            theory_args.tau = opt_tau;
            theory_args.channels = opt_c;
            theory_args.length = opt_l;
            theory_args.sigma_sq = opt_sigma;
            report = pcdf::cmd_theory(theory_args);
        }
        std::cout << report.dump(2) << '\n';
        return 0;
    } catch (const pcdf::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(pcdf::ExitCode::numeric);
    }
}
