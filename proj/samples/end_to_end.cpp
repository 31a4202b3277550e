// Generates a small seasonal dataset, then walks the whole flow:
// analyze -> train -> eval, printing each report.

#include <filesystem>
#include <iostream>

#include "pcdf/cli.hpp"
#include "pcdf/synthetic.hpp"

int main() {
    const std::string dir = "sample_out";
    std::filesystem::create_directories(dir);
    const std::string csv = dir + "/demo.csv";
    pcdf::write_csv(pcdf::synth_seasonal_mix(1200, 6, 24, 7, 0.05, true), csv);

    pcdf::PipelineConfig config;
    config.data_path = csv;
    config.output_dir = dir;
    config.lookback = 96;
    config.horizon = 24;
    config.stride = 4;
    config.epochs = 200;
    config.lr = 0.01;
    config.alpha = 0.001;
    config.beta = 0.001;
    config.repetitions = 5;

    std::cout << "== analyze ==\n" << pcdf::cmd_analyze(config).dump(2) << "\n";
    std::cout << "== train ==\n" << pcdf::cmd_train(config).dump(2) << "\n";
    std::cout << "== eval ==\n" << pcdf::cmd_eval(config).dump(2) << "\n";
    return 0;
}
