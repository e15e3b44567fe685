#include "lut/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"lutnet: training, re-parameterization, and cost analysis of lookup networks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", model_path, arch, processor = "a7", layer;
    uint64_t seed = 0;
    bool seed_set = false, f64_check = false;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config) cmd->add_option("--config", config_path, "run configuration (JSON)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    auto* train = app.add_subcommand("train", "train a network per the configuration");
    add_common(train, true);
    train->add_flag("--f64-check", f64_check, "run 64-bit gradient verification before training");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured test set");
    add_common(eval, true);
    eval->add_option("--model", model_path, "checkpoint file")->required();

    auto* reparam = app.add_subcommand("reparam", "convert a checkpoint to the lookup+add form");
    add_common(reparam, false);
    reparam->add_option("--model", model_path, "checkpoint file")->required();

    auto* cost = app.add_subcommand("cost", "per-operation energy/latency estimates");
    add_common(cost, false);
    cost->add_option("--arch", arch, "reference architecture, e.g. resnet20-lookup");
    cost->add_option("--model", model_path, "model file (checkpoint or converted)");
    cost->add_option("--processor", processor, "a7 or a15");

    auto* inspect = app.add_subcommand("inspect-table", "dump a layer's lookup table as CSV");
    add_common(inspect, false);
    inspect->add_option("--model", model_path, "checkpoint file")->required();
    inspect->add_option("--layer", layer, "lookup layer name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            lut::RunConfig cfg = config_path.empty() ? lut::RunConfig{}
                                                     : lut::load_run_config(config_path);
            if (seed_set) {
                cfg.seed = seed;
                cfg.train.seed = seed;
            }
            if (f64_check && !lut::run_f64_gradcheck(cfg.seed, std::cout)) {
                std::cerr << "error: 64-bit gradient verification failed\n";
                return 3;
            }
            const auto res = lut::cmd_train(cfg, out_dir);
            std::cout << "trained " << cfg.arch.name << " for " << cfg.train.epochs
                      << " epochs; final test accuracy " << res.final_test_acc << "\n"
                      << "wrote " << out_dir << "/checkpoint.lut and metrics.csv\n";
        } else if (eval->parsed()) {
            lut::RunConfig cfg = config_path.empty() ? lut::RunConfig{}
                                                     : lut::load_run_config(config_path);
            if (seed_set) cfg.seed = seed;
            std::cout << "test accuracy: " << lut::cmd_eval(cfg, model_path) << "\n";
        } else if (reparam->parsed()) {
            const auto res = lut::cmd_reparam(model_path, out_dir,
                                              seed_set ? seed : uint64_t{99});
            std::cout << res.report.text();
            std::cout << "equivalence max abs diff: " << res.equivalence_max_diff << "\n"
                      << "converted-segment multiplications: " << res.converted_muls << "\n"
                      << "wrote " << res.converted_path << " and " << res.report_path << "\n";
        } else if (cost->parsed()) {
            if (arch.empty() == model_path.empty())
                throw std::invalid_argument("cost: pass exactly one of --arch or --model");
            lut::cost::parse_processor(processor); // validate
            std::cout << lut::cmd_cost(arch, model_path, processor, out_dir);
        } else if (inspect->parsed()) {
            const auto res = lut::cmd_inspect_table(model_path, layer, out_dir);
            std::cout << "wrote " << res.csv_path << " (histogram total " << res.histogram_total
                      << ", " << (res.histogram_unimodal ? "unimodal" : "not unimodal") << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
