#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cctrain/config.hpp"
#include "cctrain/errors.hpp"
#include "cctrain/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    uint64_t seed_offset = 0;
};

cctrain::RunConfig resolve(const CommonOpts& opts) {
    cctrain::RunConfig cfg = cctrain::load_config_file(opts.config_path);
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (opts.seed_offset != 0) cctrain::apply_seed_offset(cfg, opts.seed_offset);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run configuration (JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "Override the config's output directory");
    cmd->add_option("--seed-offset", opts.seed_offset, "Shift every seed stream by N");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cctrain - confidence-guided training for continuous time-series classification"};
    app.require_subcommand(1);

    CommonOpts opts;
    CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset CSV");
    CLI::App* pre = app.add_subcommand("pretrain", "Data arrangement: teacher, betas, buckets");
    CLI::App* train = app.add_subcommand("train", "Full training pipeline into a run directory");
    CLI::App* eval = app.add_subcommand("evaluate", "Metrics report for a finished run");
    CLI::App* cmp = app.add_subcommand("compare-orders", "Train per (strategy, seed) and merge");
    for (CLI::App* cmd : {gen, pre, train, eval, cmp}) add_common(cmd, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        cctrain::RunConfig cfg = resolve(opts);
        std::string artifact;
        if (gen->parsed()) artifact = cctrain::cmd_gen_data(cfg);
        else if (pre->parsed()) artifact = cctrain::cmd_pretrain(cfg);
        else if (train->parsed()) artifact = cctrain::cmd_train(cfg);
        else if (eval->parsed()) artifact = cctrain::cmd_evaluate(cfg);
        else artifact = cctrain::cmd_compare_orders(cfg);
        std::cout << artifact << "\n";
    } catch (const cctrain::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
