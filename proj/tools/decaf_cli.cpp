// decaf: command line front end for the fairness-aware graph anomaly
// detection experiments. Exit codes: 0 success, 1 usage error, 2 runtime
// failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <decaf/harness.hpp>

namespace {

struct cli_overrides {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, cli_overrides& ov) {
    cmd->add_option("--config", ov.config_path, "experiment config JSON file");
    cmd->add_option("--seed", ov.seed, "base seed (overrides config)");
    cmd->add_option("--trials", ov.trials, "trials per variant (overrides config)");
    cmd->add_option("--out", ov.out, "output directory (overrides config)");
    cmd->add_option("--threads", ov.threads, "worker threads (overrides config)");
}

decaf::experiment_config resolve(const cli_overrides& ov) {
    decaf::experiment_config cfg;
    if (ov.config_path) cfg = decaf::load_experiment_config(*ov.config_path);
    if (ov.seed) cfg.base_seed = *ov.seed;
    if (ov.trials) cfg.n_trials = *ov.trials;
    if (ov.out) cfg.out_dir = *ov.out;
    if (ov.threads) cfg.threads = *ov.threads;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-aware graph anomaly detection experiments"};
    app.require_subcommand(1);

    cli_overrides ov;

    CLI::App* c_generate =
        app.add_subcommand("generate", "write a synthetic dataset bundle");
    add_common(c_generate, ov);

    CLI::App* c_inject = app.add_subcommand("inject", "plant outliers in a dataset");
    add_common(c_inject, ov);
    std::string inject_data;
    std::string inject_type;
    bool clear_labels = false;
    c_inject->add_option("--data", inject_data, "dataset directory to read")->required();
    c_inject->add_option("--type", inject_type, "structural or contextual");
    c_inject->add_flag("--clear-labels", clear_labels,
                       "drop existing labels before injection");

    CLI::App* c_verify = app.add_subcommand(
        "verify-scm", "check the causal model's conditional independences");

    CLI::App* c_run =
        app.add_subcommand("run", "train baseline and full variants, report metrics");
    add_common(c_run, ov);

    CLI::App* c_ablate =
        app.add_subcommand("ablate", "ablation over the fairness loss terms");
    add_common(c_ablate, ov);

    CLI::App* c_sweep = app.add_subcommand("sweep", "grid sweep over two loss weights");
    add_common(c_sweep, ov);

    CLI::App* c_correlate = app.add_subcommand(
        "correlate", "random loss-weight search with a correlation matrix");
    add_common(c_correlate, ov);
    std::optional<std::size_t> n_samples;
    c_correlate->add_option("--samples", n_samples, "number of weight samples");

    CLI::App* c_export = app.add_subcommand(
        "export-embeddings", "dump per-node latents of a saved model to CSV");
    std::string ckpt_path, export_data, export_out;
    c_export->add_option("--checkpoint", ckpt_path, "model checkpoint file")->required();
    c_export->add_option("--data", export_data, "dataset directory")->required();
    c_export->add_option("--out", export_out, "output CSV path")->required();

    CLI::App* c_perf =
        app.add_subcommand("perf", "epoch wall-time, baseline versus full objective");
    add_common(c_perf, ov);
    std::vector<std::size_t> sizes{500, 1000, 2000};
    c_perf->add_option("--sizes", sizes, "synthetic node counts to time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e); // prints help or the parse error
        return rc == 0 ? 0 : 1;
    }

    try {
        if (c_verify->parsed()) return decaf::cmd_verify_scm() ? 0 : 2;

        decaf::experiment_config cfg = resolve(ov);
        if (c_generate->parsed()) {
            decaf::cmd_generate(cfg);
        } else if (c_inject->parsed()) {
            if (!inject_type.empty()) cfg.inject_type = inject_type;
            decaf::cmd_inject(cfg, inject_data, clear_labels);
        } else if (c_run->parsed()) {
            decaf::cmd_run(cfg);
        } else if (c_ablate->parsed()) {
            decaf::cmd_ablate(cfg);
        } else if (c_sweep->parsed()) {
            decaf::cmd_sweep(cfg);
        } else if (c_correlate->parsed()) {
            if (n_samples) cfg.correlate.n_samples = *n_samples;
            decaf::cmd_correlate(cfg);
        } else if (c_export->parsed()) {
            decaf::cmd_export_embeddings(ckpt_path, export_data, export_out);
        } else if (c_perf->parsed()) {
            decaf::cmd_perf(cfg, sizes);
        }
    } catch (const decaf::config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
