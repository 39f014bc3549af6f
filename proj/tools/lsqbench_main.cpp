#include "experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using lsq::cli::ExperimentConfig;

struct CommonFlags {
    std::string dataset, synthetic, solvers, noise, out, config;
    int agents = -1;
    double tol = -1.0;
    long long max_iters = -1;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--dataset", f.dataset, "Matrix Market file");
    cmd->add_option("--synthetic", f.synthetic, "Synthetic problem: N,d,kappa,rank,seed");
    cmd->add_option("--agents", f.agents, "Agent count (default 10)");
    cmd->add_option("--solvers", f.solvers, "Comma list from ipg,gd,nag,hbm,apc,bfgs");
    cmd->add_option("--tol", f.tol, "Relative-error stop tolerance");
    cmd->add_option("--max-iters", f.max_iters, "Iteration cap");
    cmd->add_option("--noise", f.noise, "none | round:K | uniform:LO,HI,SEED");
    cmd->add_option("--out", f.out, "Output directory for CSV files");
    cmd->add_option("--config", f.config, "Key = value config file; flags override it");
    cmd->add_option("--seed", f.seed, "Seed for noise streams and randomized checks");
}

// Config file first, explicitly passed flags on top.
ExperimentConfig build_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config.empty()) cfg = lsq::cli::load_config_file(f.config);
    if (!f.dataset.empty()) {
        cfg.dataset = f.dataset;
        cfg.synthetic.reset();
    }
    if (!f.synthetic.empty()) {
        cfg.synthetic = lsq::cli::parse_synthetic_spec(f.synthetic);
        cfg.dataset.clear();
    }
    if (f.agents >= 0) cfg.agents = f.agents;
    if (!f.solvers.empty()) {
        cfg.solvers.clear();
        std::string tok;
        for (char c : f.solvers + ",") {
            if (c == ',') {
                if (!tok.empty()) cfg.solvers.push_back(tok);
                tok.clear();
            } else {
                tok += c;
            }
        }
    }
    if (f.tol >= 0.0) cfg.tol = f.tol;
    if (f.max_iters >= 0) cfg.max_iters = f.max_iters;
    if (!f.noise.empty()) cfg.noise = f.noise;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed linear least-squares solver workbench"};
    app.require_subcommand(1);

    CommonFlags spectra_f, compare_f, noise_f;
    long long check_seed = 0;
    std::string fetch_dir = "data";

    CLI::App* spectra = app.add_subcommand("spectra", "Print the Gram spectrum and tuned parameters");
    add_common(spectra, spectra_f);

    CLI::App* compare = app.add_subcommand("compare", "Run the configured solvers and emit CSV traces");
    add_common(compare, compare_f);

    CLI::App* noise = app.add_subcommand("noise", "Noisy runs: report asymptotic estimation errors");
    add_common(noise, noise_f);

    CLI::App* check = app.add_subcommand("check", "Run the randomized property suites");
    check->add_option("--seed", check_seed, "Suite seed (default 0)");

    CLI::App* fetch = app.add_subcommand("fetch", "Download the benchmark matrices");
    fetch->add_option("--out", fetch_dir, "Data directory (default ./data)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (spectra->parsed()) {
            lsq::cli::cmd_spectra(build_config(spectra_f), std::cout);
            return 0;
        }
        if (compare->parsed()) {
            lsq::cli::cmd_compare(build_config(compare_f), std::cout);
            return 0;
        }
        if (noise->parsed()) {
            ExperimentConfig cfg = build_config(noise_f);
            if (cfg.noise == "none") {
                lsq::cli::cmd_compare(cfg, std::cout);
            } else {
                lsq::cli::cmd_noise(cfg, std::cout);
            }
            return 0;
        }
        if (check->parsed()) return lsq::cli::cmd_check(static_cast<std::uint64_t>(check_seed), std::cout);
        if (fetch->parsed()) return lsq::cli::cmd_fetch(fetch_dir, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
