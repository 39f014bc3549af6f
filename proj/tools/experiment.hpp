#pragma once

#include "lsq/analysis.hpp"
#include "lsq/checks.hpp"
#include "lsq/problem.hpp"
#include "lsq/protocol.hpp"
#include "lsq/solvers.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lsq::cli {

struct ExperimentConfig {
    std::string dataset;                     // Matrix Market file
    std::optional<SyntheticSpec> synthetic;  // alternative to dataset
    int agents = 10;
    std::vector<std::string> solvers;        // subset of ipg,gd,nag,hbm,apc,bfgs
    double tol = 1e-4;
    Index max_iters = 100000;
    std::string noise;                       // empty = per-solver defaults in noise mode
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::map<std::string, double> params;    // dotted keys, e.g. "ipg.alpha", "apc.gamma"
};

/// Flat key = value file; '#' starts a comment. Dotted keys land in params.
ExperimentConfig load_config_file(const std::string& path);

/// "N,d,kappa,rank,seed"
SyntheticSpec parse_synthetic_spec(const std::string& text);

struct SolverRow {
    std::string solver;
    std::string status;  // ok | cap | n/a | stalled | unconverged | unbounded
    std::optional<Index> iterations;
    std::optional<double> final_rel_error;
    std::optional<double> asymptotic;
    double wall_seconds = 0.0;
    std::string note;
};

struct ResultTable {
    std::vector<SolverRow> rows;
};

struct LoadedProblem {
    LeastSquaresProblem problem;
    std::vector<AgentShard> shards;
    Matrix G;
    SpectralSummary spectrum;
};

/// Loads or synthesizes the instance, partitions it, and computes the Gram
/// spectrum. Validates the configuration before any run starts.
LoadedProblem prepare_problem(const ExperimentConfig& cfg);

/// Runs every configured solver with identical initialization and writes
/// trace_<solver>.csv plus summary.csv under cfg.out_dir.
ResultTable cmd_compare(const ExperimentConfig& cfg, std::ostream& log);

/// Noisy variant: runs each solver under its noise channel until the error
/// norm stalls, the iterate diverges, or the iteration cap is hit.
ResultTable cmd_noise(const ExperimentConfig& cfg, std::ostream& log);

/// Prints the Gram spectrum and the tuned parameter set per solver.
void cmd_spectra(const ExperimentConfig& cfg, std::ostream& out);

/// Runs the randomized property suites; returns a nonzero exit code on
/// failure.
int cmd_check(std::uint64_t seed, std::ostream& out);

/// Downloads the benchmark matrices into data_dir and verifies their
/// shapes. Needs curl and tar on PATH.
int cmd_fetch(const std::string& data_dir, std::ostream& out);

// --- helpers shared with the test suites ---

/// 17-significant-digit decimal rendering used by every CSV writer.
std::string format_double(double v);

void write_trace_csv(const std::string& path, const RunRecord& rec);
void write_summary_csv(const std::string& path, const ResultTable& table, bool noise_mode);

/// Per-solver noise channel: an explicit spec overrides the defaults of
/// four-decimal rounding for gd/nag/hbm/ipg and low-amplitude uniform noise
/// for apc/bfgs (the bfgs range depends on the dataset).
NoiseChannel noise_channel_for(const ExperimentConfig& cfg, const std::string& solver,
                               const std::string& problem_name);

}  // namespace lsq::cli
