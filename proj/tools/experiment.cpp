#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lsq::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kAllSolvers = {"ipg", "gd", "nag", "hbm", "apc", "bfgs"};

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, sep)) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::string problem_basename(const std::string& path) {
    std::string stem = fs::path(path).stem().string();
    return stem.empty() ? path : stem;
}

double wall_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::optional<double> param(const ExperimentConfig& cfg, const std::string& key) {
    auto it = cfg.params.find(key);
    if (it == cfg.params.end()) return std::nullopt;
    return it->second;
}

}  // namespace

SyntheticSpec parse_synthetic_spec(const std::string& text) {
    auto parts = split(text, ',');
    if (parts.size() != 5)
        throw std::invalid_argument("synthetic spec: expected N,d,kappa,rank,seed");
    SyntheticSpec spec;
    spec.rows = std::stoll(parts[0]);
    spec.cols = std::stoll(parts[1]);
    spec.kappa = std::stod(parts[2]);
    spec.rank = std::stoll(parts[3]);
    spec.seed = std::stoull(parts[4]);
    return spec;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);

    ExperimentConfig cfg;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);

        try {
            if (key == "dataset")
                cfg.dataset = value;
            else if (key == "synthetic")
                cfg.synthetic = parse_synthetic_spec(value);
            else if (key == "agents")
                cfg.agents = std::stoi(value);
            else if (key == "solvers")
                cfg.solvers = split(value, ',');
            else if (key == "tol")
                cfg.tol = std::stod(value);
            else if (key == "max_iters")
                cfg.max_iters = std::stoll(value);
            else if (key == "noise")
                cfg.noise = value;
            else if (key == "out")
                cfg.out_dir = value;
            else if (key == "seed")
                cfg.seed = std::stoull(value);
            else if (key.find('.') != std::string::npos)
                cfg.params[key] = std::stod(value);
            else
                throw ParseError(path + ":" + std::to_string(line_no) + ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad value for " + key);
        }
    }
    return cfg;
}

LoadedProblem prepare_problem(const ExperimentConfig& cfg) {
    if (cfg.agents < 1) throw std::invalid_argument("config: agents must be >= 1");
    if (!cfg.solvers.empty()) {
        for (const auto& s : cfg.solvers)
            if (std::find(kAllSolvers.begin(), kAllSolvers.end(), s) == kAllSolvers.end())
                throw std::invalid_argument("config: unknown solver " + s);
    }

    LoadedProblem lp;
    if (cfg.synthetic) {
        lp.problem = make_synthetic(*cfg.synthetic);
    } else if (!cfg.dataset.empty()) {
        lp.problem.A = load_matrix_market(cfg.dataset);
        auto [B, x_star] = synth_ones_observations(lp.problem.A);
        lp.problem.B = std::move(B);
        lp.problem.x_star = std::move(x_star);
        lp.problem.name = problem_basename(cfg.dataset);
    } else {
        throw std::invalid_argument("config: need --dataset or --synthetic");
    }
    lp.shards = partition(lp.problem, cfg.agents);
    lp.G = gram(lp.problem.A);
    lp.spectrum = spectral_summary(lp.G);
    return lp;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trace_csv(const std::string& path, const RunRecord& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iter,grad_norm,rel_error\n";
    for (std::size_t t = 0; t < rec.grad_norm.size(); ++t) {
        out << t << ',' << format_double(rec.grad_norm[t]) << ',';
        if (t < rec.rel_error.size()) out << format_double(rec.rel_error[t]);
        out << '\n';
    }
}

void write_summary_csv(const std::string& path, const ResultTable& table, bool noise_mode) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (noise_mode) {
        out << "solver,status,asymptotic_error\n";
        for (const auto& r : table.rows) {
            out << r.solver << ',' << r.status << ',';
            if (r.asymptotic) out << format_double(*r.asymptotic);
            out << '\n';
        }
    } else {
        out << "solver,status,iterations,final_rel_error\n";
        for (const auto& r : table.rows) {
            out << r.solver << ',' << r.status << ',';
            if (r.iterations) out << *r.iterations;
            out << ',';
            if (r.final_rel_error) out << format_double(*r.final_rel_error);
            out << '\n';
        }
    }
}

namespace {

struct ResolvedSolvers {
    IpgParams ipg;
    double gd_delta = 0.0;
    MomentumParams nag, hbm;
    std::optional<ApcParams> apc;  // unset when parameters are missing
    LineSearchParams bfgs;
};

// Explicit dotted keys win; anything left unspecified falls back to the
// closed-form tuning (APC has none, so it stays unset without parameters).
ResolvedSolvers resolve_params(const ExperimentConfig& cfg, const SpectralSummary& s,
                               bool need_ipg, bool need_gd, bool need_nag, bool need_hbm,
                               bool need_apc) {
    ResolvedSolvers r;
    if (need_ipg) {
        if (auto a = param(cfg, "ipg.alpha")) {
            r.ipg.alpha = *a;
            r.ipg.delta = param(cfg, "ipg.delta").value_or(1.0);
            r.ipg.beta = param(cfg, "ipg.beta").value_or(0.0);
        } else {
            r.ipg = tune_ipg(s);
        }
    }
    if (need_gd) r.gd_delta = param(cfg, "gd.delta") ? *param(cfg, "gd.delta") : tune_gd(s);
    if (need_nag) {
        if (auto d = param(cfg, "nag.delta"))
            r.nag = {*d, param(cfg, "nag.eta").value_or(0.0)};
        else
            r.nag = tune_nag(s);
    }
    if (need_hbm) {
        if (auto d = param(cfg, "hbm.delta"))
            r.hbm = {*d, param(cfg, "hbm.eta").value_or(0.0)};
        else
            r.hbm = tune_hbm(s);
    }
    if (need_apc) {
        auto g = param(cfg, "apc.gamma");
        auto e = param(cfg, "apc.eta");
        if (g && e) r.apc = ApcParams{*g, *e};
    }
    r.bfgs.armijo_c = param(cfg, "bfgs.armijo_c").value_or(r.bfgs.armijo_c);
    r.bfgs.shrink = param(cfg, "bfgs.shrink").value_or(r.bfgs.shrink);
    r.bfgs.initial_step = param(cfg, "bfgs.initial_step").value_or(r.bfgs.initial_step);
    return r;
}

bool wants(const std::vector<std::string>& list, const std::string& name) {
    return std::find(list.begin(), list.end(), name) != list.end();
}

}  // namespace

NoiseChannel noise_channel_for(const ExperimentConfig& cfg, const std::string& solver,
                               const std::string& problem_name) {
    if (!cfg.noise.empty()) return NoiseChannel::parse(cfg.noise);
    // Per-solver defaults: entry rounding for the gradient-family solvers,
    // additive uniform noise where rounding produces a different noise level
    // (apc, bfgs). Seeds are offset per solver for independent streams.
    const std::uint64_t seed = cfg.seed * 1000003ULL +
                               static_cast<std::uint64_t>(
                                   std::hash<std::string>{}(solver) % 997);
    if (solver == "apc") return NoiseChannel::additive_uniform(0.0, 1e-6, seed);
    if (solver == "bfgs") {
        const double hi = problem_name == "ash608" ? 5e-6 : 2e-6;
        return NoiseChannel::additive_uniform(0.0, hi, seed);
    }
    return NoiseChannel::round_decimals(4);
}

namespace {

struct SolverOutcome {
    RunRecord record;
    bool not_applicable = false;
    std::string note;
};

// Runs one solver to the compare-mode stop rule.
SolverOutcome run_compare_solver(const std::string& name, const ExperimentConfig& cfg,
                                 const LoadedProblem& lp, const ResolvedSolvers& rs) {
    SolverOutcome out;
    const Index d = lp.problem.A.cols();
    StopRule stop;
    stop.max_iters = cfg.max_iters;
    stop.rel_err_eps = cfg.tol;
    RunOptions opt;
    opt.x_star = lp.problem.x_star;

    RoundEngine engine(lp.shards);
    if (name == "ipg") {
        IpgSolver s = IpgSolver::zero_init(rs.ipg, d);
        out.record = run_until(s, engine, stop, opt);
    } else if (name == "gd") {
        GdSolver s(rs.gd_delta, Vector::Zero(d));
        out.record = run_until(s, engine, stop, opt);
    } else if (name == "nag") {
        NagSolver s(rs.nag, Vector::Zero(d));
        out.record = run_until(s, engine, stop, opt);
    } else if (name == "hbm") {
        HbmSolver s(rs.hbm, Vector::Zero(d));
        out.record = run_until(s, engine, stop, opt);
    } else if (name == "apc") {
        if (!rs.apc) {
            out.not_applicable = true;
            out.note = "apc.gamma and apc.eta not supplied (no closed-form tuning)";
            return out;
        }
        try {
            ApcSolver s(*rs.apc, lp.shards);
            out.record = run_until(s, engine, stop, opt);
        } catch (const SolverInapplicable& e) {
            out.not_applicable = true;
            out.note = e.what();
        }
    } else if (name == "bfgs") {
        BfgsSolver s = BfgsSolver::identity_init(rs.bfgs, d);
        out.record = run_until(s, engine, stop, opt);
    } else {
        throw std::invalid_argument("unknown solver: " + name);
    }
    return out;
}

// Noise mode: drive rounds manually so the run can stop as soon as the
// error norm stalls.
template <class Solver>
RunRecord run_noisy(Solver& solver, RoundEngine& engine, const Vector& x_star, Index cap) {
    const double xstar_norm = x_star.norm();
    RunRecord rec;
    auto push_err = [&] {
        const double err = (solver.x() - x_star).norm();
        rec.err_norm.push_back(err);
        rec.rel_error.push_back(xstar_norm > 0 ? err / xstar_norm : err);
    };
    push_err();

    Index done = 0;
    bool stalled = false;
    for (Index t = 0; t < cap; ++t) {
        const double gn = run_round(solver, engine);
        rec.grad_norm.push_back(gn);
        push_err();
        if (auto f = solver.fault()) {
            rec.stop_reason = *f;
            rec.iterations = t;
            rec.err_norm.pop_back();  // keep arrays at iterations + 1
            rec.rel_error.pop_back();
            return rec;
        }
        if (!std::isfinite(gn) || !solver.finite() || !std::isfinite(rec.err_norm.back()) ||
            rec.err_norm.back() > 1e9) {
            rec.stop_reason = StopReason::Diverged;
            rec.iterations = t;
            rec.err_norm.pop_back();
            rec.rel_error.pop_back();
            return rec;
        }
        done = t + 1;
        // Stall probe on the trailing window only; the full-trace scan runs
        // once after the loop.
        if (t >= 100 && t % 25 == 0) {
            const auto& e = rec.err_norm;
            double lo = e.back(), hi = e.back();
            for (std::size_t k = e.size() - 100; k < e.size(); ++k) {
                lo = std::min(lo, e[k]);
                hi = std::max(hi, e[k]);
            }
            if (hi - lo <= 1e-3 * e.back()) {
                stalled = true;
                break;
            }
        }
    }
    rec.iterations = done;
    rec.stop_reason = stalled ? StopReason::Stalled : StopReason::MaxIters;
    // The err trace runs one ahead of grad_norm; balance with a final
    // gradient evaluation at the last stored estimate.
    rec.grad_norm.push_back(reduce_gradient(engine, solver.x()).norm());
    return rec;
}

SolverOutcome run_noise_solver(const std::string& name, const ExperimentConfig& cfg,
                               const LoadedProblem& lp, const ResolvedSolvers& rs) {
    SolverOutcome out;
    const Index d = lp.problem.A.cols();
    const NoiseChannel chan = noise_channel_for(cfg, name, lp.problem.name);
    const Vector& x_star = *lp.problem.x_star;

    RoundEngine engine(lp.shards, chan);
    if (name == "ipg") {
        IpgSolver s = IpgSolver::zero_init(rs.ipg, d);
        out.record = run_noisy(s, engine, x_star, cfg.max_iters);
    } else if (name == "gd") {
        GdSolver s(rs.gd_delta, Vector::Zero(d));
        out.record = run_noisy(s, engine, x_star, cfg.max_iters);
    } else if (name == "nag") {
        NagSolver s(rs.nag, Vector::Zero(d));
        out.record = run_noisy(s, engine, x_star, cfg.max_iters);
    } else if (name == "hbm") {
        HbmSolver s(rs.hbm, Vector::Zero(d));
        out.record = run_noisy(s, engine, x_star, cfg.max_iters);
    } else if (name == "apc") {
        if (!rs.apc) {
            out.not_applicable = true;
            out.note = "apc.gamma and apc.eta not supplied";
            return out;
        }
        try {
            ApcSolver s(*rs.apc, lp.shards);
            out.record = run_noisy(s, engine, x_star, cfg.max_iters);
        } catch (const SolverInapplicable& e) {
            out.not_applicable = true;
            out.note = e.what();
        }
    } else if (name == "bfgs") {
        BfgsSolver s = BfgsSolver::identity_init(rs.bfgs, d);
        out.record = run_noisy(s, engine, x_star, cfg.max_iters);
    } else {
        throw std::invalid_argument("unknown solver: " + name);
    }
    return out;
}

std::vector<std::string> solver_list(const ExperimentConfig& cfg) {
    return cfg.solvers.empty() ? kAllSolvers : cfg.solvers;
}

}  // namespace

ResultTable cmd_compare(const ExperimentConfig& cfg, std::ostream& log) {
    LoadedProblem lp = prepare_problem(cfg);
    const auto names = solver_list(cfg);
    ResolvedSolvers rs =
        resolve_params(cfg, lp.spectrum, wants(names, "ipg"), wants(names, "gd"),
                       wants(names, "nag"), wants(names, "hbm"), wants(names, "apc"));
    fs::create_directories(cfg.out_dir);

    ResultTable table;
    for (const auto& name : names) {
        const auto t0 = std::chrono::steady_clock::now();
        SolverOutcome oc = run_compare_solver(name, cfg, lp, rs);
        SolverRow row;
        row.solver = name;
        row.wall_seconds = wall_since(t0);
        if (oc.not_applicable) {
            row.status = "n/a";
            row.note = oc.note;
        } else {
            write_trace_csv((fs::path(cfg.out_dir) / ("trace_" + name + ".csv")).string(),
                            oc.record);
            row.iterations = iterations_to_tolerance(oc.record, cfg.tol);
            row.final_rel_error = oc.record.rel_error.back();
            if (oc.record.stop_reason == StopReason::Diverged ||
                oc.record.stop_reason == StopReason::MSingular)
                row.status = "unbounded";
            else
                row.status = row.iterations ? "ok" : "cap";
            if (!row.iterations) row.note = std::string("stop: ") + to_string(oc.record.stop_reason);
        }
        table.rows.push_back(std::move(row));
        const auto& r = table.rows.back();
        log << r.solver << ": " << r.status;
        if (r.iterations) log << ", iterations " << *r.iterations;
        if (r.final_rel_error) log << ", rel_error " << format_double(*r.final_rel_error);
        log << ", wall " << r.wall_seconds << " s";
        if (!r.note.empty()) log << " (" << r.note << ")";
        log << "\n";
    }
    write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), table, false);
    return table;
}

ResultTable cmd_noise(const ExperimentConfig& cfg, std::ostream& log) {
    LoadedProblem lp = prepare_problem(cfg);
    const auto names = solver_list(cfg);
    ResolvedSolvers rs =
        resolve_params(cfg, lp.spectrum, wants(names, "ipg"), wants(names, "gd"),
                       wants(names, "nag"), wants(names, "hbm"), wants(names, "apc"));
    fs::create_directories(cfg.out_dir);

    ResultTable table;
    for (const auto& name : names) {
        const auto t0 = std::chrono::steady_clock::now();
        SolverOutcome oc = run_noise_solver(name, cfg, lp, rs);
        SolverRow row;
        row.solver = name;
        row.wall_seconds = wall_since(t0);
        if (oc.not_applicable) {
            row.status = "n/a";
            row.note = oc.note;
        } else {
            write_trace_csv((fs::path(cfg.out_dir) / ("trace_" + name + ".csv")).string(),
                            oc.record);
            if (oc.record.stop_reason == StopReason::Diverged ||
                oc.record.stop_reason == StopReason::MSingular ||
                oc.record.stop_reason == StopReason::LineSearchFailed) {
                row.status = "unbounded";
                row.note = std::string("stop: ") + to_string(oc.record.stop_reason);
            } else {
                AsymptoticError ae = asymptotic_error(oc.record);
                row.asymptotic = ae.value;
                row.status = ae.stalled ? "stalled" : "unconverged";
            }
        }
        table.rows.push_back(std::move(row));
        const auto& r = table.rows.back();
        log << r.solver << ": " << r.status;
        if (r.asymptotic) log << ", asymptotic error " << format_double(*r.asymptotic);
        log << ", wall " << r.wall_seconds << " s";
        if (!r.note.empty()) log << " (" << r.note << ")";
        log << "\n";
    }
    write_summary_csv((fs::path(cfg.out_dir) / "summary.csv").string(), table, true);
    return table;
}

void cmd_spectra(const ExperimentConfig& cfg, std::ostream& out) {
    LoadedProblem lp = prepare_problem(cfg);
    const auto& s = lp.spectrum;
    out << "problem: " << lp.problem.name << " (" << lp.problem.A.rows() << " x "
        << lp.problem.A.cols() << ", " << cfg.agents << " agents)\n";
    out << "lambda1: " << format_double(s.lambda1) << "\n";
    out << "lambda_r: " << format_double(s.lambda_r) << " (rank " << s.rank_r << ")\n";
    out << "lambda_d: " << format_double(s.lambda_d) << "\n";
    out << "kappa: " << format_double(s.kappa) << (s.kappa_row_space ? " (row space)" : "")
        << "\n";
    out << "tuned parameters:\n";
    out << "  gd:   delta = " << format_double(tune_gd(s)) << "\n";
    if (s.full_rank()) {
        const IpgParams ipg = tune_ipg(s);
        const MomentumParams nag = tune_nag(s), hbm = tune_hbm(s);
        out << "  ipg:  alpha = " << format_double(ipg.alpha) << ", delta = 1, beta = 0\n";
        out << "  nag:  delta = " << format_double(nag.delta)
            << ", eta = " << format_double(nag.eta) << "\n";
        out << "  hbm:  delta = " << format_double(hbm.delta)
            << ", eta = " << format_double(hbm.eta) << "\n";
    } else {
        out << "  ipg/nag/hbm: closed-form tuning requires a full-rank Gram matrix\n";
    }
    out << "  apc:  no closed form; pass apc.gamma and apc.eta\n";
    out << "  bfgs: armijo c = 1e-4, shrink = 0.5, initial step = 1\n";
}

int cmd_check(std::uint64_t seed, std::ostream& out) {
    const auto results = run_property_checks(seed);
    for (const auto& r : results) {
        out << (r.pass ? "PASS" : "FAIL") << "  " << r.name;
        if (!r.detail.empty()) out << "  (" << r.detail << ")";
        out << "\n";
    }
    return all_passed(results) ? 0 : 1;
}

int cmd_fetch(const std::string& data_dir, std::ostream& out) {
    struct Entry {
        const char* name;
        Index rows, cols;
        bool complex_entries;
    };
    const Entry entries[] = {
        {"ash608", 608, 188, false},
        {"bcsstm07", 420, 420, false},
        {"gr_30_30", 900, 900, false},
        {"qc324", 324, 324, true},
    };

    fs::create_directories(data_dir);
    int failures = 0;
    for (const auto& e : entries) {
        const fs::path target = fs::path(data_dir) / (std::string(e.name) + ".mtx");
        if (!fs::exists(target)) {
            const std::string url =
                std::string("https://sparse.tamu.edu/MM/HB/") + e.name + ".tar.gz";
            const std::string cmd = "curl -fsSL '" + url + "' | tar -xz -C '" + data_dir +
                                    "' --strip-components=1 '" + e.name + "/" + e.name + ".mtx'";
            out << "fetching " << e.name << "...\n";
            if (std::system(cmd.c_str()) != 0) {
                out << "  download failed: " << url << "\n";
                ++failures;
                continue;
            }
        }
        try {
            const MatrixMarketInfo info = matrix_market_info(target.string());
            const bool shape_ok = info.rows == e.rows && info.cols == e.cols;
            const bool field_ok =
                e.complex_entries == (info.field == MatrixMarketInfo::Field::Complex);
            if (!shape_ok) {
                out << "  " << e.name << ": unexpected shape " << info.rows << " x " << info.cols
                    << "\n";
                ++failures;
            } else {
                out << "  " << e.name << ": ok (" << info.rows << " x " << info.cols
                    << (field_ok ? "" : ", unexpected field") << ")\n";
            }
        } catch (const std::exception& ex) {
            out << "  " << e.name << ": " << ex.what() << "\n";
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace lsq::cli
