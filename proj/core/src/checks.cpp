#include "lsq/checks.hpp"

#include "lsq/analysis.hpp"
#include "lsq/problem.hpp"
#include "lsq/protocol.hpp"
#include "lsq/random.hpp"
#include "lsq/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsq {

namespace {

struct Instance {
    LeastSquaresProblem problem;
    std::vector<AgentShard> shards;
    SpectralSummary spectrum;
    Matrix G;
};

Instance random_instance(SplitMix64& rng, Index d, Index rank, double kappa, int m) {
    SyntheticSpec spec;
    spec.cols = d;
    spec.rows = d + 2 + static_cast<Index>(rng.next() % 5);
    spec.kappa = kappa;
    spec.rank = rank;
    spec.seed = rng.next();
    Instance inst;
    inst.problem = make_synthetic(spec);
    inst.shards = partition(inst.problem, m);
    inst.G = gram(inst.problem.A);
    inst.spectrum = spectral_summary(inst.G);
    return inst;
}

Vector random_vector(SplitMix64& rng, Index d, double lo = -1.0, double hi = 1.0) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v(i) = rng.next_uniform(lo, hi);
    return v;
}

Matrix random_matrix(SplitMix64& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
    Matrix M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = rng.next_uniform(lo, hi);
    return M;
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

CheckResult check_column_contraction(std::uint64_t seed, const CheckHooks& hooks) {
    CheckResult res{"preconditioner-column-contraction", true, ""};
    SplitMix64 rng(seed ^ 0xa1u);
    const double betas[] = {0.0, 0.5, 2.0};
    for (int trial = 0; trial < 50 && res.pass; ++trial) {
        const double beta = betas[trial % 3];
        const Index d = 2 + static_cast<Index>(rng.next() % 7);
        const Index rank = beta == 0.0 ? d : std::max<Index>(1, d - static_cast<Index>(rng.next() % 3));
        const int m = 1 + static_cast<int>(rng.next() % 3);
        Instance inst = random_instance(rng, d, rank, rng.next_uniform(1.5, 50.0), m);

        const Matrix K_ref = k_beta(inst.G, beta);
        const double alpha = rng.next_uniform(0.05, 0.95) * 2.0 / (inst.spectrum.lambda1 + beta);
        const double rho = std::max(std::abs(1.0 - alpha * (inst.spectrum.lambda1 + beta)),
                                    std::abs(1.0 - alpha * (inst.spectrum.lambda_d + beta)));

        // Columns are tracked only while their distance is well above the
        // reference inverse's own rounding residual; below that the 1e-12
        // margin is swamped by arithmetic noise.
        Vector floor_j(d);
        for (Index j = 0; j < d; ++j) floor_j(j) = 1e-2 * (1.0 + K_ref.col(j).norm());

        IpgSolver solver({alpha * hooks.alpha_scale, 1.0, beta}, random_vector(rng, d),
                         random_matrix(rng, d, d));
        RoundEngine engine(inst.shards);
        for (int t = 0; t < 25 && res.pass; ++t) {
            Vector prev(d), next(d);
            for (Index j = 0; j < d; ++j) prev(j) = (solver.K().col(j) - K_ref.col(j)).norm();
            run_round(solver, engine);
            for (Index j = 0; j < d; ++j) next(j) = (solver.K().col(j) - K_ref.col(j)).norm();
            for (Index j = 0; j < d; ++j) {
                if (prev(j) < floor_j(j)) continue;
                if (next(j) > (rho + 1e-12) * prev(j)) {
                    res.pass = false;
                    res.detail = "trial " + std::to_string(trial) + " t=" + std::to_string(t) +
                                 " col " + std::to_string(j) + ": ratio " +
                                 fmt(next(j) / prev(j)) + " > rho " + fmt(rho);
                    break;
                }
            }
        }
    }
    return res;
}

CheckResult check_iteration_bound(std::uint64_t seed) {
    CheckResult res{"per-iteration-gradient-bound", true, ""};
    SplitMix64 rng(seed ^ 0xb2u);
    const double betas[] = {0.1, 1.0, 5.0};
    for (int trial = 0; trial < 100 && res.pass; ++trial) {
        const double beta = betas[trial % 3];
        const Index d = 2 + static_cast<Index>(rng.next() % 7);
        const bool deficient = trial % 2 == 1 && d > 2;
        const Index rank = deficient ? std::max<Index>(1, d - 1 - static_cast<Index>(rng.next() % 2)) : d;
        const int m = 1 + static_cast<int>(rng.next() % 3);
        Instance inst = random_instance(rng, d, rank, rng.next_uniform(1.5, 30.0), m);

        const double alpha = rng.next_uniform(0.1, 0.95) * 2.0 / (inst.spectrum.lambda1 + beta);
        const double delta = rng.next_uniform(0.1, 0.95) * 2.0 *
                             (inst.spectrum.lambda1 + beta) / inst.spectrum.lambda1;
        const RateReport rates = theoretical_rates(inst.spectrum, beta, alpha, delta);

        const Matrix K0 = trial % 2 == 0 ? Matrix::Zero(d, d) : random_matrix(rng, d, d, -0.5, 0.5);
        const double k0_dist = frobenius_distance(K0, k_beta(inst.G, beta));

        IpgSolver solver({alpha, delta, beta}, random_vector(rng, d), K0);
        RoundEngine engine(inst.shards);
        StopRule stop;
        stop.max_iters = 40;
        RunRecord run = run_until(solver, engine, stop);

        BoundCheck chk = gradient_bound_check(run, rates, k0_dist);
        if (!chk.pass) {
            res.pass = false;
            res.detail = "trial " + std::to_string(trial) + ": bound violated at t=" +
                         std::to_string(chk.first_fail);
        }
    }
    return res;
}

CheckResult check_superlinear_ratio(std::uint64_t seed) {
    CheckResult res{"superlinear-gradient-ratio", true, ""};
    SplitMix64 rng(seed ^ 0xc3u);
    for (int trial = 0; trial < 10 && res.pass; ++trial) {
        // Near-isotropic spectra keep the whole superlinear window inside
        // double precision: the gradient must stay far above its rounding
        // floor until the measured ratio has dropped below 1e-3.
        const Index d = 2 + static_cast<Index>(rng.next() % 5);
        Instance inst = random_instance(rng, d, d, rng.next_uniform(1.05, 1.4), 2);
        const double l1 = inst.spectrum.lambda1, ld = inst.spectrum.lambda_d;
        const double alpha = 2.0 / (l1 + ld);
        const double rho = (l1 - ld) / (l1 + ld);
        const double k0_dist = frobenius_distance(Matrix::Zero(d, d), k_beta(inst.G, 0.0));

        IpgSolver solver({alpha, 1.0, 0.0}, random_vector(rng, d), Matrix::Zero(d, d));
        RoundEngine engine(inst.shards);
        std::vector<double> g{reduce_gradient(engine, solver.x()).norm()};
        const double g_floor = 1e-11 * g.front();
        double min_ratio = 1e300;
        for (int t = 0; t < 200; ++t) {
            run_round(solver, engine);
            g.push_back(reduce_gradient(engine, solver.x()).norm());
            if (g[g.size() - 2] < g_floor) break;
            const double ratio = g.back() / g[g.size() - 2];
            const double bound = l1 * k0_dist * std::pow(rho, t + 1);
            if (ratio > bound * (1.0 + 1e-9) + 1e-12) {
                res.pass = false;
                res.detail = "trial " + std::to_string(trial) + " t=" + std::to_string(t) +
                             ": ratio " + fmt(ratio) + " > bound " + fmt(bound);
                break;
            }
            min_ratio = std::min(min_ratio, ratio);
            if (min_ratio < 1e-3) break;
        }
        if (res.pass && min_ratio >= 1e-3) {
            res.pass = false;
            res.detail = "trial " + std::to_string(trial) + ": ratio never fell below 1e-3";
        }
    }
    return res;
}

CheckResult check_gradient_identity(std::uint64_t seed) {
    CheckResult res{"sharded-vs-central-gradient", true, ""};
    SplitMix64 rng(seed ^ 0xd4u);
    Instance inst = random_instance(rng, 5, 5, rng.next_uniform(2.0, 30.0), 3);
    const Matrix& A = inst.problem.A;
    const Vector& B = inst.problem.B;

    const double g0_scale = (A.transpose() * B).norm();
    auto verify = [&](auto& solver, RoundEngine& engine, const char* name) {
        for (int t = 0; t < 15 && res.pass; ++t) {
            const Vector reduced = reduce_gradient(engine, solver.x());
            const Vector central = A.transpose() * (A * solver.x() - B);
            // Relative to the gradient while it is meaningfully large, to the
            // problem scale once it has vanished into rounding noise.
            const double rel = (reduced - central).norm() /
                               std::max(central.norm(), 1e-4 * g0_scale);
            if (rel > 1e-10) {
                res.pass = false;
                res.detail = std::string(name) + " t=" + std::to_string(t) + ": rel " + fmt(rel);
                return;
            }
            run_round(solver, engine);
        }
    };

    const auto& s = inst.spectrum;
    {
        GdSolver gd(tune_gd(s), Vector::Zero(5));
        RoundEngine e(inst.shards);
        verify(gd, e, "gd");
    }
    {
        NagSolver nag(tune_nag(s), Vector::Zero(5));
        RoundEngine e(inst.shards);
        verify(nag, e, "nag");
    }
    {
        HbmSolver hbm(tune_hbm(s), Vector::Zero(5));
        RoundEngine e(inst.shards);
        verify(hbm, e, "hbm");
    }
    {
        IpgSolver ipg = IpgSolver::zero_init(tune_ipg(s), 5);
        RoundEngine e(inst.shards);
        verify(ipg, e, "ipg");
    }
    {
        ApcSolver apc({1.0, 1.0}, inst.shards);
        RoundEngine e(inst.shards);
        verify(apc, e, "apc");
    }
    {
        BfgsSolver bfgs = BfgsSolver::identity_init({}, 5);
        RoundEngine e(inst.shards);
        verify(bfgs, e, "bfgs");
    }
    return res;
}

CheckResult check_quadratic_equivalence(std::uint64_t seed) {
    CheckResult res{"quadratic-mapping-equivalence", true, ""};
    SplitMix64 rng(seed ^ 0xe5u);
    for (int trial = 0; trial < 5 && res.pass; ++trial) {
        const Index d = 3 + static_cast<Index>(rng.next() % 4);
        Instance inst = random_instance(rng, d, d, rng.next_uniform(2.0, 20.0), 3);

        std::vector<QuadraticShard> quads;
        for (const auto& s : inst.shards) quads.push_back(lsq_to_quadratic(s));

        const IpgParams params = tune_ipg(inst.spectrum);
        IpgSolver a = IpgSolver::zero_init(params, d);
        IpgSolver b = IpgSolver::zero_init(params, d);
        RoundEngine ea(inst.shards);
        RoundEngine eb(std::move(quads));
        for (int t = 0; t < 40 && res.pass; ++t) {
            run_round(a, ea);
            run_round(b, eb);
            const double dx = (a.x() - b.x()).norm();
            const double dK = (a.K() - b.K()).norm();
            if (dx > 1e-10 * (1.0 + a.x().norm()) || dK > 1e-10 * (1.0 + a.K().norm())) {
                res.pass = false;
                res.detail = "trial " + std::to_string(trial) + " t=" + std::to_string(t) +
                             ": |dx| " + fmt(dx) + ", |dK| " + fmt(dK);
            }
        }
    }
    return res;
}

CheckResult check_isotropic_one_step(std::uint64_t seed) {
    CheckResult res{"isotropic-one-step", true, ""};
    SplitMix64 rng(seed ^ 0xf6u);

    auto run_case = [&](Index d, Index rank, bool include_ipg) {
        SyntheticSpec spec;
        spec.rows = d + 3;
        spec.cols = d;
        spec.kappa = 1.0;  // every nonzero eigenvalue equal
        spec.rank = rank;
        spec.seed = rng.next();
        LeastSquaresProblem p = make_synthetic(spec);
        const double scale = rng.next_uniform(0.5, 2.0);
        p.A *= scale;
        p.B *= scale;
        auto shards = partition(p, 2);
        const SpectralSummary s = spectral_summary(gram(p.A));

        auto one_step = [&](auto& solver, const char* name) {
            RoundEngine e(shards);
            const double g0 = reduce_gradient(e, solver.x()).norm();
            run_round(solver, e);
            const double g1 = reduce_gradient(e, solver.x()).norm();
            if (g1 > 1e-10 * g0) {
                res.pass = false;
                res.detail = std::string(name) + ": ||g(1)||/||g(0)|| = " + fmt(g1 / g0);
            }
        };

        GdSolver gd(tune_gd(s), random_vector(rng, d));
        one_step(gd, rank == d ? "gd-full" : "gd-deficient");
        if (include_ipg && res.pass) {
            IpgSolver ipg = IpgSolver::zero_init(tune_ipg(s), d);
            one_step(ipg, "ipg");
        }
    };

    run_case(5, 5, true);
    if (res.pass) run_case(6, 4, false);  // rank-deficient isotropic, GD only
    return res;
}

CheckResult check_rank_deficient_decay(std::uint64_t seed) {
    CheckResult res{"rank-deficient-gradient-decay", true, ""};
    SplitMix64 rng(seed ^ 0x17u);
    for (int trial = 0; trial < 5 && res.pass; ++trial) {
        const Index d = 6;
        const Index rank = 2 + static_cast<Index>(rng.next() % 4);
        Instance inst = random_instance(rng, d, rank, rng.next_uniform(2.0, 20.0), 2);

        const double beta = 1.0;
        const auto& s = inst.spectrum;
        const double alpha = 2.0 / (s.lambda1 + s.lambda_d + 2.0 * beta);
        const RateReport rates = theoretical_rates(s, beta, alpha, 1.0);

        IpgSolver solver({alpha, rates.delta_crit, beta}, random_vector(rng, d),
                         Matrix::Zero(d, d));
        RoundEngine engine(inst.shards);
        StopRule stop;
        stop.max_iters = 2000;
        stop.grad_eps = 1e-9;
        RunRecord run = run_until(solver, engine, stop);

        const double final_grad =
            (inst.problem.A.transpose() * (inst.problem.A * solver.x() - inst.problem.B)).norm();
        if (run.grad_norm.back() > 1e-8 || final_grad > 1e-8) {
            res.pass = false;
            res.detail = "trial " + std::to_string(trial) + ": ||g|| " +
                         fmt(run.grad_norm.back()) + ", membership residual " + fmt(final_grad);
        }
    }
    return res;
}

CheckResult check_gd_tail_rate(std::uint64_t seed) {
    CheckResult res{"gd-tail-contraction", true, ""};
    SplitMix64 rng(seed ^ 0x28u);
    for (int trial = 0; trial < 5 && res.pass; ++trial) {
        Instance inst = random_instance(rng, 5, 5, rng.next_uniform(4.0, 25.0), 2);
        const auto& s = inst.spectrum;
        const double mu_gd = (s.lambda1 - s.lambda_r) / (s.lambda1 + s.lambda_r);

        GdSolver gd(tune_gd(s), random_vector(rng, 5));
        RoundEngine engine(inst.shards);
        double prev = reduce_gradient(engine, gd.x()).norm();
        // Track the ratio only while the gradient is far above its rounding
        // floor; beyond that the quotient measures arithmetic noise.
        const double g_floor = 1e-10 * prev;
        double ratio = 0.0;
        for (int t = 0; t < 400; ++t) {
            run_round(gd, engine);
            const double cur = reduce_gradient(engine, gd.x()).norm();
            if (cur < g_floor) break;
            ratio = cur / prev;
            prev = cur;
        }
        if (std::abs(ratio - mu_gd) > 1e-3) {
            res.pass = false;
            res.detail = "trial " + std::to_string(trial) + ": tail ratio " + fmt(ratio) +
                         " vs mu_gd " + fmt(mu_gd);
        }
    }
    return res;
}

CheckResult check_rate_dominance(std::uint64_t seed) {
    CheckResult res{"rate-dominance", true, ""};
    SplitMix64 rng(seed ^ 0x39u);
    for (int trial = 0; trial < 20 && res.pass; ++trial) {
        const Index d = 2 + static_cast<Index>(rng.next() % 7);
        const bool deficient = trial % 3 == 2 && d > 2;
        const Index rank = deficient ? d - 1 : d;
        Instance inst = random_instance(rng, d, rank, rng.next_uniform(1.5, 40.0), 1);
        const auto& s = inst.spectrum;
        const double beta = rng.next_uniform(0.05, 4.0);

        const RateReport at_crit = theoretical_rates(s, beta, 1.0, 0.0);
        const RateReport crit = theoretical_rates(s, beta, 1.0, at_crit.delta_crit);
        if (std::abs(crit.mu_of_delta - crit.mu_star) > 1e-12) {
            res.pass = false;
            res.detail = "mu(delta_crit) != mu*: " + fmt(crit.mu_of_delta) + " vs " +
                         fmt(crit.mu_star);
            break;
        }

        const double alpha_opt = 2.0 / (s.lambda1 + s.lambda_d + 2.0 * beta);
        const RateReport at_opt = theoretical_rates(s, beta, alpha_opt, 1.0);
        if (std::abs(at_opt.rho_of_alpha - at_opt.varrho) > 1e-12) {
            res.pass = false;
            res.detail = "rho(alpha*) != varrho: " + fmt(at_opt.rho_of_alpha) + " vs " +
                         fmt(at_opt.varrho);
            break;
        }

        for (int k = 1; k < 50; ++k) {
            const double delta = k / 50.0 * 2.0 * (s.lambda1 + beta) / s.lambda1;
            const double alpha = k / 50.0 * 2.0 / (s.lambda1 + beta);
            const RateReport r = theoretical_rates(s, beta, alpha, delta);
            if (r.mu_star > r.mu_of_delta + 1e-12 || r.varrho > r.rho_of_alpha + 1e-12) {
                res.pass = false;
                res.detail = "dominance violated at grid point " + std::to_string(k);
                break;
            }
        }
    }
    return res;
}

CheckResult check_noisy_asymptotic_bound(std::uint64_t seed) {
    CheckResult res{"noisy-asymptotic-bound", true, ""};
    SplitMix64 rng(seed ^ 0x4au);

    SyntheticSpec spec;
    spec.rows = 10;
    spec.cols = 4;
    spec.kappa = 2.0;
    spec.rank = 4;
    spec.seed = rng.next();
    LeastSquaresProblem p = make_synthetic(spec);
    auto shards = partition(p, 2);
    const Matrix G = gram(p.A);
    const SpectralSummary s = spectral_summary(G);

    const double alpha = 2.0 / (s.lambda1 + s.lambda_d);
    const double rho = (s.lambda1 - s.lambda_d) / (s.lambda1 + s.lambda_d);
    const double w_bd = (1.0 - rho) / (s.lambda1 * 2.0);  // sqrt(d) = 2
    const double w = 0.4 * w_bd;

    const Matrix K_ref = k_beta(G, 0.0);
    Vector dists(4);
    for (Index j = 0; j < 4; ++j) dists(j) = K_ref.col(j).norm();  // K(0) = 0

    const NoiseReport rep = noise_diagnostics(dists, s, alpha, w, 600);
    if (!rep.conditions_hold || !rep.asymptotic_bound) {
        res.pass = false;
        res.detail = "synthesized instance does not satisfy the noise conditions";
        return res;
    }

    const NoiseChannel chan = NoiseChannel::additive_uniform(0.0, w / 2.0, rng.next());
    IpgSolver solver({alpha, 1.0, 0.0}, Vector::Zero(4), Matrix::Zero(4, 4));
    RoundEngine engine(shards, chan);
    double tail_max = 0.0;
    for (int t = 0; t < 1200; ++t) {
        run_round(solver, engine);
        if (t >= 1000) tail_max = std::max(tail_max, (solver.x() - *p.x_star).norm());
    }
    if (tail_max > *rep.asymptotic_bound) {
        res.pass = false;
        res.detail = "measured tail " + fmt(tail_max) + " > bound " + fmt(*rep.asymptotic_bound);
    }
    return res;
}

CheckResult check_reduction_determinism(std::uint64_t seed) {
    CheckResult res{"ordered-reduction-determinism", true, ""};
    SplitMix64 rng(seed ^ 0x5bu);
    Instance inst = random_instance(rng, 6, 6, 12.0, 3);

    // Slot fold versus plain running accumulation, bit for bit.
    RoundEngine engine(inst.shards);
    const Vector x = random_vector(rng, 6);
    const Vector folded = reduce_gradient(engine, x);
    Vector running = Vector::Zero(6);
    for (const auto& s : inst.shards) running += local_gradient(s, x);
    if (folded != running) {
        res.pass = false;
        res.detail = "slot fold differs from sequential accumulation";
        return res;
    }

    // Two identically seeded noisy runs must agree bit for bit.
    auto trace = [&] {
        IpgSolver solver = IpgSolver::zero_init(tune_ipg(inst.spectrum), 6);
        RoundEngine e(inst.shards, NoiseChannel::additive_uniform(0.0, 1e-8, 7));
        StopRule stop;
        stop.max_iters = 30;
        RunOptions opt;
        opt.x_star = inst.problem.x_star;
        return run_until(solver, e, stop, opt);
    };
    const RunRecord a = trace(), b = trace();
    if (a.grad_norm != b.grad_norm || a.rel_error != b.rel_error) {
        res.pass = false;
        res.detail = "identically seeded runs disagree";
    }
    return res;
}

}  // namespace

std::vector<CheckResult> run_property_checks(std::uint64_t seed, const CheckHooks& hooks) {
    std::vector<CheckResult> out;
    out.push_back(check_column_contraction(seed, hooks));
    out.push_back(check_iteration_bound(seed));
    out.push_back(check_superlinear_ratio(seed));
    out.push_back(check_gradient_identity(seed));
    out.push_back(check_quadratic_equivalence(seed));
    out.push_back(check_isotropic_one_step(seed));
    out.push_back(check_rank_deficient_decay(seed));
    out.push_back(check_gd_tail_rate(seed));
    out.push_back(check_rate_dominance(seed));
    out.push_back(check_noisy_asymptotic_bound(seed));
    out.push_back(check_reduction_determinism(seed));
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.pass; });
}

}  // namespace lsq
