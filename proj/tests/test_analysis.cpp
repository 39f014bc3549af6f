#include "lsq/analysis.hpp"
#include "lsq/problem.hpp"
#include "lsq/protocol.hpp"
#include "lsq/random.hpp"
#include "lsq/solvers.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace lsq;

namespace {

SpectralSummary spectrum41() {
    Matrix D = Matrix::Zero(2, 2);
    D(0, 0) = 4.0;
    D(1, 1) = 1.0;
    return spectral_summary(D);
}

}  // namespace

TEST_CASE("theoretical_rates: hand evaluations") {
    const SpectralSummary s = spectrum41();

    RateReport r = theoretical_rates(s, 1.0, 0.1, 1.0);
    CHECK(r.mu_star == doctest::Approx(3.0 / 13.0).epsilon(1e-12));
    CHECK(r.varrho == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
    CHECK(r.delta_crit == doctest::Approx(20.0 / 13.0).epsilon(1e-12));
    CHECK(r.mu_gd == doctest::Approx(0.6).epsilon(1e-12));

    RateReport z = theoretical_rates(s, 0.0, 0.1, 1.0);
    CHECK(z.mu_of_delta == doctest::Approx(0.0));
    CHECK(z.varrho == doctest::Approx(0.6));
    CHECK(z.mu_star == 0.0);  // division-safe form at beta = 0

    // All eigenvalues equal: every rate collapses to zero.
    Matrix iso = Matrix::Identity(3, 3) * 2.0;
    RateReport flat = theoretical_rates(spectral_summary(iso), 0.5, 0.1, 1.0);
    CHECK(flat.mu_star == 0.0);
    CHECK(flat.varrho == 0.0);
    CHECK(flat.mu_gd == 0.0);

    Matrix zero = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(theoretical_rates(SpectralSummary{}, 0.0, 0.1, 1.0), NumericalError);
}

TEST_CASE("gradient_bound_check: pass, exact-mu case, corrupted trace") {
    // diag(4,1) problem run by the pre-conditioned solver, K(0) = 0.
    AgentShard s;
    s.agent_id = 1;
    s.Ai = Matrix::Zero(2, 2);
    s.Ai(0, 0) = 2.0;
    s.Ai(1, 1) = 1.0;
    s.Bi = Vector(2);
    s.Bi << 2.0, 1.0;
    const Matrix G = gram(s.Ai);
    const SpectralSummary spec = spectral_summary(G);

    const IpgParams params = tune_ipg(spec);
    const RateReport rates = theoretical_rates(spec, params.beta, params.alpha, params.delta);

    IpgSolver solver = IpgSolver::zero_init(params, 2);
    RoundEngine engine({s});
    StopRule stop;
    stop.max_iters = 25;
    RunRecord run = run_until(solver, engine, stop);

    const double k0 = frobenius_distance(Matrix::Zero(2, 2), k_beta(G, 0.0));
    BoundCheck chk = gradient_bound_check(run, rates, k0);
    CHECK(chk.pass);
    CHECK(chk.bound.size() == run.grad_norm.size() - 1);

    // K(0) = K_beta: the bound reduces to mu(delta) exactly.
    IpgSolver warm(params, Vector::Zero(2), k_beta(G, 0.0));
    RoundEngine engine2({s});
    RunRecord warm_run = run_until(warm, engine2, stop);
    BoundCheck warm_chk = gradient_bound_check(warm_run, rates, 0.0);
    CHECK(warm_chk.pass);
    for (double b : warm_chk.bound) CHECK(b == doctest::Approx(rates.mu_of_delta));

    // Inflating one gradient by 10x must fail exactly there.
    RunRecord bad = run;
    bad.grad_norm[3] *= 10.0;
    BoundCheck bad_chk = gradient_bound_check(bad, rates, k0);
    CHECK(!bad_chk.pass);
    CHECK(bad_chk.first_fail == 3);

    bad.grad_norm.pop_back();
    CHECK_THROWS_AS(gradient_bound_check(bad, rates, k0), std::invalid_argument);
}

TEST_CASE("crossover_iteration: equal traces, superlinear start, conditioned instance") {
    RunRecord a, b;
    a.grad_norm = {1.0, 0.5, 0.25};
    a.iterations = 2;
    b = a;
    CHECK(!crossover_iteration(a, b).has_value());

    // Identical g(0) (same initialization) but strictly better afterwards.
    RunRecord fast;
    fast.grad_norm = {1.0, 0.1, 0.001};
    fast.iterations = 2;
    CHECK(crossover_iteration(fast, a) == 0);

    // Never below: no crossover.
    RunRecord slow;
    slow.grad_norm = {1.0, 0.9, 0.8};
    slow.iterations = 2;
    CHECK(!crossover_iteration(slow, a).has_value());

    // kappa = 100 synthetic problem, both solvers tuned: a finite crossover
    // exists and the pre-conditioned run stays ahead beyond it.
    SyntheticSpec spec;
    spec.rows = 20;
    spec.cols = 8;
    spec.kappa = 100.0;
    spec.seed = 77;
    LeastSquaresProblem p = make_synthetic(spec);
    auto shards = partition(p, 4);
    const SpectralSummary s = spectral_summary(gram(p.A));

    StopRule stop;
    stop.max_iters = 300;
    IpgSolver ipg = IpgSolver::zero_init(tune_ipg(s), 8);
    RoundEngine e1(shards);
    RunRecord run_ipg = run_until(ipg, e1, stop);
    GdSolver gd(tune_gd(s), Vector::Zero(8));
    RoundEngine e2(shards);
    RunRecord run_gd = run_until(gd, e2, stop);

    auto T = crossover_iteration(run_ipg, run_gd);
    REQUIRE(T.has_value());
    CHECK(*T < 300);
}

TEST_CASE("noise_diagnostics: hand-evaluated bound and degenerate cases") {
    const SpectralSummary s = spectrum41();
    Vector dists(2);
    dists << 1.0, 0.5;

    NoiseReport rep = noise_diagnostics(dists, s, 0.4, 0.01, 100);
    CHECK(rep.rho == doctest::Approx(0.6));
    CHECK(rep.w_bd == doctest::Approx(0.4 / (4.0 * std::sqrt(2.0))));  // ~0.070711
    CHECK(rep.w_bd == doctest::Approx(0.070711).epsilon(1e-4));
    CHECK(rep.conditions_hold);
    REQUIRE(rep.T_prime.has_value());
    CHECK(rep.R_t[static_cast<std::size_t>(*rep.T_prime) + 1] < 1.0);
    REQUIRE(rep.asymptotic_bound.has_value());
    CHECK(*rep.asymptotic_bound > 0.0);

    // Noiseless: S(t) decays exactly like rho^t and the bound vanishes.
    NoiseReport clean = noise_diagnostics(dists, s, 0.4, 0.0, 50);
    CHECK(clean.conditions_hold);
    CHECK(clean.S_t[0] == doctest::Approx(dists.norm()));
    CHECK(clean.S_t[10] == doctest::Approx(std::pow(0.6, 10) * dists.norm()));
    REQUIRE(clean.asymptotic_bound.has_value());
    CHECK(*clean.asymptotic_bound == 0.0);

    // Noise at or beyond the admissible level: no bound claimed.
    NoiseReport loud = noise_diagnostics(dists, s, 0.4, 0.08, 50);
    CHECK(!loud.conditions_hold);
    CHECK(!loud.asymptotic_bound.has_value());

    CHECK_THROWS_AS(noise_diagnostics(dists, s, 0.4, 0.01, 0), std::invalid_argument);
}

TEST_CASE("asymptotic_error: stall detection") {
    RunRecord run;
    run.iterations = 400;
    for (int t = 0; t <= 400; ++t) {
        const double decay = 4.0 * std::exp(-t / 20.0);
        run.err_norm.push_back(0.5 + decay);
        run.rel_error.push_back(run.err_norm.back() / 10.0);
        run.grad_norm.push_back(1.0);
    }
    AsymptoticError ae = asymptotic_error(run);
    CHECK(ae.stalled);
    CHECK(ae.value == doctest::Approx(0.5).epsilon(1e-3));

    // A trace that keeps shrinking geometrically never stalls at 1e-3.
    RunRecord moving;
    moving.iterations = 300;
    for (int t = 0; t <= 300; ++t) {
        moving.err_norm.push_back(std::pow(0.99, t));
        moving.grad_norm.push_back(1.0);
    }
    AsymptoticError mv = asymptotic_error(moving);
    CHECK(!mv.stalled);
    CHECK(mv.value == doctest::Approx(std::pow(0.99, 300)));

    // An exactly converged run stalls at zero.
    RunRecord zero;
    zero.iterations = 200;
    zero.err_norm.assign(201, 0.0);
    zero.grad_norm.assign(201, 0.0);
    AsymptoticError z = asymptotic_error(zero);
    CHECK(z.stalled);
    CHECK(z.value == 0.0);

    RunRecord no_ref;
    no_ref.grad_norm = {1.0};
    CHECK_THROWS_AS(asymptotic_error(no_ref), std::invalid_argument);
}

TEST_CASE("flop_estimate: published shard size and degenerate shapes") {
    FlopEstimate f = flop_estimate(60, 188);
    CHECK(f.agent_mults == 22560 + 4241280);
    CHECK(f.agent_mults == 4263840);
    CHECK(f.server_mults == 188 * 188);

    FlopEstimate one = flop_estimate(7, 1);
    CHECK(one.agent_mults == 2 * 7 + 2 * 7);
    CHECK(one.server_mults == 1);

    CHECK(flop_estimate(0, 10).agent_mults == 0);
}

TEST_CASE("iterations_to_tolerance: boundary cases") {
    RunRecord run;
    run.rel_error = {1.0, 0.5, 0.2, 0.05, 0.01};
    run.iterations = 4;
    CHECK(iterations_to_tolerance(run, std::numeric_limits<double>::infinity()) == 0);
    CHECK(iterations_to_tolerance(run, 0.2) == 2);
    CHECK(iterations_to_tolerance(run, 0.05) == 3);
    CHECK(!iterations_to_tolerance(run, 1e-6).has_value());
}
