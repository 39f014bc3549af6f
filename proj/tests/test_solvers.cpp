#include "lsq/analysis.hpp"
#include "lsq/linalg.hpp"
#include "lsq/problem.hpp"
#include "lsq/protocol.hpp"
#include "lsq/random.hpp"
#include "lsq/solvers.hpp"

#include <doctest.h>

#include <cmath>

using namespace lsq;

namespace {

AgentShard diag_shard() {
    AgentShard s;
    s.agent_id = 1;
    s.Ai = Matrix::Zero(2, 2);
    s.Ai(0, 0) = 2.0;
    s.Ai(1, 1) = 1.0;
    s.Bi = Vector(2);
    s.Bi << 2.0, 1.0;
    return s;
}

LeastSquaresProblem synthetic(Index rows, Index cols, double kappa, Index rank,
                              std::uint64_t seed) {
    SyntheticSpec spec;
    spec.rows = rows;
    spec.cols = cols;
    spec.kappa = kappa;
    spec.rank = rank;
    spec.seed = seed;
    return make_synthetic(spec);
}

}  // namespace

TEST_CASE("ipg_agent_compute: gradient and reply columns") {
    AgentShard s = diag_shard();
    Vector x = Vector::Zero(2);

    auto [g, R] = ipg_agent_compute(s, x, Matrix::Zero(2, 2), 0.0, 1);
    CHECK(g(0) == -4.0);
    CHECK(g(1) == -1.0);
    // Zero pre-conditioner: R^i_j = -e_j.
    CHECK(R(0, 0) == -1.0);
    CHECK(R(1, 1) == -1.0);
    CHECK(R(1, 0) == 0.0);

    // K = K_beta is the fixed point of the reply map.
    Matrix G = gram(s.Ai);
    for (double beta : {0.0, 0.5}) {
        Matrix K = k_beta(G, beta);
        auto [g2, R2] = ipg_agent_compute(s, x, K, beta, 1);
        CHECK(R2.cwiseAbs().maxCoeff() <= 1e-12);
    }

    CHECK_THROWS_AS(ipg_agent_compute(s, Vector::Zero(3), Matrix::Zero(3, 3), 0.0, 1),
                    std::invalid_argument);
}

TEST_CASE("ipg_server_update: K precedes x") {
    // Sum of replies = -e_j with alpha = 0.1 lifts K from zero to 0.1 I.
    Vector x = Vector::Zero(2);
    Matrix K = Matrix::Zero(2, 2);
    Matrix sum_R = -Matrix::Identity(2, 2);
    Vector sum_g(2);
    sum_g << -4.0, -1.0;
    auto [x1, K1] = ipg_server_update(x, K, sum_g, sum_R, 0.1, 1.0);
    CHECK(K1(0, 0) == doctest::Approx(0.1));
    CHECK(K1(1, 1) == doctest::Approx(0.1));
    // x used the fresh K: x1 = -K1 * sum_g.
    CHECK(x1(0) == doctest::Approx(0.4));
    CHECK(x1(1) == doctest::Approx(0.1));

    // Newton step: K already at K_0, replies vanished, delta = 1.
    AgentShard s = diag_shard();
    Matrix G = gram(s.Ai);
    Matrix K0 = k_beta(G, 0.0);
    Vector g = s.Ai.transpose() * (s.Ai * x - s.Bi);
    auto [x_star, K_same] = ipg_server_update(x, K0, g, Matrix::Zero(2, 2), 0.2, 1.0);
    CHECK(x_star(0) == doctest::Approx(1.0));
    CHECK(x_star(1) == doctest::Approx(1.0));

    // delta = 0 leaves the estimate alone.
    auto [x_frozen, K_moved] = ipg_server_update(x, K, sum_g, sum_R, 0.1, 0.0);
    CHECK(x_frozen == x);
    CHECK(K_moved(0, 0) == doctest::Approx(0.1));
}

TEST_CASE("gd_step: hand values") {
    Vector x = Vector::Zero(2), g(2);
    g << -4.0, -1.0;
    Vector x1 = gd_step(x, g, 0.1);
    CHECK(x1(0) == doctest::Approx(0.4));
    CHECK(x1(1) == doctest::Approx(0.1));

    CHECK(gd_step(x1, Vector::Zero(2), 0.1) == x1);
}

TEST_CASE("gd: isotropic identity problem converges in one step") {
    // A = I, B = b, delta = 1.
    AgentShard s;
    s.agent_id = 1;
    s.Ai = Matrix::Identity(3, 3);
    s.Bi = Vector(3);
    s.Bi << 0.7, -1.1, 0.4;
    GdSolver gd(1.0, Vector::Zero(3));
    RoundEngine engine({s});
    run_round(gd, engine);
    CHECK((gd.x() - s.Bi).norm() <= 1e-15);
}

TEST_CASE("nag_step: hand values, momentum off, fixed point") {
    MomentumState st;
    st.x = Vector::Zero(2);
    st.aux = Vector::Zero(2);
    st.delta = 0.1;
    st.eta = 0.5;
    Vector g(2);
    g << -4.0, -1.0;

    MomentumState next = nag_step(st, g);
    CHECK(next.aux(0) == doctest::Approx(0.4));
    CHECK(next.aux(1) == doctest::Approx(0.1));
    CHECK(next.x(0) == doctest::Approx(0.6));
    CHECK(next.x(1) == doctest::Approx(0.15));

    st.eta = 0.0;
    CHECK(nag_step(st, g).x == gd_step(st.x, g, st.delta));

    // sum_g = 0 with y(t) = x(t) is stationary.
    MomentumState fixed;
    fixed.x = Vector::Ones(2);
    fixed.aux = Vector::Ones(2);
    fixed.delta = 0.1;
    fixed.eta = 0.5;
    MomentumState same = nag_step(fixed, Vector::Zero(2));
    CHECK(same.x == fixed.x);
    CHECK(same.aux == fixed.aux);
}

TEST_CASE("hbm_step: hand values, momentum off, fixed point") {
    MomentumState st;
    st.x = Vector::Zero(2);
    st.aux = Vector::Zero(2);
    st.delta = 0.1;
    st.eta = 0.5;
    Vector g(2);
    g << -4.0, -1.0;

    MomentumState next = hbm_step(st, g);
    CHECK(next.aux(0) == doctest::Approx(-4.0));
    CHECK(next.x(0) == doctest::Approx(0.4));
    CHECK(next.x(1) == doctest::Approx(0.1));

    st.eta = 0.0;
    CHECK(hbm_step(st, g).x == gd_step(st.x, g, st.delta));

    MomentumState same = hbm_step(st, Vector::Zero(2));
    CHECK(same.x == st.x);
}

TEST_CASE("apc_init: hand example, square shard, rank failure") {
    std::vector<AgentShard> shards(2);
    shards[0].agent_id = 1;
    shards[0].Ai = Matrix(1, 2);
    shards[0].Ai << 1.0, 0.0;
    shards[0].Bi = Vector(1);
    shards[0].Bi << 1.0;
    shards[1].agent_id = 2;
    shards[1].Ai = Matrix(1, 2);
    shards[1].Ai << 0.0, 1.0;
    shards[1].Bi = Vector(1);
    shards[1].Bi << 1.0;

    ApcState st = apc_init(shards, {1.0, 1.0});
    CHECK(st.x_local[0](0) == doctest::Approx(1.0));
    CHECK(st.x_local[0](1) == doctest::Approx(0.0));
    CHECK(st.x_local[1](0) == doctest::Approx(0.0));
    CHECK(st.x_local[1](1) == doctest::Approx(1.0));
    CHECK(st.x_global(0) == doctest::Approx(0.5));
    CHECK(st.x_global(1) == doctest::Approx(0.5));

    // One local step with gamma = 1: x^1(1) = [1, 0.5].
    ApcState next = apc_step(st, shards);
    CHECK(next.x_local[0](0) == doctest::Approx(1.0));
    CHECK(next.x_local[0](1) == doctest::Approx(0.5));
    // Global mix used the pre-update locals whose mean is x(0).
    CHECK(next.x_global(0) == doctest::Approx(0.5));
    CHECK(next.x_global(1) == doctest::Approx(0.5));

    // Square invertible shard: the local estimate is already the solution.
    std::vector<AgentShard> one(1);
    one[0].agent_id = 1;
    one[0].Ai = Matrix::Identity(2, 2) * 2.0;
    one[0].Bi = Vector(2);
    one[0].Bi << 2.0, 4.0;
    ApcState solo = apc_init(one, {1.0, 1.0});
    CHECK(solo.x_global(0) == doctest::Approx(1.0));
    CHECK(solo.x_global(1) == doctest::Approx(2.0));

    // Duplicate rows lose row rank.
    std::vector<AgentShard> bad(1);
    bad[0].agent_id = 1;
    bad[0].Ai = Matrix(2, 3);
    bad[0].Ai << 1.0, 2.0, 3.0, 1.0, 2.0, 3.0;
    bad[0].Bi = Vector::Zero(2);
    CHECK_THROWS_AS(apc_init(bad, {1.0, 1.0}), SolverInapplicable);

    // The local relaxation weight is capped at 2.
    CHECK_THROWS_AS(apc_init(shards, {2.5, 1.0}), std::invalid_argument);
}

TEST_CASE("apc_step: gamma = 0 with eta = 0 is the identity") {
    LeastSquaresProblem p = synthetic(8, 4, 6.0, 4, 21);
    auto shards = partition(p, 2);
    ApcState st = apc_init(shards, {0.0, 0.0});
    ApcState next = apc_step(st, shards);
    CHECK(next.x_global == st.x_global);
    for (std::size_t i = 0; i < st.x_local.size(); ++i) CHECK(next.x_local[i] == st.x_local[i]);
}

TEST_CASE("apc: converges on a consistent system") {
    LeastSquaresProblem p = synthetic(8, 4, 5.0, 4, 33);
    auto shards = partition(p, 4);  // 2 x 4 shards, full row rank
    ApcSolver solver({1.0, 1.0}, shards);
    RoundEngine engine(shards);
    StopRule stop;
    stop.max_iters = 200;
    stop.rel_err_eps = 1e-6;
    RunOptions opt;
    opt.x_star = p.x_star;
    RunRecord rec = run_until(solver, engine, stop, opt);
    CHECK(rec.stop_reason == StopReason::RelErrEps);
    CHECK(rec.rel_error.back() <= 1e-6);
}

TEST_CASE("bfgs: identity solve, curvature guard") {
    // M = I: the direction is just the negated gradient.
    AgentShard s = diag_shard();
    BfgsSolver solver = BfgsSolver::identity_init({}, 2);
    RoundEngine engine({s});
    run_round(solver, engine);
    CHECK(solver.fault() == std::nullopt);

    // Zero-curvature guard: a flat cost keeps the gradient constant, so
    // y = 0 and the estimate matrix must survive unchanged.
    AgentShard flat;
    flat.agent_id = 1;
    flat.Ai = Matrix::Zero(2, 2);
    flat.Bi = Vector::Zero(2);
    BfgsSolver guard(LineSearchParams{}, Vector::Ones(2), Matrix::Identity(2, 2));
    RoundEngine flat_engine({flat});
    run_round(guard, flat_engine);
    CHECK(guard.fault() == std::nullopt);
    CHECK(guard.M() == Matrix::Identity(2, 2));
}

TEST_CASE("bfgs: superlinear convergence on a random 10 x 5 problem") {
    // With Armijo backtracking the quadratic needs 16-19 outer iterations
    // for eight decades (exact line search would terminate near d), far
    // ahead of plain gradient descent on the same instance.
    LeastSquaresProblem p = synthetic(10, 5, 12.0, 5, 44);
    auto shards = partition(p, 2);
    const SpectralSummary s = spectral_summary(gram(p.A));
    StopRule stop;
    stop.max_iters = 200;
    stop.rel_err_eps = 1e-8;
    RunOptions opt;
    opt.x_star = p.x_star;

    BfgsSolver solver = BfgsSolver::identity_init({}, 5);
    RoundEngine engine(shards);
    RunRecord rec = run_until(solver, engine, stop, opt);
    CHECK(rec.stop_reason == StopReason::RelErrEps);
    CHECK(rec.iterations <= 20);

    GdSolver gd(tune_gd(s), Vector::Zero(5));
    RoundEngine engine2(shards);
    RunRecord gd_rec = run_until(gd, engine2, stop, opt);
    CHECK(rec.iterations < gd_rec.iterations);
}

TEST_CASE("quadratic_agent_compute: mapping equivalence and trivial cases") {
    AgentShard s = diag_shard();
    QuadraticShard q = lsq_to_quadratic(s);
    SplitMix64 rng(50);
    for (int k = 0; k < 5; ++k) {
        Vector x(2);
        x << rng.next_uniform(-2.0, 2.0), rng.next_uniform(-2.0, 2.0);
        Matrix K(2, 2);
        K << rng.next_double(), rng.next_double(), rng.next_double(), rng.next_double();
        auto [gl, Rl] = ipg_agent_compute(s, x, K, 0.5, 2);
        auto [gq, Rq] = quadratic_agent_compute(q, x, K, 0.5, 2);
        CHECK((gl - gq).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((Rl - Rq).cwiseAbs().maxCoeff() <= 1e-12);
    }

    QuadraticShard iso;
    iso.agent_id = 1;
    iso.Pi = Matrix::Identity(2, 2);
    iso.qi = Vector::Zero(2);
    iso.ri = 0.0;
    Vector v(2);
    v << 3.0, -1.0;
    auto [g, R] = quadratic_agent_compute(iso, v, Matrix::Zero(2, 2), 0.0, 1);
    CHECK(g == v);
    CHECK(R(0, 0) == -1.0);

    auto [g2, R2] = quadratic_agent_compute(iso, v, Matrix::Zero(2, 2), 0.0, 4);
    CHECK(R2(0, 0) == -0.25);  // -e_j / m
}

TEST_CASE("tune: closed forms") {
    SpectralSummary s = spectral_summary([] {
        Matrix D = Matrix::Zero(2, 2);
        D(0, 0) = 4.0;
        D(1, 1) = 1.0;
        return D;
    }());

    IpgParams ipg = tune_ipg(s);
    CHECK(ipg.alpha == doctest::Approx(0.4));
    CHECK(ipg.delta == 1.0);
    CHECK(ipg.beta == 0.0);

    CHECK(tune_gd(s) == doctest::Approx(0.4));

    MomentumParams nag = tune_nag(s);
    CHECK(nag.delta == doctest::Approx(4.0 / 13.0));
    CHECK(nag.eta == doctest::Approx(1.0 / 3.0));  // (sqrt(4)-1)/(sqrt(4)+1)

    MomentumParams hbm = tune_hbm(s);
    CHECK(hbm.delta == doctest::Approx(4.0 / 9.0));
    CHECK(hbm.eta == doctest::Approx(1.0 / 9.0));

    CHECK(ipg_params_admissible(ipg, s));
    CHECK(!ipg_params_admissible({1.0, 1.0, 0.0}, s));   // alpha beyond 2/(l1+beta)
    CHECK(!ipg_params_admissible({0.4, -1.0, 0.0}, s));  // negative step

    // Rank-deficient spectra admit no beta = 0 tuning.
    SpectralSummary r = spectral_summary([] {
        Matrix D = Matrix::Zero(2, 2);
        D(0, 0) = 4.0;
        return D;
    }());
    CHECK_THROWS_AS(tune_ipg(r), NumericalError);
    CHECK_THROWS_AS(tune_nag(r), NumericalError);
    CHECK_THROWS_AS(tune_hbm(r), NumericalError);
    CHECK(tune_gd(r) == doctest::Approx(0.25));  // lambda_r = 4 on the row space
}

TEST_CASE("run_until: trivial stop, gradient stop, divergence") {
    LeastSquaresProblem p = synthetic(12, 4, 6.0, 4, 55);
    auto shards = partition(p, 3);
    const SpectralSummary s = spectral_summary(gram(p.A));

    // max_iters = 0 returns only the initial trace row.
    {
        GdSolver gd(tune_gd(s), Vector::Zero(4));
        RoundEngine engine(shards);
        StopRule stop;
        stop.max_iters = 0;
        stop.grad_eps = std::numeric_limits<double>::infinity();
        RunOptions opt;
        opt.x_star = p.x_star;
        RunRecord rec = run_until(gd, engine, stop, opt);
        CHECK(rec.iterations == 0);
        CHECK(rec.grad_norm.size() == 1);
        CHECK(rec.rel_error.size() == 1);
        CHECK(rec.stop_reason == StopReason::MaxIters);
    }

    // Gradient threshold fires and the arrays stay aligned.
    {
        GdSolver gd(tune_gd(s), Vector::Zero(4));
        RoundEngine engine(shards);
        StopRule stop;
        stop.max_iters = 10000;
        stop.grad_eps = 1e-9;
        RunOptions opt;
        opt.x_star = p.x_star;
        RunRecord rec = run_until(gd, engine, stop, opt);
        CHECK(rec.stop_reason == StopReason::GradEps);
        CHECK(rec.grad_norm.back() <= 1e-9);
        CHECK(rec.grad_norm.size() == static_cast<std::size_t>(rec.iterations) + 1);
        CHECK(rec.rel_error.size() == rec.grad_norm.size());
    }

    // A wildly overscaled step diverges and is reported with its index.
    {
        GdSolver gd(1e8, Vector::Zero(4));
        RoundEngine engine(shards);
        StopRule stop;
        stop.max_iters = 10000;
        RunRecord rec = run_until(gd, engine, stop);
        CHECK(rec.stop_reason == StopReason::Diverged);
        CHECK(rec.iterations < 10000);
    }

    // No criteria set is a usage error.
    {
        GdSolver gd(tune_gd(s), Vector::Zero(4));
        RoundEngine engine(shards);
        CHECK_THROWS_AS(run_until(gd, engine, StopRule{}), std::invalid_argument);
    }
}

TEST_CASE("run_until: K-distance trace contracts for the pre-conditioned solver") {
    LeastSquaresProblem p = synthetic(12, 4, 6.0, 4, 66);
    auto shards = partition(p, 2);
    const Matrix G = gram(p.A);
    const SpectralSummary s = spectral_summary(G);

    IpgSolver solver = IpgSolver::zero_init(tune_ipg(s), 4);
    RoundEngine engine(shards);
    StopRule stop;
    stop.max_iters = 30;
    RunOptions opt;
    opt.x_star = p.x_star;
    opt.k_reference = k_beta(G, 0.0);
    RunRecord rec = run_until(solver, engine, stop, opt);
    REQUIRE(rec.k_frob_dist.size() == 31);
    CHECK(rec.k_frob_dist.front() > rec.k_frob_dist.back());
    // Contraction factor is (kappa-1)/(kappa+1) = 5/7 per round.
    CHECK(rec.k_frob_dist.back() <= 1e-4 * rec.k_frob_dist.front());
}
