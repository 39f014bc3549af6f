#pragma once

#include "lsq/linalg.hpp"
#include "lsq/protocol.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lsq {

// ---------------------------------------------------------------------------
// Agent-side computations (one message each, per round)
// ---------------------------------------------------------------------------

/// g^i = (A^i)^T (A^i x - B^i).
Vector local_gradient(const AgentShard& s, const Vector& x);
/// g^i = P^i x - q^i.
Vector local_gradient(const QuadraticShard& s, const Vector& x);

/// F^i(x) = 0.5 ||A^i x - B^i||^2.
double local_cost(const AgentShard& s, const Vector& x);
/// F^i(x) = 0.5 x^T P^i x - x^T q^i + r^i.
double local_cost(const QuadraticShard& s, const Vector& x);

/// Gradient g^i plus the d pre-conditioner replies
/// R^i_j = ((A^i)^T A^i + (beta/m) I) k_j - e_j / m, stacked as the columns
/// of a d x d matrix. Each column costs two matrix-vector products with A^i;
/// (A^i)^T A^i is never formed.
std::pair<Vector, Matrix> ipg_agent_compute(const AgentShard& s, const Vector& x,
                                            const Matrix& K, double beta, int m);

/// Quadratic-cost variant: g^i = P^i x - q^i, R^i_j = (P^i + (beta/m) I) k_j - e_j / m.
std::pair<Vector, Matrix> quadratic_agent_compute(const QuadraticShard& s, const Vector& x,
                                                  const Matrix& K, double beta, int m);

// ---------------------------------------------------------------------------
// Ordered reductions (replies computed per agent, folded ascending agent_id)
// ---------------------------------------------------------------------------

Vector reduce_gradient(const RoundEngine& engine, const Vector& x);
double reduce_cost(const RoundEngine& engine, const Vector& x);
std::pair<Vector, Matrix> reduce_ipg(const RoundEngine& engine, const Vector& x, const Matrix& K,
                                     double beta);

// ---------------------------------------------------------------------------
// Server-side updates (pure; noise is interleaved by the solver classes)
// ---------------------------------------------------------------------------

/// x(t+1) = x(t) - delta * sum_g.
Vector gd_step(const Vector& x, const Vector& sum_g, double delta);

/// K(t+1) = K(t) - alpha * sum_R, then x(t+1) = x(t) - delta * K(t+1) * sum_g.
/// The K update strictly precedes the x update.
std::pair<Vector, Matrix> ipg_server_update(const Vector& x, const Matrix& K,
                                            const Vector& sum_g, const Matrix& sum_R,
                                            double alpha, double delta);

/// Shared state shape for the two momentum methods; `aux` is the memory
/// vector y(t) for Nesterov and the momentum vector w(t) for heavy-ball.
struct MomentumState {
    Vector x;
    Vector aux;
    double delta = 0.0;
    double eta = 0.0;
};

/// y(t+1) = x(t) - delta * sum_g; x(t+1) = (1 + eta) y(t+1) - eta y(t).
MomentumState nag_step(const MomentumState& st, const Vector& sum_g);

/// w(t+1) = eta w(t) + sum_g; x(t+1) = x(t) - delta w(t+1).
MomentumState hbm_step(const MomentumState& st, const Vector& sum_g);

// ---------------------------------------------------------------------------
// Parameters and tuning
// ---------------------------------------------------------------------------

struct IpgParams {
    double alpha = 0.0;
    double delta = 1.0;
    double beta = 0.0;
};

/// alpha in (0, 2/(lambda1+beta)) and delta in (0, 2(lambda1+beta)/lambda1).
bool ipg_params_admissible(const IpgParams& p, const SpectralSummary& s);

/// alpha = 2/(lambda1+lambda_d), delta = 1, beta = 0. Requires full rank.
IpgParams tune_ipg(const SpectralSummary& s);
/// delta = 2/(lambda1+lambda_r).
double tune_gd(const SpectralSummary& s);

struct MomentumParams {
    double delta = 0.0;
    double eta = 0.0;
};

/// delta = 4/(3 lambda1 + lambda_d), eta = (sqrt(k)-1)/(sqrt(k)+1). Full rank only.
MomentumParams tune_nag(const SpectralSummary& s);
/// delta = 4/(sqrt(lambda1)+sqrt(lambda_d))^2, eta as for NAG, squared. Full rank only.
MomentumParams tune_hbm(const SpectralSummary& s);

struct ApcParams {
    double gamma = 1.0;  // local relaxation, <= 2
    double eta = 1.0;    // global mixing weight
};

struct ApcState {
    Vector x_global;
    std::vector<Vector> x_local;       // one per agent
    std::vector<Matrix> projections;   // P^i, cached
    ApcParams params;
};

/// x^i(0) = min-norm solution of A^i x = B^i, x(0) = mean of the locals.
/// Throws SolverInapplicable when any shard is row-rank deficient.
ApcState apc_init(const std::vector<AgentShard>& shards, ApcParams params);

/// x^i(t+1) = x^i(t) + gamma P^i (x(t) - x^i(t)), then
/// x(t+1) = (eta/m) sum_i x^i(t) + (1-eta) x(t) -- the global average uses
/// the locals as received this round, before their local update.
ApcState apc_step(const ApcState& st, const std::vector<AgentShard>& shards);

struct LineSearchParams {
    double armijo_c = 1e-4;
    double shrink = 0.5;
    double initial_step = 1.0;
    int max_halvings = 60;
};

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

enum class StopReason {
    MaxIters,
    GradEps,
    RelErrEps,
    Stalled,           // error norm stopped moving (noise studies)
    Diverged,          // NaN/Inf in an iterate
    MSingular,         // BFGS Hessian estimate lost invertibility
    LineSearchFailed,  // BFGS backtracking exhausted
};

const char* to_string(StopReason r);

struct StopRule {
    std::optional<Index> max_iters;
    std::optional<double> grad_eps;
    std::optional<double> rel_err_eps;
    bool any() const { return max_iters || grad_eps || rel_err_eps; }
};

struct RunOptions {
    std::optional<Vector> x_star;      // enables the error traces
    std::optional<Matrix> k_reference; // enables the K-distance trace (IPG)
};

/// Per-iteration traces, index 0..iterations inclusive.
struct RunRecord {
    std::vector<double> grad_norm;
    std::vector<double> rel_error;
    std::vector<double> err_norm;
    std::vector<double> k_frob_dist;
    StopReason stop_reason = StopReason::MaxIters;
    Index iterations = 0;
};

// ---------------------------------------------------------------------------
// Solvers as round state machines
// ---------------------------------------------------------------------------

class IpgSolver {
public:
    IpgSolver(IpgParams params, Vector x0, Matrix K0);
    static IpgSolver zero_init(IpgParams params, Index d);  // x(0)=0, K(0)=0

    double round(RoundEngine& engine);
    const Vector& x() const { return x_; }
    const Matrix& K() const { return K_; }
    const IpgParams& params() const { return params_; }
    bool finite() const { return all_finite(x_) && all_finite(K_); }
    std::optional<StopReason> fault() const { return std::nullopt; }

private:
    IpgParams params_;
    Vector x_;
    Matrix K_;
};

class GdSolver {
public:
    GdSolver(double delta, Vector x0) : delta_(delta), x_(std::move(x0)) {}

    double round(RoundEngine& engine);
    const Vector& x() const { return x_; }
    bool finite() const { return all_finite(x_); }
    std::optional<StopReason> fault() const { return std::nullopt; }

private:
    double delta_;
    Vector x_;
};

class NagSolver {
public:
    NagSolver(MomentumParams p, Vector x0);

    double round(RoundEngine& engine);
    const Vector& x() const { return st_.x; }
    const MomentumState& state() const { return st_; }
    bool finite() const { return all_finite(st_.x) && all_finite(st_.aux); }
    std::optional<StopReason> fault() const { return std::nullopt; }

private:
    MomentumState st_;
};

class HbmSolver {
public:
    HbmSolver(MomentumParams p, Vector x0);

    double round(RoundEngine& engine);
    const Vector& x() const { return st_.x; }
    const MomentumState& state() const { return st_; }
    bool finite() const { return all_finite(st_.x) && all_finite(st_.aux); }
    std::optional<StopReason> fault() const { return std::nullopt; }

private:
    MomentumState st_;
};

class ApcSolver {
public:
    ApcSolver(ApcParams params, const std::vector<AgentShard>& shards);

    double round(RoundEngine& engine);
    const Vector& x() const { return st_.x_global; }
    const ApcState& state() const { return st_; }
    bool finite() const;
    std::optional<StopReason> fault() const { return std::nullopt; }

private:
    ApcState st_;
};

class BfgsSolver {
public:
    BfgsSolver(LineSearchParams ls, Vector x0, Matrix M0);
    static BfgsSolver identity_init(LineSearchParams ls, Index d);  // x(0)=0, M(0)=I

    double round(RoundEngine& engine);
    const Vector& x() const { return x_; }
    const Matrix& M() const { return M_; }
    bool finite() const { return all_finite(x_) && all_finite(M_); }
    std::optional<StopReason> fault() const { return fault_; }

private:
    LineSearchParams ls_;
    Vector x_;
    Matrix M_;
    Vector g_;  // gradient at x(t), carried over from the previous round
    bool have_g_ = false;
    std::optional<StopReason> fault_;
};

/// Iterates rounds until a stop criterion fires, recording traces for every
/// t including t = 0. `iterations` is the t at which the rule fired; all
/// trace arrays have length iterations + 1.
template <class Solver>
RunRecord run_until(Solver& solver, RoundEngine& engine, const StopRule& stop,
                    const RunOptions& opt = {}) {
    if (!stop.any()) throw std::invalid_argument("run_until: no stop criterion set");

    RunRecord rec;
    const double xstar_norm = opt.x_star ? opt.x_star->norm() : 0.0;
    auto finish = [&](StopReason why, Index t) {
        rec.stop_reason = why;
        rec.iterations = t;
    };

    for (Index t = 0;; ++t) {
        if (opt.x_star) {
            const double err = (solver.x() - *opt.x_star).norm();
            rec.err_norm.push_back(err);
            rec.rel_error.push_back(xstar_norm > 0.0 ? err / xstar_norm : err);
        }
        if constexpr (requires { solver.K(); }) {
            if (opt.k_reference)
                rec.k_frob_dist.push_back(frobenius_distance(solver.K(), *opt.k_reference));
        }

        if (opt.x_star && stop.rel_err_eps && rec.rel_error.back() <= *stop.rel_err_eps) {
            rec.grad_norm.push_back(reduce_gradient(engine, solver.x()).norm());
            finish(StopReason::RelErrEps, t);
            return rec;
        }
        if (stop.max_iters && t >= *stop.max_iters) {
            rec.grad_norm.push_back(reduce_gradient(engine, solver.x()).norm());
            finish(StopReason::MaxIters, t);
            return rec;
        }

        const double gn = run_round(solver, engine);
        rec.grad_norm.push_back(gn);

        if (auto f = solver.fault()) {
            finish(*f, t);
            return rec;
        }
        if (!std::isfinite(gn) || !solver.finite()) {
            finish(StopReason::Diverged, t);
            return rec;
        }
        if (stop.grad_eps && gn <= *stop.grad_eps) {
            finish(StopReason::GradEps, t);
            return rec;
        }
    }
}

}  // namespace lsq
