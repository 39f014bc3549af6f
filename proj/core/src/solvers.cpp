#include "lsq/solvers.hpp"

#include <Eigen/LU>

#include <cmath>

namespace lsq {

Vector local_gradient(const AgentShard& s, const Vector& x) {
    return s.Ai.transpose() * (s.Ai * x - s.Bi);
}

Vector local_gradient(const QuadraticShard& s, const Vector& x) {
    return s.Pi * x - s.qi;
}

double local_cost(const AgentShard& s, const Vector& x) {
    return 0.5 * (s.Ai * x - s.Bi).squaredNorm();
}

double local_cost(const QuadraticShard& s, const Vector& x) {
    return 0.5 * x.dot(s.Pi * x) - x.dot(s.qi) + s.ri;
}

std::pair<Vector, Matrix> ipg_agent_compute(const AgentShard& s, const Vector& x,
                                            const Matrix& K, double beta, int m) {
    if (s.Ai.cols() != x.size() || K.rows() != x.size() || K.cols() != x.size())
        throw std::invalid_argument("ipg_agent_compute: dimension mismatch");
    Vector g = local_gradient(s, x);
    // Column j is A^i^T (A^i k_j) + (beta/m) k_j - e_j/m; the Gram matrix of
    // the shard is never materialized.
    Matrix R = s.Ai.transpose() * (s.Ai * K);
    if (beta != 0.0) R += (beta / m) * K;
    R.diagonal().array() -= 1.0 / m;
    return {std::move(g), std::move(R)};
}

std::pair<Vector, Matrix> quadratic_agent_compute(const QuadraticShard& s, const Vector& x,
                                                  const Matrix& K, double beta, int m) {
    if (s.Pi.cols() != x.size() || K.rows() != x.size() || K.cols() != x.size())
        throw std::invalid_argument("quadratic_agent_compute: dimension mismatch");
    Vector g = local_gradient(s, x);
    Matrix R = s.Pi * K;
    if (beta != 0.0) R += (beta / m) * K;
    R.diagonal().array() -= 1.0 / m;
    return {std::move(g), std::move(R)};
}

namespace {

// Replies land in per-agent slots first, then fold left in ascending
// agent_id order; the fold order, not the compute schedule, fixes the
// bit pattern of the sum.
template <class Reply, class Engine, class Fn>
Reply slots_then_fold(const Engine& engine, Reply zero, Fn&& per_shard) {
    std::vector<Reply> slots;
    slots.reserve(static_cast<std::size_t>(engine.agents()));
    engine.visit_shards([&](const auto& s) { slots.push_back(per_shard(s)); });
    Reply acc = std::move(zero);
    for (auto& r : slots) acc += r;
    return acc;
}

struct GradientAndReplies {
    Vector g;
    Matrix R;
    GradientAndReplies& operator+=(const GradientAndReplies& o) {
        g += o.g;
        R += o.R;
        return *this;
    }
};

}  // namespace

Vector reduce_gradient(const RoundEngine& engine, const Vector& x) {
    return slots_then_fold(engine, Vector(Vector::Zero(engine.dim())),
                           [&](const auto& s) { return local_gradient(s, x); });
}

double reduce_cost(const RoundEngine& engine, const Vector& x) {
    return slots_then_fold(engine, 0.0, [&](const auto& s) { return local_cost(s, x); });
}

std::pair<Vector, Matrix> reduce_ipg(const RoundEngine& engine, const Vector& x, const Matrix& K,
                                     double beta) {
    const int m = engine.agents();
    GradientAndReplies zero{Vector::Zero(engine.dim()), Matrix::Zero(engine.dim(), engine.dim())};
    auto total = slots_then_fold(engine, std::move(zero), [&](const auto& s) {
        auto [g, R] = [&] {
            if constexpr (requires { s.Ai; })
                return ipg_agent_compute(s, x, K, beta, m);
            else
                return quadratic_agent_compute(s, x, K, beta, m);
        }();
        return GradientAndReplies{std::move(g), std::move(R)};
    });
    return {std::move(total.g), std::move(total.R)};
}

Vector gd_step(const Vector& x, const Vector& sum_g, double delta) {
    return x - delta * sum_g;
}

std::pair<Vector, Matrix> ipg_server_update(const Vector& x, const Matrix& K,
                                            const Vector& sum_g, const Matrix& sum_R,
                                            double alpha, double delta) {
    Matrix K_next = K - alpha * sum_R;
    Vector x_next = x - delta * (K_next * sum_g);
    return {std::move(x_next), std::move(K_next)};
}

MomentumState nag_step(const MomentumState& st, const Vector& sum_g) {
    MomentumState next = st;
    next.aux = st.x - st.delta * sum_g;                     // y(t+1)
    next.x = (1.0 + st.eta) * next.aux - st.eta * st.aux;   // st.aux is y(t)
    return next;
}

MomentumState hbm_step(const MomentumState& st, const Vector& sum_g) {
    MomentumState next = st;
    next.aux = st.eta * st.aux + sum_g;  // w(t+1)
    next.x = st.x - st.delta * next.aux;
    return next;
}

bool ipg_params_admissible(const IpgParams& p, const SpectralSummary& s) {
    if (p.beta < 0.0) return false;
    const double alpha_sup = 2.0 / (s.lambda1 + p.beta);
    const double delta_sup = 2.0 * (s.lambda1 + p.beta) / s.lambda1;
    return p.alpha > 0.0 && p.alpha < alpha_sup && p.delta > 0.0 && p.delta < delta_sup;
}

IpgParams tune_ipg(const SpectralSummary& s) {
    if (s.lambda_d <= 0.0)
        throw NumericalError("tune_ipg: beta = 0 tuning requires a full-rank Gram matrix");
    return {2.0 / (s.lambda1 + s.lambda_d), 1.0, 0.0};
}

double tune_gd(const SpectralSummary& s) { return 2.0 / (s.lambda1 + s.lambda_r); }

MomentumParams tune_nag(const SpectralSummary& s) {
    if (s.lambda_d <= 0.0)
        throw NumericalError("tune_nag: tuning requires a full-rank Gram matrix");
    const double rk = std::sqrt(s.lambda1 / s.lambda_d);
    return {4.0 / (3.0 * s.lambda1 + s.lambda_d), (rk - 1.0) / (rk + 1.0)};
}

MomentumParams tune_hbm(const SpectralSummary& s) {
    if (s.lambda_d <= 0.0)
        throw NumericalError("tune_hbm: tuning requires a full-rank Gram matrix");
    const double rk = std::sqrt(s.lambda1 / s.lambda_d);
    const double e = (rk - 1.0) / (rk + 1.0);
    const double rootsum = std::sqrt(s.lambda1) + std::sqrt(s.lambda_d);
    return {4.0 / (rootsum * rootsum), e * e};
}

ApcState apc_init(const std::vector<AgentShard>& shards, ApcParams params) {
    if (shards.empty()) throw std::invalid_argument("apc_init: no shards");
    if (params.gamma > 2.0) throw std::invalid_argument("apc_init: gamma must be <= 2");
    ApcState st;
    st.params = params;
    const Index d = shards.front().Ai.cols();
    Vector mean = Vector::Zero(d);
    for (const auto& s : shards) {
        st.x_local.push_back(min_norm_solution(s.Ai, s.Bi));
        st.projections.push_back(row_space_projection(s.Ai));
        mean += st.x_local.back();
    }
    st.x_global = mean / static_cast<double>(shards.size());
    return st;
}

ApcState apc_step(const ApcState& st, const std::vector<AgentShard>& shards) {
    const auto m = st.x_local.size();
    if (shards.size() != m || st.projections.size() != m)
        throw std::invalid_argument("apc_step: state and shards disagree");
    ApcState next = st;
    Vector sum_pre = Vector::Zero(st.x_global.size());
    for (std::size_t i = 0; i < m; ++i) {
        const Vector& pre = st.x_local[i];
        next.x_local[i] = pre + st.params.gamma * (st.projections[i] * (st.x_global - pre));
        sum_pre += pre;
    }
    next.x_global = (st.params.eta / static_cast<double>(m)) * sum_pre +
                    (1.0 - st.params.eta) * st.x_global;
    return next;
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxIters: return "max_iters";
        case StopReason::GradEps: return "grad_eps";
        case StopReason::RelErrEps: return "rel_err_eps";
        case StopReason::Stalled: return "stalled";
        case StopReason::Diverged: return "diverged";
        case StopReason::MSingular: return "m_singular";
        case StopReason::LineSearchFailed: return "line_search_failed";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

IpgSolver::IpgSolver(IpgParams params, Vector x0, Matrix K0)
    : params_(params), x_(std::move(x0)), K_(std::move(K0)) {
    if (K_.rows() != x_.size() || K_.cols() != x_.size())
        throw std::invalid_argument("IpgSolver: K0 must be d x d");
}

IpgSolver IpgSolver::zero_init(IpgParams params, Index d) {
    return IpgSolver(params, Vector::Zero(d), Matrix::Zero(d, d));
}

double IpgSolver::round(RoundEngine& engine) {
    auto [g, R] = reduce_ipg(engine, x_, K_, params_.beta);
    K_ -= params_.alpha * R;
    engine.noise().apply(K_);
    x_ -= params_.delta * (K_ * g);  // uses the freshly updated K(t+1)
    engine.noise().apply(x_);
    return g.norm();
}

double GdSolver::round(RoundEngine& engine) {
    Vector g = reduce_gradient(engine, x_);
    x_ -= delta_ * g;
    engine.noise().apply(x_);
    return g.norm();
}

NagSolver::NagSolver(MomentumParams p, Vector x0) {
    st_.x = x0;
    st_.aux = std::move(x0);  // y(0) = x(0)
    st_.delta = p.delta;
    st_.eta = p.eta;
}

double NagSolver::round(RoundEngine& engine) {
    Vector g = reduce_gradient(engine, st_.x);
    Vector y_next = st_.x - st_.delta * g;
    engine.noise().apply(y_next);
    Vector x_next = (1.0 + st_.eta) * y_next - st_.eta * st_.aux;
    engine.noise().apply(x_next);
    st_.aux = std::move(y_next);
    st_.x = std::move(x_next);
    return g.norm();
}

HbmSolver::HbmSolver(MomentumParams p, Vector x0) {
    st_.x = std::move(x0);
    st_.aux = Vector::Zero(st_.x.size());  // w(0) = 0
    st_.delta = p.delta;
    st_.eta = p.eta;
}

double HbmSolver::round(RoundEngine& engine) {
    Vector g = reduce_gradient(engine, st_.x);
    Vector w_next = st_.eta * st_.aux + g;
    engine.noise().apply(w_next);
    Vector x_next = st_.x - st_.delta * w_next;
    engine.noise().apply(x_next);
    st_.aux = std::move(w_next);
    st_.x = std::move(x_next);
    return g.norm();
}

ApcSolver::ApcSolver(ApcParams params, const std::vector<AgentShard>& shards)
    : st_(apc_init(shards, params)) {}

bool ApcSolver::finite() const {
    if (!all_finite(st_.x_global)) return false;
    for (const auto& v : st_.x_local)
        if (!all_finite(v)) return false;
    return true;
}

double ApcSolver::round(RoundEngine& engine) {
    // The method exchanges estimates, not gradients; the aggregate gradient
    // at the global estimate is evaluated only for the run traces.
    const double grad_norm = reduce_gradient(engine, st_.x_global).norm();

    const auto m = st_.x_local.size();
    Vector sum_pre = Vector::Zero(st_.x_global.size());
    for (std::size_t i = 0; i < m; ++i) {
        Vector pre = st_.x_local[i];
        st_.x_local[i] = pre + st_.params.gamma * (st_.projections[i] * (st_.x_global - pre));
        engine.noise().apply(st_.x_local[i]);
        sum_pre += pre;
    }
    st_.x_global = (st_.params.eta / static_cast<double>(m)) * sum_pre +
                   (1.0 - st_.params.eta) * st_.x_global;
    engine.noise().apply(st_.x_global);
    return grad_norm;
}

BfgsSolver::BfgsSolver(LineSearchParams ls, Vector x0, Matrix M0)
    : ls_(ls), x_(std::move(x0)), M_(std::move(M0)) {
    if (M_.rows() != x_.size() || M_.cols() != x_.size())
        throw std::invalid_argument("BfgsSolver: M0 must be d x d");
}

BfgsSolver BfgsSolver::identity_init(LineSearchParams ls, Index d) {
    return BfgsSolver(ls, Vector::Zero(d), Matrix::Identity(d, d));
}

double BfgsSolver::round(RoundEngine& engine) {
    if (!have_g_) {
        g_ = reduce_gradient(engine, x_);
        have_g_ = true;
    }
    const Vector g0 = g_;
    const double g0_norm = g0.norm();

    if (!all_finite(M_)) {
        fault_ = StopReason::MSingular;
        return g0_norm;
    }
    Eigen::PartialPivLU<Matrix> lu(M_);
    if (!(lu.rcond() > 1e-14)) {
        fault_ = StopReason::MSingular;
        return g0_norm;
    }
    Vector s = lu.solve(-g0);
    if (!all_finite(s)) {
        fault_ = StopReason::MSingular;
        return g0_norm;
    }

    // Backtracking Armijo on the aggregate cost; every probe is one extra
    // broadcast round.
    const double F0 = reduce_cost(engine, x_);
    const double gts = g0.dot(s);
    double step = ls_.initial_step;
    bool accepted = false;
    for (int h = 0; h <= ls_.max_halvings; ++h) {
        const double Fc = reduce_cost(engine, x_ + step * s);
        if (Fc <= F0 + ls_.armijo_c * step * gts) {
            accepted = true;
            break;
        }
        step *= ls_.shrink;
    }
    if (!accepted) {
        fault_ = StopReason::LineSearchFailed;
        return g0_norm;
    }

    x_ += step * s;
    engine.noise().apply(x_);

    // Second gradient round, at the stored (possibly perturbed) estimate.
    Vector g1 = reduce_gradient(engine, x_);
    Vector y = g1 - g0;

    const double den1 = step * y.dot(s);
    if (std::abs(den1) > 1e-14 * y.norm() * s.norm()) {
        Vector Ms = M_ * s;
        const double den2 = s.dot(Ms);
        M_ += (y * y.transpose()) / den1 - (Ms * Ms.transpose()) / den2;
    }
    engine.noise().apply(M_);

    g_ = std::move(g1);
    return g0_norm;
}

}  // namespace lsq
