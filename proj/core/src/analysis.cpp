#include "lsq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsq {

RateReport theoretical_rates(const SpectralSummary& s, double beta, double alpha, double delta) {
    if (s.lambda1 <= 0.0) throw NumericalError("theoretical_rates: lambda1 must be positive");
    const double l1 = s.lambda1, lr = s.lambda_r, ld = s.lambda_d;

    RateReport r;
    r.beta = beta;
    r.alpha = alpha;
    r.delta = delta;
    r.lambda1 = l1;
    r.lambda_r = lr;
    r.lambda_d = ld;

    r.mu_star = beta * (l1 - lr) / (2.0 * l1 * lr + beta * (l1 + lr));
    r.varrho = (l1 - ld) / (l1 + ld + 2.0 * beta);
    r.mu_gd = (l1 - lr) / (l1 + lr);
    r.delta_crit = 2.0 / (l1 / (l1 + beta) + lr / (lr + beta));
    r.mu_of_delta = std::max(std::abs(1.0 - delta * l1 / (l1 + beta)),
                             std::abs(1.0 - delta * lr / (lr + beta)));
    r.rho_of_alpha = std::max(std::abs(1.0 - alpha * (l1 + beta)),
                              std::abs(1.0 - alpha * (ld + beta)));
    return r;
}

BoundCheck gradient_bound_check(const RunRecord& run, const RateReport& rates, double k0_dist) {
    const std::size_t n = run.grad_norm.size();
    if (n != static_cast<std::size_t>(run.iterations) + 1)
        throw std::invalid_argument("gradient_bound_check: trace length does not match iterations");
    if (n < 2) throw std::invalid_argument("gradient_bound_check: run too short");

    BoundCheck out;
    const double slack = 1e-9 * run.grad_norm.front();
    double rho_pow = rates.rho_of_alpha;  // rho^{t+1} starting at t = 0
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double bound = rates.mu_of_delta + rates.delta * rates.lambda1 * k0_dist * rho_pow;
        out.bound.push_back(bound);
        if (out.pass && run.grad_norm[t + 1] > bound * run.grad_norm[t] + slack) {
            out.pass = false;
            out.first_fail = static_cast<Index>(t + 1);
        }
        rho_pow *= rates.rho_of_alpha;
    }
    return out;
}

std::optional<Index> crossover_iteration(const RunRecord& run_ipg, const RunRecord& run_gd) {
    const std::size_t n = std::min(run_ipg.grad_norm.size(), run_gd.grad_norm.size());
    if (n == 0) return std::nullopt;

    bool all_equal = true;
    std::optional<std::size_t> last_not_below;
    for (std::size_t t = 0; t < n; ++t) {
        const double a = run_ipg.grad_norm[t], b = run_gd.grad_norm[t];
        if (a != b) all_equal = false;
        if (!(a < b)) last_not_below = t;
    }
    if (all_equal) return std::nullopt;
    if (!last_not_below) return 0;                       // strictly below from the start
    if (*last_not_below == n - 1) return std::nullopt;   // never stays below
    return static_cast<Index>(*last_not_below);
}

NoiseReport noise_diagnostics(const Vector& k0_cols_dist, const SpectralSummary& s, double alpha,
                              double w, Index horizon) {
    if (horizon <= 0) throw std::invalid_argument("noise_diagnostics: horizon must be positive");
    if (w < 0.0) throw std::invalid_argument("noise_diagnostics: negative noise level");
    const Index d = k0_cols_dist.size();
    if (d == 0) throw std::invalid_argument("noise_diagnostics: empty column distances");

    NoiseReport rep;
    rep.rho = std::max(std::abs(1.0 - alpha * s.lambda1), std::abs(1.0 - alpha * s.lambda_d));
    rep.w_bd = (1.0 - rep.rho) / (s.lambda1 * std::sqrt(static_cast<double>(d)));

    rep.rho_j.resize(d);
    bool columns_ok = true;
    for (Index j = 0; j < d; ++j) {
        const double dist = k0_cols_dist(j);
        rep.rho_j(j) = (dist + w) > 0.0 ? dist / (dist + w) : 1.0;
        if (!(rep.rho < rep.rho_j(j))) columns_ok = false;
    }
    rep.conditions_hold = columns_ok && rep.rho < 1.0 && w < rep.w_bd;

    // S(t)^2 = sum_j (rho^t ||k~_j(0)|| + (1 + rho + ... + rho^t) w)^2
    rep.S_t.reserve(static_cast<std::size_t>(horizon) + 1);
    rep.R_t.reserve(static_cast<std::size_t>(horizon) + 1);
    for (Index t = 0; t <= horizon; ++t) {
        const double rho_t = std::pow(rep.rho, static_cast<double>(t));
        const double geom = rep.rho == 1.0 ? static_cast<double>(t + 1)
                                           : (1.0 - rep.rho * rho_t) / (1.0 - rep.rho);
        double s2 = 0.0;
        for (Index j = 0; j < d; ++j) {
            const double p = rho_t * k0_cols_dist(j) + geom * w;
            s2 += p * p;
        }
        rep.S_t.push_back(std::sqrt(s2));
        rep.R_t.push_back(s.lambda1 * rep.S_t.back());
    }

    for (Index t = 0; t + 1 <= horizon; ++t) {
        if (rep.R_t[static_cast<std::size_t>(t) + 1] < 1.0) {
            rep.T_prime = t;
            break;
        }
    }
    if (rep.T_prime && rep.conditions_hold) {
        const double r = rep.R_t[static_cast<std::size_t>(*rep.T_prime) + 1];
        rep.asymptotic_bound = w / (1.0 - r);
    }
    return rep;
}

AsymptoticError asymptotic_error(const RunRecord& run, Index window, double stall_tol) {
    if (run.err_norm.empty())
        throw std::invalid_argument("asymptotic_error: run has no error trace (x* unknown)");
    if (window < 2) throw std::invalid_argument("asymptotic_error: window too small");

    const auto& e = run.err_norm;
    const std::size_t n = e.size();
    const std::size_t w = static_cast<std::size_t>(window);
    for (std::size_t t = w - 1; t < n; ++t) {
        double lo = e[t], hi = e[t];
        for (std::size_t k = t + 1 - w; k <= t; ++k) {
            lo = std::min(lo, e[k]);
            hi = std::max(hi, e[k]);
        }
        if (hi - lo <= stall_tol * e[t]) return {e[t], true};
    }
    return {e.back(), false};
}

FlopEstimate flop_estimate(Index n_i, Index d) {
    FlopEstimate f;
    const long long ni = n_i, dd = d;
    f.agent_mults = 2 * ni * dd + dd * (2 * ni * dd);
    f.server_mults = dd * dd;
    return f;
}

std::optional<Index> iterations_to_tolerance(const RunRecord& run, double eps_tol) {
    for (std::size_t t = 0; t < run.rel_error.size(); ++t)
        if (run.rel_error[t] <= eps_tol) return static_cast<Index>(t);
    return std::nullopt;
}

}  // namespace lsq
