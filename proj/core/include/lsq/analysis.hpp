#pragma once

#include "lsq/linalg.hpp"
#include "lsq/solvers.hpp"

#include <optional>
#include <vector>

namespace lsq {

/// Closed-form convergence-rate quantities for a given spectrum and
/// parameter choice.
struct RateReport {
    double mu_star = 0.0;      // best achievable pre-conditioned rate
    double varrho = 0.0;       // best achievable pre-conditioner contraction
    double mu_gd = 0.0;        // best achievable plain gradient-descent rate
    double delta_crit = 0.0;   // step size at which mu(delta) = mu_star
    double mu_of_delta = 0.0;  // achieved estimate-contraction rate
    double rho_of_alpha = 0.0; // achieved pre-conditioner contraction rate
    // echoed inputs
    double beta = 0.0, alpha = 0.0, delta = 0.0;
    double lambda1 = 0.0, lambda_r = 0.0, lambda_d = 0.0;
};

/// mu* is evaluated as beta(l1-lr) / (2 l1 lr + beta(l1+lr)), which is
/// finite at beta = 0.
RateReport theoretical_rates(const SpectralSummary& s, double beta, double alpha, double delta);

struct BoundCheck {
    std::vector<double> bound;  // bound[t] multiplies ||g(t)||, t = 0..n-2
    bool pass = true;
    Index first_fail = -1;      // iteration index of the first violating gradient
};

/// Per-iteration check of
///   ||g(t+1)|| <= (mu(delta) + delta l1 k0_dist rho(alpha)^{t+1}) ||g(t)|| + 1e-9 ||g(0)||
/// over a recorded pre-conditioned run with matching parameters.
BoundCheck gradient_bound_check(const RunRecord& run, const RateReport& rates, double k0_dist);

/// Smallest T such that the pre-conditioned gradient norm is strictly below
/// the plain gradient-descent one for every recorded t > T; nullopt when the
/// traces coincide or GD stays ahead through the end of the common range.
std::optional<Index> crossover_iteration(const RunRecord& run_ipg, const RunRecord& run_gd);

/// Noise-robustness diagnostics (beta = 0, full-rank spectrum).
struct NoiseReport {
    double rho = 0.0;                       // rho(alpha)
    Vector rho_j;                           // per-column admissible thresholds
    double w_bd = 0.0;                      // (1 - rho) / (lambda1 sqrt(d))
    std::vector<double> S_t;                // pre-conditioner drift envelope
    std::vector<double> R_t;                // lambda1 * S(t)
    std::optional<Index> T_prime;           // first t with R(t+1) < 1
    std::optional<double> asymptotic_bound; // w / (1 - R(T'+1))
    bool conditions_hold = false;
};

/// k0_cols_dist holds the per-column distances ||k_j(0) - k_j0||.
NoiseReport noise_diagnostics(const Vector& k0_cols_dist, const SpectralSummary& s, double alpha,
                              double w, Index horizon);

struct AsymptoticError {
    double value = 0.0;  // stalled absolute error norm ||x - x*||
    bool stalled = false;
};

/// Error-norm value once the trailing `window` samples vary by at most
/// stall_tol relative; reports the last value flagged unconverged when the
/// trace never stalls.
AsymptoticError asymptotic_error(const RunRecord& run, Index window = 100,
                                 double stall_tol = 1e-3);

struct FlopEstimate {
    long long agent_mults = 0;
    long long server_mults = 0;
};

/// Multiplication counts per round: agents pay two matrix-vector products
/// for the gradient and two per pre-conditioner column, the server one
/// d x d matrix-vector product.
FlopEstimate flop_estimate(Index n_i, Index d);

/// First t with rel_error(t) <= eps_tol; nullopt if never reached.
std::optional<Index> iterations_to_tolerance(const RunRecord& run, double eps_tol);

}  // namespace lsq
