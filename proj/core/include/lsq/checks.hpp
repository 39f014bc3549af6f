#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lsq {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // empty on success, first failure otherwise
};

/// Test-only fault injection: scales the alpha actually used by the solver
/// while the checked bounds are computed from the intended alpha. A scale
/// pushing alpha outside its admissible range must make the contraction
/// suite fail.
struct CheckHooks {
    double alpha_scale = 1.0;
};

/// Randomized property suites over small instances (d <= 8), seeded and
/// deterministic. Covers the pre-conditioner column contraction, the
/// per-iteration gradient bound, the superlinear ratio, sharded-vs-central
/// gradient identity, the quadratic-cost mapping, isotropic one-step
/// convergence, rank-deficient decay, the gradient-descent tail rate, rate
/// dominance relations, the noisy asymptotic bound, and reduction
/// determinism.
std::vector<CheckResult> run_property_checks(std::uint64_t seed, const CheckHooks& hooks = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace lsq
