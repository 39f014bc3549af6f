#include "lsq/checks.hpp"

#include <doctest.h>

using namespace lsq;

TEST_CASE("property suites: default seed passes") {
    const auto results = run_property_checks(0);
    CHECK(results.size() >= 11);
    for (const auto& r : results) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.pass);
    }
}

TEST_CASE("property suites: inflated alpha breaks the contraction suite") {
    CheckHooks hooks;
    hooks.alpha_scale = 10.0;  // pushes alpha far beyond its admissible range
    const auto results = run_property_checks(0, hooks);
    bool contraction_failed = false;
    for (const auto& r : results)
        if (r.name == "preconditioner-column-contraction") contraction_failed = !r.pass;
    CHECK(contraction_failed);
}

TEST_CASE("property suites: seed sweep") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto results = run_property_checks(seed);
        INFO("seed ", seed);
        CHECK(all_passed(results));
    }
}
