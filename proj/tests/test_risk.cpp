#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dcvar/risk.hpp"
#include "dcvar/rng.hpp"
#include "doctest.h"

using namespace dcvar;

namespace {

std::vector<double> iota_losses(int n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 1.0);
    return v;
}

std::vector<double> random_losses(int n, std::uint64_t seed) {
    GaussianStream g(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = 10.0 * g.next() + 3.0;
    return v;
}

}  // namespace

TEST_CASE("risk kernels on the 1..100 grid") {
    LossSample s(iota_losses(100));
    RiskLevel k95(0.95);
    CHECK(empirical_var(s, k95) == doctest::Approx(95.0).epsilon(1e-14));
    CHECK(empirical_cvar(s, k95) == doctest::Approx(98.0).epsilon(1e-14));
    CHECK(empirical_dcvar(s, k95) == doctest::Approx(47.5).epsilon(1e-14));
}

TEST_CASE("weighted kernels with a fractional atom") {
    // cumw: 0.1, 0.3, 0.6, 1.0 -> VaR_.5 = 3; CVaR = (3*0.1 + 4*0.4)/0.5
    LossSample s({1.0, 2.0, 3.0, 4.0}, {0.1, 0.2, 0.3, 0.4});
    RiskLevel k(0.5);
    CHECK(empirical_var(s, k) == doctest::Approx(3.0));
    CHECK(empirical_cvar(s, k) == doctest::Approx(3.8));
    CHECK(empirical_dcvar(s, k) == doctest::Approx(0.8));
}

TEST_CASE("quantile atom exactly at kappa") {
    LossSample s(iota_losses(10));
    // kappa = 0.5: cumulative weight of 5 is exactly 0.5 -> VaR = 5, tail is 6..10
    RiskLevel k(0.5);
    CHECK(empirical_var(s, k) == doctest::Approx(5.0));
    CHECK(empirical_cvar(s, k) == doctest::Approx(8.0));
}

TEST_CASE("Rockafellar-Uryasev equivalence and minimizer") {
    for (std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        LossSample s(random_losses(500, seed));
        for (double kap : {0.5, 0.9, 0.95, 0.99}) {
            RiskLevel k(kap);
            auto sol = minimize_eta(s, k);
            CHECK(sol.eta_star == doctest::Approx(empirical_var(s, k)).epsilon(1e-12));
            CHECK(sol.dcvar == doctest::Approx(empirical_dcvar(s, k)).epsilon(1e-10));
            // aux evaluated at the quantile equals the minimum
            CHECK(dcvar_aux(s, sol.eta_star, k) ==
                  doctest::Approx(empirical_dcvar(s, k)).epsilon(1e-10));
            // any other eta is no better
            for (double de : {-1.0, -0.1, 0.1, 1.0})
                CHECK(dcvar_aux(s, sol.eta_star + de, k) >= sol.dcvar - 1e-10);
        }
    }
}

TEST_CASE("deviation axioms") {
    LossSample s(random_losses(400, 3));
    RiskLevel k(0.9);
    double base = empirical_dcvar(s, k);
    CHECK(base >= 0.0);

    // translation invariance
    std::vector<double> shifted = s.values;
    for (auto& x : shifted) x += 17.5;
    CHECK(empirical_dcvar(LossSample(shifted), k) == doctest::Approx(base).epsilon(1e-12));

    // positive homogeneity
    std::vector<double> scaled = s.values;
    for (auto& x : scaled) x *= 2.5;
    CHECK(empirical_dcvar(LossSample(scaled), k) == doctest::Approx(2.5 * base).epsilon(1e-12));

    // vanishes on constants
    CHECK(empirical_dcvar(LossSample(std::vector<double>(50, 4.2)), k) ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gaussian tail against the closed form") {
    // CVaR_.99 of N(0,1) = phi(z_.99)/0.01 = 2.66521422...
    GaussianStream g(99);
    std::vector<double> v(200000);
    for (auto& x : v) x = g.next();
    double cvar = empirical_cvar(LossSample(v), RiskLevel(0.99));
    CHECK(cvar == doctest::Approx(2.6652142).epsilon(0.02));
}

TEST_CASE("risk report fields") {
    LossSample s({-90.0, -100.0, -110.0, -120.0});  // wealth 90..120
    RiskLevel k(0.5);
    auto rep = build_risk_report(s, k, 100.0, 5.0);
    CHECK(rep.mean == doctest::Approx(105.0));
    CHECK(rep.var_k == doctest::Approx(-110.0));
    // tail losses {-100,-90} -> cvar = -95, dcvar = -95 + 105 = 10
    CHECK(rep.cvar_k == doctest::Approx(-95.0));
    CHECK(rep.dcvar_k == doctest::Approx(10.0));
    CHECK(rep.constraint_gap == doctest::Approx(5.0));
    CHECK(rep.sharpe == doctest::Approx(5.0 / rep.std));

    auto flat = build_risk_report(LossSample(std::vector<double>(4, -100.0)), k, 100.0);
    CHECK(std::isnan(flat.sharpe));
    CHECK(std::isnan(flat.constraint_gap));
}

TEST_CASE("calibrated threshold transfer") {
    CHECK(calibrated_threshold(30.0, 105.5) == doctest::Approx(135.5));
}

TEST_CASE("sample validation") {
    CHECK_THROWS(LossSample(std::vector<double>{}));
    CHECK_THROWS(LossSample({1.0, 2.0}, {0.5, 0.6}));      // weights do not sum to 1
    CHECK_THROWS(LossSample({1.0, 2.0}, {1.0, 0.0}));      // nonpositive weight
    CHECK_THROWS(LossSample({1.0, 2.0}, {0.5}));           // size mismatch
    CHECK_THROWS(RiskLevel(0.0));
    CHECK_THROWS(RiskLevel(1.0));
}
