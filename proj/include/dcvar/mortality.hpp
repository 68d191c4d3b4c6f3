#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dcvar {

// Gompertz-Makeham baseline hazard mu0(x) = a + beta * e^{c x}.
struct GompertzMakehamParams {
    double a = 5e-4;
    double beta = 7e-5;
    double c = 0.09;
    void validate() const;
};

double gm_intensity(double x, const GompertzMakehamParams& p);
// K_x = int_0^1 mu0(x+u) du = a + (beta/c)(e^{c(x+1)} - e^{cx})
double integrated_intensity(double x, const GompertzMakehamParams& p);
// yearly death probability under a piecewise-constant factor: 1 - exp(-z^+ K_x)
double death_prob(double x, double z, const GompertzMakehamParams& p);

// Square-root factor dZ = (g - b Z)dt + sigma sqrt(Z) dW, simulated yearly with
// a positivity-preserving full-truncation Euler step. rho correlates the
// mortality and longevity innovations (read from the first factor's params).
struct CirParams {
    double g = 0.30;
    double b = 0.30;
    double sigma = 0.20;
    double z0 = 1.0;
    double rho = 0.25;
    void validate() const;
};

struct FactorPaths {
    int n_paths = 0;
    int n_years = 0;                // grid 0..n_years inclusive
    std::vector<double> zm, zl;     // [path][year]
    double m(int p, int t) const { return zm[static_cast<std::size_t>(p) * (n_years + 1) + t]; }
    double l(int p, int t) const { return zl[static_cast<std::size_t>(p) * (n_years + 1) + t]; }
};

FactorPaths simulate_factors(const CirParams& cir_m, const CirParams& cir_l, int n_years,
                             int n_paths, std::uint64_t seed);

enum class ContractKind { MortalityTerm, LongevityAnnuity };

struct ContractSpec {
    ContractKind kind = ContractKind::MortalityTerm;
    double age = 65.0;
    double cohort_size = 1.0;   // N_0 per unit of underwriting volume
    double benefit = 1.0;       // death benefit C, or annuity payment R
    double premium_pure = 0.0;  // per-period (mortality) or single (longevity)
    double loading = 0.10;
    int horizon = 20;  // T years
    double rate = 0.02;

    double v() const { return 1.0 / (1.0 + rate); }
    double premium_loaded() const { return (1.0 + loading) * premium_pure; }
    void validate() const;
};

// Large homogeneous portfolio: N_{t+1} = N_t (1 - q_t) along one factor path.
struct SurvivorPath {
    std::vector<double> n;       // size T+1
    std::vector<double> deaths;  // size T, N_t q_t
};
// z must provide at least `horizon` values z[0..horizon-1]
SurvivorPath survivor_path(double n0, double age, const std::vector<double>& z, int horizon,
                           const GompertzMakehamParams& p);

// Net cash flows CF_t for t = 0..T (mortality: CF_T = 0; longevity: single
// premium at t=0, annuity outgo afterwards). Discounting convention: the
// actuarial present value is sum_t v^{t+1} CF_t.
std::vector<double> contract_cashflows(const ContractSpec& contract, const SurvivorPath& path);

// Pure premium per unit of benefit making the MC estimate of the APV zero.
double fair_premium(ContractKind kind, const ContractSpec& shape,
                    const GompertzMakehamParams& gm, const CirParams& cir, int n_mc,
                    std::uint64_t seed);

// Exponential-affine survival transform table:
// f_{h,x0+off}(z) = E[exp(-sum_{k<h} K_{x0+off+k} Z_{s+k}) | Z_s = z] = exp(A - B z).
// Valid entries satisfy h + off <= h_max.
struct AffineBeTable {
    double base_age = 0.0;
    int h_max = 0;
    Eigen::MatrixXd A, B;  // (h, age offset)
    double f(int h, int age_offset, double z) const;
    void validate() const;
};

// Backward recursion with the one-step Laplace transform consistent with the
// full-truncation Euler scheme; exact_cir switches to the closed-form CIR
// transform instead.
AffineBeTable affine_be_coeffs(const GompertzMakehamParams& gm, const CirParams& cir,
                               double base_age, int h_max, bool exact_cir = false);

// Conditional expected discounted future cash flows at development year h,
// given n_h survivors and factor level z: BE_{h} = E[sum_{t>=h} v^{t-h+1} CF_t | z].
double best_estimate(const ContractSpec& contract, double n_h, double z, int h,
                     const AffineBeTable& table);

// Annual profit decomposition along one factor path (z[0..d_max] at least):
// X_1 = CF_0 + BE_1, X_d = CF_{d-1} + BE_d - BE_{d-1}/v for d >= 2.
// Returns X indexed by d = 1..d_max (entry [0] unused, kept zero);
// d_max < 0 means the full sequence d = 1..T+1.
std::vector<double> annual_profits(const ContractSpec& contract,
                                   const GompertzMakehamParams& gm,
                                   const std::vector<double>& z, const AffineBeTable& table,
                                   int d_max = -1);

// Short-tailed casualty line: yearly profit (1+theta) alpha/beta - S with
// S ~ Gamma(alpha, rate beta), i.i.d. across years and paths.
struct CasualtyParams {
    double alpha = 5.0;
    double beta = 1.0;
    double theta = 0.10;
    void validate() const;
};

// [n_paths x horizon] raw per-unit profits
Eigen::MatrixXd casualty_profits(const CasualtyParams& params, int horizon, int n_paths,
                                 std::uint64_t seed);

// Full actuarial setup for the three-line underwriting problem. calibrate()
// fills fair premiums, the affine table and the per-unit exposure scales so
// one unit of volume carries discounted premium inflow ~11 / outflow ~10.
struct InsuranceSetup {
    GompertzMakehamParams gm;
    CirParams cir_m, cir_l;
    CasualtyParams casualty;
    double age = 65.0;
    int horizon = 20;
    double rate = 0.02;
    double loading = 0.10;
    int n_ctrl = 5;  // decision dates (calendar years n0 .. n0+n_ctrl-1)
    int n0 = 1;      // in-force underwriting years before the first decision
    double alpha_if_m = 0.0, alpha_if_l = 0.0;
    bool exact_cir = false;

    ContractSpec mortality, longevity;  // calibrated contracts (unit volume)
    double casualty_scale = 0.0;
    AffineBeTable table_m, table_l;  // one per factor
    bool calibrated = false;

    int reward_years() const { return n0 + n_ctrl; }  // profits recognized in years 1..n
    void validate() const;
    void calibrate();
};

enum class Lob { Mortality, Longevity, Casualty };

// Per-unit annual profits X^l[scenario][underwriting year][development year],
// development years 1..n_years with zeros past the reward horizon.
struct LobProfitCube {
    int n_scen = 0;
    int n_uw = 0;     // A = n0 + n_ctrl underwriting years (calendar 0..A-1)
    int n_years = 0;  // reward horizon n; profits land in calendar years 1..n
    int n0 = 1;
    double v = 1.0;
    double alpha_if_m = 0.0, alpha_if_l = 0.0;
    std::vector<float> xm, xl, xc;
    // per-person survivor fraction of cohort i at calendar year t (0 before
    // underwriting), [scen][uw][t = 0..n_years]
    std::vector<float> sm, sl;

    std::size_t idx(int k, int i, int d) const {
        return (static_cast<std::size_t>(k) * n_uw + i) * n_years + (d - 1);
    }
    std::size_t sidx(int k, int i, int t) const {
        return (static_cast<std::size_t>(k) * n_uw + i) * (n_years + 1) + t;
    }
    double at(Lob lob, int k, int i, int d) const;
    double surv(Lob lob, int k, int i, int t) const;
    void validate() const;
};

LobProfitCube build_profit_cube(const InsuranceSetup& setup, int n_scen, std::uint64_t seed);

// Linear cohort aggregation: controls [n_ctrl x 3] (columns M, L, C) applied to
// the cohorts underwritten at the decision dates, in-force exposures to the
// rest. yearly: [n_scen x n_years] total profit Y_j; reward = sum_j v^j Y_j.
struct AggregateResult {
    Eigen::MatrixXd yearly;
    std::vector<double> reward;
};
AggregateResult aggregate_lob(const LobProfitCube& cube, const Eigen::MatrixXd& controls);

void export_profit_cube_csv(const LobProfitCube& cube, const std::string& path);
void export_profit_cube_binary(const LobProfitCube& cube, const std::string& path);
LobProfitCube load_profit_cube_binary(const std::string& path);

}  // namespace dcvar
