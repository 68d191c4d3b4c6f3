#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dcvar {

// Multidimensional Black-Scholes market description.
struct MarketParams {
    Eigen::VectorXd mu;    // drift per year
    Eigen::VectorXd vols;  // volatility per sqrt(year)
    Eigen::MatrixXd corr;  // correlation matrix
    double rate = 0.0;     // risk-free rate per year
    double horizon_years = 1.0;
    int n_steps = 1;

    int n_assets() const { return static_cast<int>(mu.size()); }
    double dt() const { return horizon_years / n_steps; }
    void validate() const;

    // The four-asset setup used throughout the financial experiments.
    static MarketParams paper_market(int n_steps);
};

// M x N x d gross returns, path-major layout. Immutable after construction.
struct ReturnBatch {
    int n_paths = 0;
    int n_steps = 0;
    int n_assets = 0;
    double dt = 0.0;
    double riskfree = 1.0;  // per-step gross risk-free return exp(r*dt)
    std::uint64_t seed = 0;
    std::vector<double> risky;  // [path][step][asset]

    double at(int path, int step, int asset) const {
        return risky[(static_cast<std::size_t>(path) * n_steps + step) * n_assets + asset];
    }
};

Eigen::MatrixXd build_covariance(const Eigen::VectorXd& vols, const Eigen::MatrixXd& corr);

// Lower-triangular L with L L^T = gamma. Throws on non-PD input.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& gamma);

// Exact lognormal stepping; one independent RNG stream per path derived from
// (seed, path index), so the batch is invariant to any parallel split.
ReturnBatch simulate_returns(const MarketParams& params, int n_paths, std::uint64_t seed);

// CSV dump with columns path,step,asset,gross_return.
void dump_returns_csv(const ReturnBatch& batch, const std::string& path);

}  // namespace dcvar
