#include "dcvar/market.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dcvar/rng.hpp"

namespace dcvar {

void MarketParams::validate() const {
    const auto d = mu.size();
    if (d < 1) throw std::invalid_argument("market needs at least one risky asset");
    if (vols.size() != d) throw std::invalid_argument("vols dimension mismatch");
    if (corr.rows() != d || corr.cols() != d)
        throw std::invalid_argument("corr dimension mismatch");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (vols(i) < 0.0) throw std::invalid_argument("negative volatility");
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
            throw std::invalid_argument("corr diagonal must be 1");
        for (Eigen::Index j = 0; j < d; ++j)
            if (std::abs(corr(i, j)) > 1.0 + 1e-12)
                throw std::invalid_argument("corr entries must lie in [-1,1]");
    }
    if (!corr.isApprox(corr.transpose(), 1e-12))
        throw std::invalid_argument("corr must be symmetric");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
}

MarketParams MarketParams::paper_market(int n_steps) {
    MarketParams p;
    p.mu.resize(4);
    p.mu << 0.09, 0.15, 0.21, 0.12;
    p.vols.resize(4);
    p.vols << 0.08, 0.12, 0.15, 0.08;
    p.corr.resize(4, 4);
    p.corr << 1.0, 0.2, -0.3, 0.0,
              0.2, 1.0, 0.15, -0.2,
              -0.3, 0.15, 1.0, 0.3,
              0.0, -0.2, 0.3, 1.0;
    p.rate = 0.02;
    p.horizon_years = 1.0;
    p.n_steps = n_steps;
    return p;
}

Eigen::MatrixXd build_covariance(const Eigen::VectorXd& vols, const Eigen::MatrixXd& corr) {
    if (corr.rows() != vols.size() || corr.cols() != vols.size())
        throw std::invalid_argument("build_covariance: dimension mismatch");
    return vols.asDiagonal() * corr * vols.asDiagonal();
}

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& gamma) {
    Eigen::LLT<Eigen::MatrixXd> llt(gamma);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("matrix not positive definite");
    return llt.matrixL();
}

ReturnBatch simulate_returns(const MarketParams& params, int n_paths, std::uint64_t seed) {
    params.validate();
    if (n_paths <= 0) throw std::invalid_argument("n_paths must be positive");

    const int d = params.n_assets();
    const int N = params.n_steps;
    const double dt = params.dt();
    const double sqrt_dt = std::sqrt(dt);

    Eigen::MatrixXd gamma = build_covariance(params.vols, params.corr);
    Eigen::MatrixXd L = cholesky(gamma);
    Eigen::VectorXd drift(d);
    for (int i = 0; i < d; ++i) drift(i) = (params.mu(i) - 0.5 * gamma(i, i)) * dt;

    ReturnBatch batch;
    batch.n_paths = n_paths;
    batch.n_steps = N;
    batch.n_assets = d;
    batch.dt = dt;
    batch.riskfree = std::exp(params.rate * dt);
    batch.seed = seed;
    batch.risky.resize(static_cast<std::size_t>(n_paths) * N * d);

    Eigen::VectorXd z(d), shock(d);
    for (int m = 0; m < n_paths; ++m) {
        GaussianStream g(stream_seed(seed, static_cast<std::uint64_t>(m)));
        for (int n = 0; n < N; ++n) {
            for (int i = 0; i < d; ++i) z(i) = g.next();
            shock.noalias() = L * z;
            double* out = &batch.risky[(static_cast<std::size_t>(m) * N + n) * d];
            for (int i = 0; i < d; ++i) out[i] = std::exp(drift(i) + sqrt_dt * shock(i));
        }
    }
    return batch;
}

void dump_returns_csv(const ReturnBatch& batch, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "path,step,asset,gross_return\n");
    for (int m = 0; m < batch.n_paths; ++m)
        for (int n = 0; n < batch.n_steps; ++n)
            for (int i = 0; i < batch.n_assets; ++i)
                std::fprintf(f, "%d,%d,%d,%.12g\n", m, n, i, batch.at(m, n, i));
    std::fclose(f);
}

}  // namespace dcvar
