#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcvar/market.hpp"
#include "doctest.h"

using namespace dcvar;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("covariance and cholesky") {
    Eigen::VectorXd vols(2);
    vols << 0.1, 0.2;
    Eigen::MatrixXd corr(2, 2);
    corr << 1.0, 0.5, 0.5, 1.0;
    Eigen::MatrixXd gamma = build_covariance(vols, corr);
    CHECK(gamma(0, 0) == doctest::Approx(0.01));
    CHECK(gamma(1, 1) == doctest::Approx(0.04));
    CHECK(gamma(0, 1) == doctest::Approx(0.01));

    Eigen::MatrixXd l = cholesky(gamma);
    CHECK((l * l.transpose() - gamma).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(l(0, 1) == doctest::Approx(0.0));

    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
    CHECK_THROWS(cholesky(bad));
}

TEST_CASE("four-asset market setup") {
    auto m = MarketParams::paper_market(12);
    CHECK(m.n_assets() == 4);
    CHECK(m.mu(0) == doctest::Approx(0.09));
    CHECK(m.mu(3) == doctest::Approx(0.12));
    CHECK(m.vols(2) == doctest::Approx(0.15));
    CHECK(m.corr(0, 1) == doctest::Approx(m.corr(1, 0)));
    CHECK(m.rate == doctest::Approx(0.02));
    CHECK(m.dt() == doctest::Approx(1.0 / 12));
    m.validate();
}

TEST_CASE("simulated moments match the lognormal law") {
    MarketParams m;
    m.mu = Eigen::VectorXd::Zero(2);
    m.mu << 0.09, 0.15;
    m.vols = Eigen::VectorXd::Zero(2);
    m.vols << 0.08, 0.12;
    m.corr = Eigen::MatrixXd::Identity(2, 2);
    m.corr(0, 1) = m.corr(1, 0) = 0.4;
    m.rate = 0.02;
    m.n_steps = 4;

    const int M = 200000;
    auto batch = simulate_returns(m, M, 11);
    CHECK(batch.riskfree == doctest::Approx(std::exp(0.02 * 0.25)));

    double dt = 0.25;
    for (int a = 0; a < 2; ++a) {
        double mean = 0.0, sq = 0.0;
        for (int p = 0; p < M; ++p) {
            double lr = std::log(batch.at(p, 1, a));
            mean += lr;
            sq += lr * lr;
        }
        mean /= M;
        double sd = std::sqrt(sq / M - mean * mean);
        double sig = m.vols(a);
        CHECK(mean == doctest::Approx((m.mu(a) - 0.5 * sig * sig) * dt).epsilon(0.03));
        CHECK(sd == doctest::Approx(sig * std::sqrt(dt)).epsilon(0.01));
    }

    // correlation of log returns
    double c01 = 0.0, m0 = 0.0, m1 = 0.0, v0 = 0.0, v1 = 0.0;
    for (int p = 0; p < M; ++p) {
        double x = std::log(batch.at(p, 0, 0)), y = std::log(batch.at(p, 0, 1));
        m0 += x;
        m1 += y;
    }
    m0 /= M;
    m1 /= M;
    for (int p = 0; p < M; ++p) {
        double x = std::log(batch.at(p, 0, 0)) - m0, y = std::log(batch.at(p, 0, 1)) - m1;
        c01 += x * y;
        v0 += x * x;
        v1 += y * y;
    }
    CHECK(c01 / std::sqrt(v0 * v1) == doctest::Approx(0.4).epsilon(0.02));
}

TEST_CASE("determinism and stream independence") {
    auto m = MarketParams::paper_market(4);
    auto a = simulate_returns(m, 100, 5);
    auto b = simulate_returns(m, 100, 5);
    CHECK(a.risky == b.risky);

    // first paths agree regardless of batch size (per-path streams)
    auto big = simulate_returns(m, 200, 5);
    for (int n = 0; n < m.n_steps; ++n)
        for (int j = 0; j < 4; ++j) CHECK(a.at(7, n, j) == big.at(7, n, j));

    auto c = simulate_returns(m, 100, 6);
    CHECK(a.risky != c.risky);
}

TEST_CASE("csv dump is byte-identical across runs") {
    auto m = MarketParams::paper_market(2);
    auto batch = simulate_returns(m, 10, 3);
    dump_returns_csv(batch, "returns_a.csv");
    dump_returns_csv(batch, "returns_b.csv");
    std::string a = slurp("returns_a.csv"), b = slurp("returns_b.csv");
    CHECK(a == b);
    CHECK(a.rfind("path,step,asset,gross_return", 0) == 0);
    std::remove("returns_a.csv");
    std::remove("returns_b.csv");
}

TEST_CASE("market validation") {
    auto m = MarketParams::paper_market(4);
    m.n_steps = 0;
    CHECK_THROWS(m.validate());
    m = MarketParams::paper_market(4);
    m.vols(1) = -0.1;
    CHECK_THROWS(m.validate());
    m = MarketParams::paper_market(4);
    m.corr(0, 1) = 2.0;
    CHECK_THROWS(m.validate());
}
