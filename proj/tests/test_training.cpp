#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dcvar/risk.hpp"
#include "dcvar/rng.hpp"
#include "dcvar/training.hpp"
#include "doctest.h"

using namespace dcvar;
using ad::Tape;
using ad::Var;

namespace {

// utilities u_i = x * e_i: mean grows linearly in x, and so does the risk,
// making the constrained optimum analytically known.
class ScaledNoiseModel : public TrainableModel {
  public:
    ScaledNoiseModel(std::vector<double> e, double x0)
        : e_(std::move(e)), x_("x", Eigen::MatrixXd::Constant(1, 1, x0)) {}

    std::vector<TensorParam*> params() override { return {&x_}; }
    int sample_size() const override { return static_cast<int>(e_.size()); }

    Var utilities(Tape& t, const std::vector<int>& idx) override {
        Eigen::MatrixXd sub(idx.size(), 1);
        for (std::size_t i = 0; i < idx.size(); ++i) sub(i, 0) = e_[idx[i]];
        return t.mul_scalar(t.constant(sub), t.param(x_));
    }

    std::vector<double> utilities_all() override {
        std::vector<double> u(e_.size());
        for (std::size_t i = 0; i < e_.size(); ++i) u[i] = x_.value(0, 0) * e_[i];
        return u;
    }

    double x() const { return x_.value(0, 0); }

  private:
    std::vector<double> e_;
    TensorParam x_;
};

std::vector<double> noise(int n, std::uint64_t seed, double mean, double sd) {
    GaussianStream g(seed);
    std::vector<double> e(n);
    for (auto& x : e) x = mean + sd * g.next();
    return e;
}

}  // namespace

TEST_CASE("penalized loss closed form") {
    std::vector<double> u = {1.0, 2.0, 3.0, 4.0};
    auto t = penalized_loss(u, 1.0, 0.75, 0.0, 2.0, 3.0);
    // hinge terms all zero; g = eta + mean_u = 3.5
    CHECK(t.mean_u == doctest::Approx(2.5));
    CHECK(t.g_hat == doctest::Approx(3.5));
    CHECK(t.violation == doctest::Approx(3.5));
    CHECK(t.loss == doctest::Approx(-2.5 + 2.0 * 3.5 + 3.0 * 3.5 * 3.5));

    // active hinge: eta = -3 -> (-u-eta)_+ = (3-u)_+ = {2,1,0,0}, mean 0.75
    auto t2 = penalized_loss(u, -3.0, 0.75, 10.0, 1.0, 1.0);
    double g2 = -3.0 + 0.75 / 0.25 + 2.5;
    CHECK(t2.g_hat == doctest::Approx(g2));
    CHECK(t2.loss == doctest::Approx(-2.5));  // g < K, no penalty

    // CVaR form drops the mean term
    auto t3 = penalized_loss(u, -3.0, 0.75, 10.0, 1.0, 1.0, ConstraintForm::CVaR);
    CHECK(t3.g_hat == doctest::Approx(g2 - 2.5));
}

TEST_CASE("tape loss matches the scalar loss and is differentiable in eta") {
    auto u = noise(200, 3, 1.0, 2.0);
    TensorParam eta("eta", Eigen::MatrixXd::Constant(1, 1, 0.4));
    TensorParam scalev("s", Eigen::MatrixXd::Constant(1, 1, 1.3));
    auto build = [&](Tape& t) -> Var {
        Eigen::MatrixXd m(u.size(), 1);
        for (std::size_t i = 0; i < u.size(); ++i) m(i, 0) = u[i];
        Var uu = t.mul_scalar(t.constant(m), t.param(scalev));
        auto pv = penalized_loss_tape(t, uu, t.param(eta), 0.9, 1.5, 0.7, 0.4);
        return pv.loss;
    };
    Tape t;
    std::vector<double> su(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) su[i] = 1.3 * u[i];
    auto ref = penalized_loss(su, 0.4, 0.9, 1.5, 0.7, 0.4);
    Eigen::MatrixXd m(u.size(), 1);
    for (std::size_t i = 0; i < u.size(); ++i) m(i, 0) = u[i];
    Var uu = t.mul_scalar(t.constant(m), t.param(scalev));
    auto pv = penalized_loss_tape(t, uu, t.param(eta), 0.9, 1.5, 0.7, 0.4);
    CHECK(t.scalar(pv.loss) == doctest::Approx(ref.loss).epsilon(1e-12));
    CHECK(t.scalar(pv.g_hat) == doctest::Approx(ref.g_hat).epsilon(1e-12));

    CHECK(ad::grad_check(build, {&eta, &scalev}) < 1e-5);
}

TEST_CASE("dual updates") {
    PenaltyState s;
    s.lambda1 = 1.0;
    s.lambda2 = 1.0;
    s.rho1 = 0.5;
    s.rho2 = 0.5;
    s.ema_factor = 0.0;  // no smoothing: vbar = v
    auto s2 = dual_update(s, 2.0);
    CHECK(s2.lambda1 == doctest::Approx(2.0));
    CHECK(s2.lambda2 == doctest::Approx(3.0));

    // negative violation can only shrink lambda1, clamped at zero
    auto s3 = dual_update(s, -10.0);
    CHECK(s3.lambda1 == doctest::Approx(0.0));

    s.lambda_cap = 2.5;
    auto s4 = dual_update(s, 2.0);
    CHECK(s4.lambda2 == doctest::Approx(2.5));

    // EMA smoothing halves the first step
    PenaltyState e;
    e.ema_factor = 0.5;
    auto e2 = dual_update(e, 2.0);
    CHECK(e2.ema_violation == doctest::Approx(1.0));
}

TEST_CASE("eta inner subgradient steps move toward the quantile") {
    auto u = noise(5000, 5, 0.0, 1.0);
    std::vector<double> losses(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) losses[i] = -u[i];
    double target = empirical_var(LossSample(losses), RiskLevel(0.9));
    double eta = eta_inner_steps(u, -3.0, 0.9, 4000, 0.005);
    // subgradient descent oscillates in a band of width ~lr*kappa/(1-kappa)
    CHECK(std::abs(eta - target) < 0.1);
    CHECK(eta_inner_steps(u, -3.0, 0.9, 0, 0.005) == doctest::Approx(-3.0));
    CHECK_THROWS(eta_inner_steps(u, 0.0, 0.9, -1, 0.005));
}

TEST_CASE("training solves the scaled-noise problem to its known optimum") {
    auto e = noise(4000, 7, 1.0, 1.0);
    LossSample negs([&] {
        std::vector<double> l(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) l[i] = -e[i];
        return l;
    }());
    double unit_dcvar = empirical_dcvar(negs, RiskLevel(0.95));
    double K = 2.0;
    double x_star = K / unit_dcvar;

    ScaledNoiseModel model(e, 0.1);
    TrainConfig cfg;
    cfg.K = K;
    cfg.kappa = 0.95;
    cfg.epochs = 300;
    cfg.minibatch = 4000;
    cfg.lr = 0.05;
    cfg.eta_lr = 0.05;
    cfg.lr_decay_final = 0.05;
    cfg.penalty.rho1 = 0.05;
    cfg.penalty.rho2 = 0.05;
    cfg.seed = 11;
    auto res = train(model, cfg);

    CHECK(model.x() == doctest::Approx(x_star).epsilon(0.05));
    CHECK(res.history.size() == 300);
    // final constraint value sits near the bound
    auto u = model.utilities_all();
    std::vector<double> l(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) l[i] = -u[i];
    CHECK(empirical_dcvar(LossSample(l), RiskLevel(0.95)) == doctest::Approx(K).epsilon(0.05));
    // reported eta tracks the empirical quantile
    CHECK(res.eta == doctest::Approx(empirical_var(LossSample(l), RiskLevel(0.95)))
                         .epsilon(0.25));
}

TEST_CASE("unbounded threshold reduces to mean maximization") {
    auto e = noise(500, 9, 1.0, 0.3);
    ScaledNoiseModel model(e, 0.1);
    TrainConfig cfg;
    cfg.K = std::numeric_limits<double>::infinity();
    cfg.kappa = 0.95;
    cfg.epochs = 60;
    cfg.minibatch = 500;
    cfg.lr = 0.05;
    cfg.seed = 13;
    auto res = train(model, cfg);
    CHECK(model.x() > 1.0);  // keeps growing, never penalized
    for (const auto& h : res.history) {
        CHECK(h.lambda1 == doctest::Approx(cfg.penalty.lambda1));
        CHECK(h.lambda2 == doctest::Approx(cfg.penalty.lambda2));
    }
}

TEST_CASE("frontier tightening trains against a stricter bound") {
    auto e = noise(4000, 15, 1.0, 1.0);
    LossSample negs([&] {
        std::vector<double> l(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) l[i] = -e[i];
        return l;
    }());
    double unit_dcvar = empirical_dcvar(negs, RiskLevel(0.95));

    ScaledNoiseModel model(e, 0.1);
    TrainConfig cfg;
    cfg.K = 2.0;
    cfg.delta = 0.5;
    cfg.kappa = 0.95;
    cfg.epochs = 200;
    cfg.minibatch = 4000;
    cfg.lr = 0.05;
    cfg.penalty.rho1 = 0.05;
    cfg.penalty.rho2 = 0.05;
    cfg.seed = 17;
    train(model, cfg);
    CHECK(model.x() == doctest::Approx(1.5 / unit_dcvar).epsilon(0.07));
}

TEST_CASE("history csv layout") {
    std::vector<EpochStats> h = {{0, 1.0, 2.0, 0.5, 0.5, -1.0}};
    write_history_csv(h, "hist_test.csv");
    std::ifstream f("hist_test.csv");
    std::string line;
    std::getline(f, line);
    CHECK(line == "epoch,mean_utility,g_hat,lambda1,lambda2,eta");
    std::getline(f, line);
    CHECK(line.rfind("0,", 0) == 0);
    std::remove("hist_test.csv");
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.kappa = 1.2;
    CHECK_THROWS(c.validate());
    c = TrainConfig{};
    c.warmup_frac = 0.9;
    c.adaptive_frac = 0.5;
    CHECK_THROWS(c.validate());
    c = TrainConfig{};
    c.delta = -1.0;
    CHECK_THROWS(c.validate());
    c = TrainConfig{};
    c.K = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(c.validate());
}
