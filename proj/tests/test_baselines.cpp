#include <cmath>
#include <limits>

#include "dcvar/baselines.hpp"
#include "doctest.h"

using namespace dcvar;

namespace {

ReturnBatch tiny_batch(const std::vector<std::vector<double>>& paths, double riskfree) {
    ReturnBatch b;
    b.n_paths = static_cast<int>(paths.size());
    b.n_steps = static_cast<int>(paths[0].size());
    b.n_assets = 1;
    b.riskfree = riskfree;
    for (const auto& p : paths)
        for (double r : p) b.risky.push_back(r);
    return b;
}

}  // namespace

TEST_CASE("static terminal wealth, hand-checked") {
    auto batch = tiny_batch({{2.0, 0.5}}, 1.0);
    StaticStrategy bh;
    bh.kind = StaticKind::BuyAndHold;
    bh.weights = Eigen::VectorXd(2);
    bh.weights << 0.5, 0.5;
    bh.constraints = ConstraintSet::long_only();
    // cumulative asset return 2 then 1 -> V2 = 100*(0.5 + 0.5*1)
    CHECK(static_terminal_wealth(bh, batch, 100.0)[0] == doctest::Approx(100.0));

    StaticStrategy cm = bh;
    cm.kind = StaticKind::ConstantMix;
    // V1 = 100*(0.5+0.5*2) = 150; V2 = 150*(0.5+0.5*0.5) = 112.5
    CHECK(static_terminal_wealth(cm, batch, 100.0)[0] == doctest::Approx(112.5));
}

TEST_CASE("ruin freezes static strategies") {
    auto batch = tiny_batch({{0.2, 3.0}}, 1.0);
    StaticStrategy cm;
    cm.kind = StaticKind::ConstantMix;
    cm.weights = Eigen::VectorXd(2);
    cm.weights << -1.0, 2.0;  // leveraged long
    cm.constraints = ConstraintSet::unconstrained();
    // V1 = 100*(-1 + 2*0.2) = -60 <= 0, frozen there
    CHECK(static_terminal_wealth(cm, batch, 100.0)[0] == doctest::Approx(-60.0));

    StaticStrategy bh = cm;
    bh.kind = StaticKind::BuyAndHold;
    // same first date, frozen at -60 even though cumret recovers to 0.6
    CHECK(static_terminal_wealth(bh, batch, 100.0)[0] == doctest::Approx(-60.0));
}

TEST_CASE("evaluate_static reports wealth statistics") {
    auto batch = tiny_batch({{1.1}, {0.9}, {1.0}, {1.2}}, 1.0);
    StaticStrategy cm;
    cm.kind = StaticKind::ConstantMix;
    cm.weights = Eigen::VectorXd(2);
    cm.weights << 0.0, 1.0;
    cm.constraints = ConstraintSet::long_only();
    auto rep = evaluate_static(cm, batch, 100.0, RiskLevel(0.5));
    CHECK(rep.mean == doctest::Approx(105.0));
    // losses {-110,-90,-100,-120}: VaR_.5 = -110, CVaR = -95, DCVaR = 10
    CHECK(rep.dcvar_k == doctest::Approx(10.0));
}

TEST_CASE("saa finds the all-risky optimum when unconstrained by risk") {
    // one asset with a clear positive premium, long-only, no risk bound:
    // the mean-optimal static mix is fully invested in the risky asset
    MarketParams m;
    m.mu = Eigen::VectorXd::Constant(1, 0.3);
    m.vols = Eigen::VectorXd::Constant(1, 0.1);
    m.corr = Eigen::MatrixXd::Identity(1, 1);
    m.rate = 0.0;
    m.n_steps = 2;
    auto batch = simulate_returns(m, 2000, 51);

    SaaOptions opt;
    opt.n_starts = 2;
    opt.epochs = 200;
    opt.minibatch = 2000;
    opt.lr = 0.1;  // the simplex corner needs large logits
    auto s = saa_optimize(StaticKind::ConstantMix, batch, 100.0,
                          std::numeric_limits<double>::infinity(), 0.99,
                          ConstraintSet::long_only(), 53, opt);
    CHECK(s.weights(1) > 0.95);
    CHECK(s.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("saa respects a binding risk bound") {
    // risky-vs-cash tradeoff: cap DCVaR well below the all-in level
    MarketParams m;
    m.mu = Eigen::VectorXd::Constant(1, 0.3);
    m.vols = Eigen::VectorXd::Constant(1, 0.4);
    m.corr = Eigen::MatrixXd::Identity(1, 1);
    m.rate = 0.0;
    m.n_steps = 2;
    auto batch = simulate_returns(m, 4000, 57);

    StaticStrategy all_in;
    all_in.kind = StaticKind::ConstantMix;
    all_in.weights = Eigen::VectorXd(2);
    all_in.weights << 0.0, 1.0;
    all_in.constraints = ConstraintSet::long_only();
    double full_risk = evaluate_static(all_in, batch, 100.0, RiskLevel(0.95)).dcvar_k;
    double K = 0.5 * full_risk;

    SaaOptions opt;
    opt.n_starts = 3;
    opt.epochs = 200;
    opt.minibatch = 4000;
    auto s = saa_optimize(StaticKind::ConstantMix, batch, 100.0, K, 0.95,
                          ConstraintSet::long_only(), 59, opt);
    auto rep = evaluate_static(s, batch, 100.0, RiskLevel(0.95));
    CHECK(rep.dcvar_k <= K + opt.feasibility_tol);
    CHECK(rep.dcvar_k >= K - 2.0);  // bound is active, not slack
    CHECK(s.weights(1) < 0.95);
}

TEST_CASE("mismatched weight length throws") {
    auto batch = tiny_batch({{1.0}}, 1.0);
    StaticStrategy s;
    s.weights = Eigen::VectorXd::Zero(3);
    CHECK_THROWS(static_terminal_wealth(s, batch, 100.0));
}
