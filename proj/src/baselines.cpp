#include "dcvar/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dcvar/rng.hpp"

namespace dcvar {

namespace {

// Terminal wealth W and its gradient G = dW/dw in the projected weights for a
// path subset, matching the ruin-freeze rule of static_terminal_wealth.
void static_wealth_and_grad(StaticKind kind, const ReturnBatch& ret,
                            const std::vector<int>& idx, double v0,
                            const Eigen::VectorXd& w, bool can_ruin,
                            Eigen::VectorXd& W, Eigen::MatrixXd& G) {
    const int d = ret.n_assets;
    const int N = ret.n_steps;
    const int B = static_cast<int>(idx.size());
    W.resize(B);
    G.resize(B, d + 1);
    Eigen::VectorXd cum(d + 1), gross(N), pre(N);
    Eigen::MatrixXd r(N, d + 1);
    for (int b = 0; b < B; ++b) {
        const int m = idx[b];
        if (kind == StaticKind::BuyAndHold) {
            cum.setOnes();
            double v = v0;
            for (int n = 0; n < N; ++n) {
                cum(0) *= ret.riskfree;
                for (int j = 0; j < d; ++j) cum(j + 1) *= ret.at(m, n, j);
                v = v0 * w.dot(cum);
                if (can_ruin && v <= 0.0) break;
            }
            W(b) = v;
            G.row(b) = v0 * cum.transpose();
        } else {
            int S = 0;
            double v = v0;
            for (int n = 0; n < N; ++n) {
                r(n, 0) = ret.riskfree;
                for (int j = 0; j < d; ++j) r(n, j + 1) = ret.at(m, n, j);
                gross(n) = w.dot(r.row(n));
                pre(n) = v;  // wealth entering step n
                v *= gross(n);
                ++S;
                if (can_ruin && v <= 0.0) break;
            }
            W(b) = v;
            double suf = 1.0;
            G.row(b).setZero();
            for (int n = S - 1; n >= 0; --n) {
                G.row(b) += pre(n) * suf * r.row(n);
                suf *= gross(n);
            }
        }
    }
}

// SAA model over a single raw decision vector mapped through the constraint
// projection; shares the exact-penalty training loop with the neural policies.
class StaticFinanceModel : public TrainableModel {
  public:
    StaticFinanceModel(StaticKind kind, const ReturnBatch& ret, double v0,
                       const ConstraintSet& cs, UtilityKind utility, TensorParam raw)
        : kind_(kind), ret_(ret), v0_(v0), cs_(cs), utility_(utility),
          raw_(std::move(raw)) {}

    std::vector<TensorParam*> params() override { return {&raw_}; }
    int sample_size() const override { return ret_.n_paths; }

    ad::Var utilities(ad::Tape& t, const std::vector<int>& idx) override {
        const int d = ret_.n_assets;
        ad::Var w = project_weights(t, t.param(raw_), cs_, d);  // [1 x (d+1)]
        const bool can_ruin = cs_.kind != ConstraintKind::LongOnly;

        // Local linearization of the frozen-wealth recursion at the current
        // weights: both the value and the first derivative are exact there,
        // which is all the stochastic-gradient loop consumes.
        Eigen::VectorXd w0 = t.val(w).row(0).transpose();
        Eigen::VectorXd W;
        Eigen::MatrixXd G;
        static_wealth_and_grad(kind_, ret_, idx, v0_, w0, can_ruin, W, G);
        Eigen::MatrixXd offset = W - G * w0;
        ad::Var v = t.add(t.constant(offset), t.matmul_const(G, t.transpose(w)));
        return apply_utility(t, v, utility_);
    }

    std::vector<double> utilities_all() override {
        StaticStrategy s = strategy();
        auto wealth = static_terminal_wealth(s, ret_, v0_);
        for (double& w : wealth) w = apply_utility(w, utility_);
        return wealth;
    }

    StaticStrategy strategy() const {
        StaticStrategy s;
        s.kind = kind_;
        s.constraints = cs_;
        s.weights =
            project_weights_plain(raw_.value, cs_, ret_.n_assets).row(0).transpose();
        return s;
    }

  private:
    StaticKind kind_;
    const ReturnBatch& ret_;
    double v0_;
    ConstraintSet cs_;
    UtilityKind utility_;
    TensorParam raw_;
};

}  // namespace

std::vector<double> static_terminal_wealth(const StaticStrategy& strategy,
                                           const ReturnBatch& scenarios, double v0) {
    const int d = scenarios.n_assets;
    if (strategy.weights.size() != d + 1)
        throw std::invalid_argument("weight vector must have d+1 entries");
    const bool can_ruin = strategy.constraints.kind != ConstraintKind::LongOnly;
    std::vector<double> out(scenarios.n_paths);

    Eigen::VectorXd cum(d + 1);
    for (int m = 0; m < scenarios.n_paths; ++m) {
        double v = v0;
        if (strategy.kind == StaticKind::BuyAndHold) {
            cum.setOnes();
            for (int n = 0; n < scenarios.n_steps; ++n) {
                cum(0) *= scenarios.riskfree;
                for (int j = 0; j < d; ++j) cum(j + 1) *= scenarios.at(m, n, j);
                double vn = v0 * strategy.weights.dot(cum);
                v = vn;
                if (can_ruin && v <= 0.0) break;
            }
        } else {
            for (int n = 0; n < scenarios.n_steps; ++n) {
                double g = strategy.weights(0) * scenarios.riskfree;
                for (int j = 0; j < d; ++j) g += strategy.weights(j + 1) * scenarios.at(m, n, j);
                v *= g;
                if (can_ruin && v <= 0.0) break;
            }
        }
        out[m] = v;
    }
    return out;
}

RiskReport evaluate_static(const StaticStrategy& strategy, const ReturnBatch& scenarios,
                           double v0, const RiskLevel& level,
                           std::optional<double> threshold) {
    auto wealth = static_terminal_wealth(strategy, scenarios, v0);
    std::vector<double> losses(wealth.size());
    for (std::size_t i = 0; i < wealth.size(); ++i) losses[i] = -wealth[i];
    return build_risk_report(LossSample(losses), level, v0, threshold);
}

StaticStrategy saa_optimize(StaticKind kind, const ReturnBatch& scenarios, double v0,
                            double K, double kappa, const ConstraintSet& cs,
                            std::uint64_t seed, const SaaOptions& options) {
    const int raw_dim = cs.raw_dim(scenarios.n_assets);
    bool have_best = false;
    StaticStrategy best;
    double best_mean = -std::numeric_limits<double>::infinity();
    double best_dcvar = std::numeric_limits<double>::infinity();
    const RiskLevel level(kappa);

    for (int s = 0; s < options.n_starts; ++s) {
        GaussianStream g(stream_seed(seed, 0x73616173ULL + s));
        Eigen::MatrixXd raw0(1, raw_dim);
        for (int j = 0; j < raw_dim; ++j) raw0(0, j) = 0.3 * g.next();
        StaticFinanceModel model(kind, scenarios, v0, cs, options.utility,
                                 TensorParam("static_raw", raw0));

        TrainConfig cfg;
        cfg.K = K;
        cfg.kappa = kappa;
        cfg.epochs = options.epochs;
        cfg.minibatch = options.minibatch;
        cfg.utility = options.utility;
        cfg.lr = options.lr;
        cfg.eta_lr = options.lr * 0.1;
        cfg.form = options.form;
        cfg.seed = stream_seed(seed, 0x6f707400ULL + s);
        cfg.penalty.rho1 = 0.02;
        cfg.penalty.rho2 = 0.02;
        train(model, cfg);

        StaticStrategy cand = model.strategy();
        RiskReport rep = evaluate_static(cand, scenarios, v0, level);
        double risk = options.form == ConstraintForm::DCVaR ? rep.dcvar_k : rep.cvar_k;
        bool feasible = !std::isfinite(K) || risk <= K + options.feasibility_tol;
        if (!feasible) continue;
        if (!have_best || rep.mean > best_mean ||
            (rep.mean == best_mean && risk < best_dcvar)) {
            have_best = true;
            best = cand;
            best_mean = rep.mean;
            best_dcvar = risk;
        }
    }
    if (!have_best) throw std::runtime_error("infeasible: no SAA start met the risk bound");
    return best;
}

}  // namespace dcvar
