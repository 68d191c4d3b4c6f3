#pragma once

#include <cstdint>
#include <vector>

#include "dcvar/market.hpp"
#include "dcvar/nn.hpp"
#include "dcvar/tape.hpp"

namespace dcvar {

enum class ConstraintKind { LongOnly, Box, Unconstrained };

// Admissible set for portfolio weights. Box/Unconstrained parameterize the d
// risky weights directly and allocate the residual 1 - sum(w_risky) to cash.
struct ConstraintSet {
    ConstraintKind kind = ConstraintKind::LongOnly;
    Eigen::VectorXd lower;  // risky lower bounds (Box)
    Eigen::VectorXd upper;  // risky upper bounds (Box)

    static ConstraintSet long_only() { return {ConstraintKind::LongOnly, {}, {}}; }
    static ConstraintSet box(Eigen::VectorXd lo, Eigen::VectorXd up) {
        return {ConstraintKind::Box, std::move(lo), std::move(up)};
    }
    static ConstraintSet unconstrained() { return {ConstraintKind::Unconstrained, {}, {}}; }

    // RC setup of the financial experiments: risky upper bounds
    // (0.4, 0.3, 0.4, 1.0), lower bounds -1.
    static ConstraintSet paper_relative();

    // Raw network output dimension for d risky assets.
    int raw_dim(int n_assets) const {
        return kind == ConstraintKind::LongOnly ? n_assets + 1 : n_assets;
    }
};

enum class UtilityKind { Identity, Log };

// Shared recurrent policy for the financial problem: one feedforward network
// applied at every rebalancing date on features (V_n/V_0, n/N).
struct FinancialPolicy {
    Mlp net;
    ConstraintSet constraints;
    double v0 = 100.0;  // normalization anchor for the wealth feature

    static FinancialPolicy init(int n_assets, const ConstraintSet& cs, double v0,
                                std::uint64_t seed,
                                const std::vector<int>& hidden = {50, 50},
                                bool layer_norm = false);
    std::vector<TensorParam*> params() { return net.params(); }
};

struct WealthPaths {
    Eigen::MatrixXd wealth;            // M x (N+1)
    std::vector<char> ruined;          // per path
    std::vector<int> ruin_time;        // first n with V_n <= 0, or -1
    std::vector<Eigen::MatrixXd> weights;  // per step, M x (d+1), col 0 = cash
};

// Feature vector (V_n/V_0, n/N) used by the policy at step n.
Eigen::RowVector2d make_features(double v_n, double v0, int n, int n_steps);

// One self-financing step: V * (w0 R0 + sum_i w_i R_i). Weight layout: col 0
// cash, cols 1..d risky.
double wealth_update(double v, const Eigen::RowVectorXd& weights,
                     const Eigen::RowVectorXd& risky_returns, double riskfree);

// Maps raw network outputs to admissible weights [m x (d+1)], col 0 = cash.
ad::Var project_weights(ad::Tape& tape, ad::Var raw, const ConstraintSet& cs, int n_assets);
Eigen::MatrixXd project_weights_plain(const Eigen::MatrixXd& raw, const ConstraintSet& cs,
                                      int n_assets);

// Differentiable rollout over a subset of paths; returns terminal wealth
// [B x 1]. Paths are frozen at the first date wealth drops to <= 0.
ad::Var rollout_tape(ad::Tape& tape, FinancialPolicy& policy, const ReturnBatch& returns,
                     double v0, const std::vector<int>& path_idx);

// Forward-only rollout over all paths (no tape, low memory).
WealthPaths rollout(FinancialPolicy& policy, const ReturnBatch& returns, double v0,
                    bool record_weights = false);

ad::Var apply_utility(ad::Tape& tape, ad::Var wealth, UtilityKind kind);
double apply_utility(double wealth, UtilityKind kind);

}  // namespace dcvar
