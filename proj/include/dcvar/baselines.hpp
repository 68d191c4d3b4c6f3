#pragma once

#include <cstdint>

#include "dcvar/market.hpp"
#include "dcvar/risk.hpp"
#include "dcvar/rollout.hpp"
#include "dcvar/training.hpp"

namespace dcvar {

enum class StaticKind { BuyAndHold, ConstantMix };

// A static financial strategy: one weight vector (col 0 cash), either held
// (buy-and-hold) or re-imposed at each rebalancing date (constant-mix).
struct StaticStrategy {
    StaticKind kind = StaticKind::ConstantMix;
    Eigen::VectorXd weights;  // d+1
    ConstraintSet constraints;
};

// Terminal wealth per path, with the ruin-freeze rule applied at grid dates.
std::vector<double> static_terminal_wealth(const StaticStrategy& strategy,
                                           const ReturnBatch& scenarios, double v0);

RiskReport evaluate_static(const StaticStrategy& strategy, const ReturnBatch& scenarios,
                           double v0, const RiskLevel& level,
                           std::optional<double> threshold = std::nullopt);

struct SaaOptions {
    int n_starts = 8;
    int epochs = 600;
    int minibatch = 20000;
    double feasibility_tol = 0.5;  // acceptance band around K on the SAA sample
    double lr = 0.02;
    ConstraintForm form = ConstraintForm::DCVaR;
    UtilityKind utility = UtilityKind::Identity;
};

// Multi-start projected-gradient SAA solve of the mean-DCVaR problem over the
// static decision vector, reusing the exact-penalty machinery. Keeps the best
// feasible start; throws "infeasible" when every start ends infeasible.
StaticStrategy saa_optimize(StaticKind kind, const ReturnBatch& scenarios, double v0,
                            double K, double kappa, const ConstraintSet& cs,
                            std::uint64_t seed, const SaaOptions& options = {});

}  // namespace dcvar
