#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dcvar/baselines.hpp"
#include "dcvar/mortality.hpp"
#include "dcvar/nn.hpp"
#include "dcvar/risk.hpp"
#include "dcvar/training.hpp"

namespace dcvar {

// Per-decision-date box bounds on the underwriting volumes (columns M, L, C).
struct BoundsSchedule {
    Eigen::MatrixXd lower, upper;  // [n_ctrl x 3]; upper entries may be +inf

    int n_ctrl() const { return static_cast<int>(lower.rows()); }
    Eigen::VectorXd lower_at(int s) const;
    Eigen::VectorXd upper_at(int s) const;
    void validate() const;

    // alpha >= 0, no cap
    static BoundsSchedule long_only(int n_ctrl = 5);
    // constant box: M in [0.6, 30], L in [0.9, 10], C in [0.6, 5]
    static BoundsSchedule constant_box(int n_ctrl = 5);
    // five-date schedule, loosening over time (lower shrinks to 0, cap grows)
    static BoundsSchedule time_box();
};

struct InsurancePolicySpec {
    int n_uw = 6;  // total underwriting years A (in-force + decisions)
    int hidden = 16;
    std::vector<int> head_hidden = {16, 16};
    bool cohort_mask = false;  // append binary already-underwritten indicators

    // [time, cumulative reward, previous decision (3)] + per-cohort mortality
    // and longevity exposures (+ optional activity mask)
    int input_dim() const { return 5 + (cohort_mask ? 3 : 2) * n_uw; }
};

// Recurrent underwriting policy: a GRU over the per-date feature vector,
// a residual MLP head mapping the hidden state to 3 raw outputs, and the
// date-dependent box projection.
class InsurancePolicy {
  public:
    InsurancePolicy() = default;
    static InsurancePolicy init(const BoundsSchedule& bounds, std::uint64_t seed,
                                InsurancePolicySpec spec = {});

    std::vector<TensorParam*> params();
    const BoundsSchedule& bounds() const { return bounds_; }
    const InsurancePolicySpec& spec() const { return spec_; }
    GruCell& gru() { return gru_; }
    Mlp& head() { return head_; }

  private:
    InsurancePolicySpec spec_;
    BoundsSchedule bounds_;
    GruCell gru_;
    Mlp head_;
};

struct InsuranceRolloutVars {
    ad::Var reward;                 // [B x 1] discounted total profit
    std::vector<ad::Var> controls;  // per decision date, [B x 3]
};

// Differentiable rollout over a scenario subset. The decision at date s only
// sees profits and survivor counts realized by then (predictable controls).
InsuranceRolloutVars rollout_insurance_tape(ad::Tape& tape, InsurancePolicy& policy,
                                            const LobProfitCube& cube,
                                            const std::vector<int>& idx);

struct InsuranceRollout {
    Eigen::VectorXd reward;                 // [n_scen]
    std::vector<Eigen::MatrixXd> controls;  // per decision date, [n_scen x 3]
};

// Forward-only rollout over the whole cube, evaluated in chunks.
InsuranceRollout rollout_insurance(InsurancePolicy& policy, const LobProfitCube& cube,
                                   int chunk = 8192);

// Exact-penalty training of the neural policy on the given scenario cube.
TrainResult train_insurance(InsurancePolicy& policy, const LobProfitCube& cube,
                            const TrainConfig& config);

enum class StaticInsuranceKind { Constant, FixedProfile };

// Scenario-independent benchmark: a single volume vector held at every date
// (Constant) or one volume vector per date (FixedProfile).
struct StaticInsurancePolicy {
    StaticInsuranceKind kind = StaticInsuranceKind::Constant;
    Eigen::MatrixXd controls;  // [n_ctrl x 3]
};

// Multi-start penalized SAA solve over the static controls; keeps the best
// feasible start by mean reward, throws "infeasible" when none qualifies.
StaticInsurancePolicy insurance_saa(StaticInsuranceKind kind, const LobProfitCube& cube,
                                    double K, double kappa, const BoundsSchedule& bounds,
                                    std::uint64_t seed, const SaaOptions& options = {});

RiskReport evaluate_insurance_controls(const LobProfitCube& cube,
                                       const Eigen::MatrixXd& controls, const RiskLevel& level,
                                       std::optional<double> threshold = std::nullopt);

RiskReport evaluate_insurance_policy(InsurancePolicy& policy, const LobProfitCube& cube,
                                     const RiskLevel& level,
                                     std::optional<double> threshold = std::nullopt);

}  // namespace dcvar
