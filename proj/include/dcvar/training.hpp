#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcvar/nn.hpp"
#include "dcvar/rollout.hpp"
#include "dcvar/tape.hpp"

namespace dcvar {

// Adaptive dual state of the exact-penalty scheme.
struct PenaltyState {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double rho1 = 0.003;
    double rho2 = 0.003;
    double ema_violation = 0.0;
    double ema_factor = 0.9;
    double lambda_cap = 50.0;

    void validate() const;
};

// Constraint functional used in the penalty: the deviation form
// g = eta + (1/(1-kappa)) E[(-u-eta)_+] + E[u], or the plain CVaR form
// without the mean term (used for threshold-transfer experiments).
enum class ConstraintForm { DCVaR, CVaR };

struct PenaltyTerms {
    double loss;
    double mean_u;
    double g_hat;
    double violation;  // g_hat - K
};

PenaltyTerms penalized_loss(const std::vector<double>& utilities, double eta, double kappa,
                            double K, double lambda1, double lambda2,
                            ConstraintForm form = ConstraintForm::DCVaR);

// Tape counterpart; returns (loss, g_hat) scalars.
struct PenaltyVars {
    ad::Var loss;
    ad::Var mean_u;
    ad::Var g_hat;
};
PenaltyVars penalized_loss_tape(ad::Tape& tape, ad::Var utilities, ad::Var eta, double kappa,
                                double K, double lambda1, double lambda2,
                                ConstraintForm form = ConstraintForm::DCVaR);

// lambda1 <- clamp([lambda1 + rho1 vbar]_+), lambda2 <- clamp([lambda2 + rho2 vbar^2]_+)
// with vbar the EMA of the violation.
PenaltyState dual_update(PenaltyState state, double violation);

// Subgradient descent on g(., eta) in eta with everything else fixed.
double eta_inner_steps(const std::vector<double>& utilities, double eta, double kappa,
                       int n_steps, double lr);

struct TrainConfig {
    double K = 30.0;
    double kappa = 0.99;
    int epochs = 200;
    int minibatch = 5000;
    // phase fractions of the epoch budget; remainder is the full-batch phase
    double warmup_frac = 0.05;
    double adaptive_frac = 0.65;
    double stabilization_frac = 0.2;
    double delta = 0.0;  // frontier tightening: trains against K - delta
    int eta_inner = 0;
    double eta_inner_lr = 0.05;
    UtilityKind utility = UtilityKind::Identity;
    double lr = 1e-3;
    double eta_lr = 1e-4;
    double lr_decay_final = 0.1;  // lr factor at the last epoch
    double weight_decay = 0.0;
    double clip_norm = 5.0;
    PenaltyState penalty;
    ConstraintForm form = ConstraintForm::DCVaR;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch;
    double mean_u;
    double g_hat;
    double lambda1;
    double lambda2;
    double eta;
};

// A differentiable simulation model producing per-path utilities.
class TrainableModel {
  public:
    virtual ~TrainableModel() = default;
    virtual std::vector<TensorParam*> params() = 0;
    virtual int sample_size() const = 0;
    virtual void begin_epoch(int /*epoch*/) {}
    // utilities U(terminal outcome) for the given path subset, [B x 1]
    virtual ad::Var utilities(ad::Tape& tape, const std::vector<int>& idx) = 0;
    // forward-only utilities over the whole current sample
    virtual std::vector<double> utilities_all() = 0;
};

// The financial neural policy wrapped as a trainable model over a fixed
// scenario batch.
class NeuralFinanceModel : public TrainableModel {
  public:
    NeuralFinanceModel(FinancialPolicy& policy, const ReturnBatch& returns, double v0,
                       UtilityKind utility = UtilityKind::Identity)
        : policy_(policy), returns_(returns), v0_(v0), utility_(utility) {}

    std::vector<TensorParam*> params() override { return policy_.params(); }
    int sample_size() const override { return returns_.n_paths; }
    ad::Var utilities(ad::Tape& tape, const std::vector<int>& idx) override;
    std::vector<double> utilities_all() override;

  private:
    FinancialPolicy& policy_;
    const ReturnBatch& returns_;
    double v0_;
    UtilityKind utility_;
};

struct TrainResult {
    double eta = 0.0;
    PenaltyState penalty;
    std::vector<EpochStats> history;
};

// Algorithm: four-phase minibatch training of the penalized objective with
// adaptive duals, EMA-smoothed violation, and a two-timescale eta update.
TrainResult train(TrainableModel& model, const TrainConfig& config);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace dcvar
