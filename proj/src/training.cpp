#include "dcvar/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dcvar/risk.hpp"
#include "dcvar/rng.hpp"

namespace dcvar {

void PenaltyState::validate() const {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("duals must be >= 0");
    if (lambda1 > lambda_cap || lambda2 > lambda_cap)
        throw std::invalid_argument("duals exceed cap");
    if (!(ema_factor >= 0.0 && ema_factor < 1.0))
        throw std::invalid_argument("ema_factor must lie in [0,1)");
}

void TrainConfig::validate() const {
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0,1)");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
    if (warmup_frac + adaptive_frac + stabilization_frac > 1.0 + 1e-12)
        throw std::invalid_argument("phase fractions must sum to <= 1");
    if (delta < 0.0) throw std::invalid_argument("delta must be >= 0");
    // K = +inf disables the constraint (plain mean maximization)
    if (std::isnan(K) || K == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("K must be finite or +inf");
    penalty.validate();
}

PenaltyTerms penalized_loss(const std::vector<double>& utilities, double eta, double kappa,
                            double K, double lambda1, double lambda2, ConstraintForm form) {
    if (utilities.empty()) throw std::invalid_argument("empty utilities");
    double mean_u = 0.0, hinge = 0.0;
    for (double u : utilities) {
        mean_u += u;
        hinge += std::max(-u - eta, 0.0);
    }
    mean_u /= utilities.size();
    hinge /= utilities.size();
    double g = eta + hinge / (1.0 - kappa);
    if (form == ConstraintForm::DCVaR) g += mean_u;
    double v = g - K;
    double vp = std::max(v, 0.0);
    return {-mean_u + lambda1 * vp + lambda2 * vp * vp, mean_u, g, v};
}

PenaltyVars penalized_loss_tape(ad::Tape& t, ad::Var utilities, ad::Var eta, double kappa,
                                double K, double lambda1, double lambda2,
                                ConstraintForm form) {
    ad::Var mean_u = t.mean_all(utilities);
    ad::Var hinge = t.mean_all(t.relu(t.sub_scalar(t.neg(utilities), eta)));
    ad::Var g = t.add(eta, t.scale(hinge, 1.0 / (1.0 - kappa)));
    if (form == ConstraintForm::DCVaR) g = t.add(g, mean_u);
    ad::Var vp = t.relu(t.add_const(g, -K));
    ad::Var loss = t.add(t.neg(mean_u),
                         t.add(t.scale(vp, lambda1), t.scale(t.mul(vp, vp), lambda2)));
    return {loss, mean_u, g};
}

PenaltyState dual_update(PenaltyState state, double violation) {
    state.ema_violation =
        state.ema_factor * state.ema_violation + (1.0 - state.ema_factor) * violation;
    double v = state.ema_violation;
    state.lambda1 = std::clamp(state.lambda1 + state.rho1 * v, 0.0, state.lambda_cap);
    state.lambda2 = std::clamp(state.lambda2 + state.rho2 * v * v, 0.0, state.lambda_cap);
    return state;
}

double eta_inner_steps(const std::vector<double>& utilities, double eta, double kappa,
                       int n_steps, double lr) {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    const double inv = 1.0 / (1.0 - kappa);
    for (int s = 0; s < n_steps; ++s) {
        double tail = 0.0;
        for (double u : utilities)
            if (-u > eta) tail += 1.0;
        tail /= utilities.size();
        double grad = 1.0 - inv * tail;  // subgradient 0 chosen at the kink
        eta -= lr * grad;
    }
    return eta;
}

ad::Var NeuralFinanceModel::utilities(ad::Tape& tape, const std::vector<int>& idx) {
    ad::Var wealth = rollout_tape(tape, policy_, returns_, v0_, idx);
    return apply_utility(tape, wealth, utility_);
}

std::vector<double> NeuralFinanceModel::utilities_all() {
    WealthPaths paths = rollout(policy_, returns_, v0_);
    std::vector<double> out(returns_.n_paths);
    for (int m = 0; m < returns_.n_paths; ++m)
        out[m] = apply_utility(paths.wealth(m, returns_.n_steps), utility_);
    return out;
}

namespace {

enum class Phase { Warmup, Adaptive, Stabilization, FullBatch };

Phase phase_of(int epoch, const TrainConfig& c) {
    double f = c.epochs > 0 ? static_cast<double>(epoch) / c.epochs : 0.0;
    if (f < c.warmup_frac) return Phase::Warmup;
    if (f < c.warmup_frac + c.adaptive_frac) return Phase::Adaptive;
    if (f < c.warmup_frac + c.adaptive_frac + c.stabilization_frac)
        return Phase::Stabilization;
    return Phase::FullBatch;
}

}  // namespace

TrainResult train(TrainableModel& model, const TrainConfig& config) {
    config.validate();
    TrainResult result;
    result.penalty = config.penalty;
    if (config.epochs == 0) return result;

    auto params = model.params();
    TensorParam eta_param("eta", Eigen::MatrixXd::Zero(1, 1));
    eta_param.weight_decay = false;
    eta_param.lr_scale = config.eta_lr / config.lr;

    // initialize eta at the empirical quantile of the initial policy's losses
    model.begin_epoch(0);
    {
        auto u = model.utilities_all();
        std::vector<double> losses(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) losses[i] = -u[i];
        eta_param.value(0, 0) = empirical_var(LossSample(losses), RiskLevel(config.kappa));
    }

    AdamW::Config acfg;
    acfg.lr = config.lr;
    acfg.weight_decay = config.weight_decay;
    AdamW opt(acfg);

    std::vector<TensorParam*> all_params = params;
    all_params.push_back(&eta_param);

    PenaltyState state = config.penalty;
    const double k_train = config.K - config.delta;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0) model.begin_epoch(epoch);
        const Phase phase = phase_of(epoch, config);
        const int M = model.sample_size();

        double decay_t = config.epochs > 1
                             ? static_cast<double>(epoch) / (config.epochs - 1)
                             : 0.0;
        opt.set_lr_factor(std::pow(config.lr_decay_final, decay_t));

        std::vector<int> order(M);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(stream_seed(config.seed, 0x7261696eULL + epoch));
        std::shuffle(order.begin(), order.end(), rng);

        const int batch_size = phase == Phase::FullBatch ? M : std::min(config.minibatch, M);
        for (int start = 0; start + batch_size <= M; start += batch_size) {
            std::vector<int> idx(order.begin() + start, order.begin() + start + batch_size);
            ad::Tape tape;
            ad::Var u = model.utilities(tape, idx);
            ad::Var eta = tape.param(eta_param);
            PenaltyVars pv = penalized_loss_tape(tape, u, eta, config.kappa, k_train,
                                                 state.lambda1, state.lambda2, config.form);
            double loss_val = tape.scalar(pv.loss);
            if (!std::isfinite(loss_val)) throw std::runtime_error("training diverged");

            zero_grads(all_params);
            tape.backward(pv.loss);
            clip_gradients(all_params, config.clip_norm);
            opt.step(all_params);

            if (phase == Phase::Adaptive && std::isfinite(k_train))
                state = dual_update(state, tape.scalar(pv.g_hat) - k_train);
        }

        double eta_now = eta_param.value(0, 0);
        auto u_all = model.utilities_all();
        if (config.eta_inner > 0) {
            eta_now = eta_inner_steps(u_all, eta_now, config.kappa, config.eta_inner,
                                      config.eta_inner_lr);
            eta_param.value(0, 0) = eta_now;
        }
        PenaltyTerms full = penalized_loss(u_all, eta_now, config.kappa, config.K,
                                           state.lambda1, state.lambda2, config.form);
        result.history.push_back(
            {epoch, full.mean_u, full.g_hat, state.lambda1, state.lambda2, eta_now});
    }

    result.eta = eta_param.value(0, 0);
    result.penalty = state;
    return result;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "epoch,mean_utility,g_hat,lambda1,lambda2,eta\n");
    for (const auto& h : history)
        std::fprintf(f, "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", h.epoch, h.mean_u, h.g_hat,
                     h.lambda1, h.lambda2, h.eta);
    std::fclose(f);
}

}  // namespace dcvar
