#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace dcvar {

// A sample of loss realizations (loss = -U(terminal outcome)).
// Weights, when present, must be strictly positive and sum to 1.
struct LossSample {
    std::vector<double> values;
    std::vector<double> weights;  // empty => uniform

    LossSample() = default;
    explicit LossSample(std::vector<double> v) : values(std::move(v)) { validate(); }
    LossSample(std::vector<double> v, std::vector<double> w)
        : values(std::move(v)), weights(std::move(w)) {
        validate();
    }

    void validate() const;
    double weight(std::size_t i) const {
        return weights.empty() ? 1.0 / static_cast<double>(values.size()) : weights[i];
    }
};

struct RiskLevel {
    double kappa;
    explicit RiskLevel(double k) : kappa(k) {
        if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("kappa must lie in (0,1)");
    }
};

struct RiskReport {
    double mean = 0.0;       // mean terminal outcome (= -mean loss)
    double std = 0.0;        // std of terminal outcome
    double var_k = 0.0;      // empirical VaR of the loss
    double cvar_k = 0.0;     // empirical CVaR of the loss
    double dcvar_k = 0.0;    // cvar_k - mean loss
    double sharpe = 0.0;     // (mean - initial_value)/std, NaN if std == 0
    double constraint_gap = 0.0;  // dcvar_k - K, NaN when no threshold given
};

// Left-continuous generalized inverse of the empirical CDF:
// smallest value M with cumulative weight >= kappa.
double empirical_var(const LossSample& sample, const RiskLevel& level);

// Exact tail expectation (1/(1-kappa)) * int_kappa^1 VaR_{k'} dk',
// splitting the atom at the quantile fractionally.
double empirical_cvar(const LossSample& sample, const RiskLevel& level);

// DCVaR = CVaR of the centered loss = CVaR - mean loss.
double empirical_dcvar(const LossSample& sample, const RiskLevel& level);

// Rockafellar-Uryasev auxiliary objective at a fixed quantile candidate:
//   g(eta) = eta + (1/(1-kappa)) E[(L - eta)_+] - E[L].
double dcvar_aux(const LossSample& sample, double eta, const RiskLevel& level);

// Minimizes dcvar_aux over eta. Returns the smallest minimizer (the empirical
// VaR) together with the minimum value, which equals empirical_dcvar exactly.
struct EtaSolution {
    double eta_star;
    double dcvar;
};
EtaSolution minimize_eta(const LossSample& sample, const RiskLevel& level);

// Threshold transfer between the CVaR and DCVaR constrained problems.
inline double calibrated_threshold(double K, double mean_utility) { return K + mean_utility; }

RiskReport build_risk_report(const LossSample& sample, const RiskLevel& level,
                             double initial_value,
                             std::optional<double> threshold = std::nullopt);

}  // namespace dcvar
