#include "dcvar/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dcvar {

void LossSample::validate() const {
    if (values.empty()) throw std::invalid_argument("empty sample");
    if (!weights.empty()) {
        if (weights.size() != values.size())
            throw std::invalid_argument("weights size mismatch");
        double total = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw std::invalid_argument("weights must be strictly positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("weights must sum to 1");
    }
}

namespace {

// Indices of the sample sorted by ascending loss value.
std::vector<std::size_t> sorted_order(const LossSample& s) {
    std::vector<std::size_t> idx(s.values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
    return idx;
}

double sample_mean(const LossSample& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) m += s.weight(i) * s.values[i];
    return m;
}

}  // namespace

double empirical_var(const LossSample& sample, const RiskLevel& level) {
    sample.validate();
    auto idx = sorted_order(sample);
    double cum = 0.0;
    for (std::size_t k : idx) {
        cum += sample.weight(k);
        if (cum >= level.kappa - 1e-15) return sample.values[k];
    }
    return sample.values[idx.back()];
}

double empirical_cvar(const LossSample& sample, const RiskLevel& level) {
    sample.validate();
    auto idx = sorted_order(sample);
    const double kappa = level.kappa;
    double cum = 0.0;
    double tail = 0.0;
    for (std::size_t k : idx) {
        double lo = cum;
        cum += sample.weight(k);
        // mass of this atom falling in (kappa, 1]
        double mass = std::min(cum, 1.0) - std::max(kappa, lo);
        if (mass > 0.0) tail += mass * sample.values[k];
    }
    return tail / (1.0 - kappa);
}

double empirical_dcvar(const LossSample& sample, const RiskLevel& level) {
    return empirical_cvar(sample, level) - sample_mean(sample);
}

double dcvar_aux(const LossSample& sample, double eta, const RiskLevel& level) {
    sample.validate();
    double hinge = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < sample.values.size(); ++i) {
        double w = sample.weight(i);
        mean += w * sample.values[i];
        hinge += w * std::max(sample.values[i] - eta, 0.0);
    }
    return eta + hinge / (1.0 - level.kappa) - mean;
}

EtaSolution minimize_eta(const LossSample& sample, const RiskLevel& level) {
    // By RU theory the minimizer set of g is the interval of kappa-quantiles;
    // the smallest minimizer is the left-continuous quantile.
    double eta = empirical_var(sample, level);
    return {eta, dcvar_aux(sample, eta, level)};
}

RiskReport build_risk_report(const LossSample& sample, const RiskLevel& level,
                             double initial_value, std::optional<double> threshold) {
    sample.validate();
    RiskReport r;
    double mean_loss = sample_mean(sample);
    double var = 0.0;
    for (std::size_t i = 0; i < sample.values.size(); ++i) {
        double d = sample.values[i] - mean_loss;
        var += sample.weight(i) * d * d;
    }
    r.mean = -mean_loss;
    r.std = std::sqrt(var);
    r.var_k = empirical_var(sample, level);
    r.cvar_k = empirical_cvar(sample, level);
    r.dcvar_k = r.cvar_k - mean_loss;
    r.sharpe = r.std > 0.0 ? (r.mean - initial_value) / r.std
                           : std::numeric_limits<double>::quiet_NaN();
    r.constraint_gap = threshold ? r.dcvar_k - *threshold
                                 : std::numeric_limits<double>::quiet_NaN();
    return r;
}

}  // namespace dcvar
