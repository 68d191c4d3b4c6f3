#include "dcvar/rollout.hpp"

#include <cmath>
#include <stdexcept>

namespace dcvar {

ConstraintSet ConstraintSet::paper_relative() {
    Eigen::VectorXd lo(4), up(4);
    lo << -1.0, -1.0, -1.0, -1.0;
    up << 0.4, 0.3, 0.4, 1.0;
    return box(lo, up);
}

FinancialPolicy FinancialPolicy::init(int n_assets, const ConstraintSet& cs, double v0,
                                      std::uint64_t seed, const std::vector<int>& hidden,
                                      bool layer_norm) {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = hidden;
    spec.activation = Activation::ReLU;
    spec.layer_norm = layer_norm;
    spec.residual = true;
    spec.output_dim = cs.raw_dim(n_assets);
    FinancialPolicy p;
    p.net = Mlp::init(spec, seed, "policy");
    p.constraints = cs;
    p.v0 = v0;
    return p;
}

Eigen::RowVector2d make_features(double v_n, double v0, int n, int n_steps) {
    if (n < 0 || n >= n_steps) throw std::invalid_argument("step out of range");
    return {v_n / v0, static_cast<double>(n) / n_steps};
}

double wealth_update(double v, const Eigen::RowVectorXd& weights,
                     const Eigen::RowVectorXd& risky_returns, double riskfree) {
    double port = weights(0) * riskfree;
    for (Eigen::Index i = 0; i < risky_returns.size(); ++i)
        port += weights(i + 1) * risky_returns(i);
    return v * port;
}

ad::Var project_weights(ad::Tape& tape, ad::Var raw, const ConstraintSet& cs, int n_assets) {
    switch (cs.kind) {
        case ConstraintKind::LongOnly:
            return tape.softmax_rows(raw);
        case ConstraintKind::Box: {
            ad::Var risky = box_project(tape, raw, cs.lower, cs.upper);
            ad::Var cash = tape.add_const(tape.neg(tape.rowsum(risky)), 1.0);
            return tape.hconcat({cash, risky});
        }
        case ConstraintKind::Unconstrained: {
            ad::Var cash = tape.add_const(tape.neg(tape.rowsum(raw)), 1.0);
            return tape.hconcat({cash, raw});
        }
    }
    throw std::logic_error("unknown constraint kind");
}

Eigen::MatrixXd project_weights_plain(const Eigen::MatrixXd& raw, const ConstraintSet& cs,
                                      int n_assets) {
    // mirrors project_weights; kept in sync by tests
    ad::Tape tape;
    ad::Var r = tape.constant(raw);
    return tape.val(project_weights(tape, r, cs, n_assets));
}

ad::Var apply_utility(ad::Tape& tape, ad::Var wealth, UtilityKind kind) {
    return kind == UtilityKind::Identity ? wealth : tape.log_(wealth);
}

double apply_utility(double wealth, UtilityKind kind) {
    return kind == UtilityKind::Identity ? wealth : std::log(wealth);
}

namespace {

// Per-step gross return matrix [B x (d+1)], col 0 = risk-free.
Eigen::MatrixXd step_returns(const ReturnBatch& r, int step, const std::vector<int>& idx) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), r.n_assets + 1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        m(b, 0) = r.riskfree;
        for (int i = 0; i < r.n_assets; ++i) m(b, i + 1) = r.at(idx[b], step, i);
    }
    return m;
}

}  // namespace

ad::Var rollout_tape(ad::Tape& tape, FinancialPolicy& policy, const ReturnBatch& returns,
                     double v0, const std::vector<int>& path_idx) {
    const int B = static_cast<int>(path_idx.size());
    const int N = returns.n_steps;
    const int d = returns.n_assets;

    ad::Var v = tape.constant(Eigen::MatrixXd::Constant(B, 1, v0));
    Eigen::MatrixXd alive = Eigen::MatrixXd::Ones(B, 1);

    for (int n = 0; n < N; ++n) {
        ad::Var v_feat = tape.scale(v, 1.0 / policy.v0);
        ad::Var t_feat = tape.constant(
            Eigen::MatrixXd::Constant(B, 1, static_cast<double>(n) / N));
        ad::Var features = tape.hconcat({v_feat, t_feat});
        ad::Var raw = policy.net.forward(tape, features);
        ad::Var w = project_weights(tape, raw, policy.constraints, d);
        ad::Var port = tape.rowsum(tape.mul_elem_const(w, step_returns(returns, n, path_idx)));
        ad::Var candidate = tape.mul(v, port);
        if (policy.constraints.kind == ConstraintKind::LongOnly) {
            v = candidate;
        } else {
            // freeze ruined paths at the hitting value
            v = tape.where(alive, candidate, v);
            alive = alive.cwiseProduct(
                (tape.val(candidate).array() > 0.0).cast<double>().matrix());
        }
    }
    return v;
}

WealthPaths rollout(FinancialPolicy& policy, const ReturnBatch& returns, double v0,
                    bool record_weights) {
    const int M = returns.n_paths;
    const int N = returns.n_steps;
    const int d = returns.n_assets;

    WealthPaths out;
    out.wealth.resize(M, N + 1);
    out.wealth.col(0).setConstant(v0);
    out.ruined.assign(M, 0);
    out.ruin_time.assign(M, -1);
    if (record_weights) out.weights.assign(N, Eigen::MatrixXd::Zero(M, d + 1));

    const bool can_ruin = policy.constraints.kind != ConstraintKind::LongOnly;

    // chunked so the scratch tapes stay small
    const int chunk = 16384;
    std::vector<int> idx;
    for (int start = 0; start < M; start += chunk) {
        int B = std::min(chunk, M - start);
        idx.resize(B);
        for (int b = 0; b < B; ++b) idx[b] = start + b;

        Eigen::VectorXd v = Eigen::VectorXd::Constant(B, v0);
        Eigen::VectorXd alive = Eigen::VectorXd::Ones(B);
        for (int n = 0; n < N; ++n) {
            Eigen::MatrixXd features(B, 2);
            features.col(0) = v / policy.v0;
            features.col(1).setConstant(static_cast<double>(n) / N);
            ad::Tape tape;
            ad::Var f = tape.constant(features);
            ad::Var raw = policy.net.forward(tape, f);
            Eigen::MatrixXd w =
                tape.val(project_weights(tape, raw, policy.constraints, d));
            Eigen::MatrixXd rets = step_returns(returns, n, idx);
            Eigen::VectorXd candidate =
                v.array() * (w.array() * rets.array()).rowwise().sum();
            for (int b = 0; b < B; ++b) {
                int m = start + b;
                if (can_ruin && alive(b) == 0.0) {
                    out.wealth(m, n + 1) = v(b);
                    continue;
                }
                v(b) = candidate(b);
                out.wealth(m, n + 1) = v(b);
                if (record_weights) out.weights[n].row(m) = w.row(b);
                if (can_ruin && v(b) <= 0.0) {
                    alive(b) = 0.0;
                    out.ruined[m] = 1;
                    out.ruin_time[m] = n + 1;
                }
            }
        }
    }
    return out;
}

}  // namespace dcvar
