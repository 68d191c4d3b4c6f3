#include "dcvar/insurance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dcvar/rng.hpp"

namespace dcvar {

namespace {
using Mat = Eigen::MatrixXd;
}

Eigen::VectorXd BoundsSchedule::lower_at(int s) const {
    if (s < 0 || s >= n_ctrl()) throw std::out_of_range("decision date out of range");
    return lower.row(s).transpose();
}

Eigen::VectorXd BoundsSchedule::upper_at(int s) const {
    if (s < 0 || s >= n_ctrl()) throw std::out_of_range("decision date out of range");
    return upper.row(s).transpose();
}

void BoundsSchedule::validate() const {
    if (lower.rows() < 1 || lower.cols() != 3 || upper.rows() != lower.rows() ||
        upper.cols() != 3)
        throw std::invalid_argument("bounds must be n_ctrl x 3");
    for (int s = 0; s < n_ctrl(); ++s)
        for (int j = 0; j < 3; ++j) {
            if (!std::isfinite(lower(s, j)) || lower(s, j) < 0.0)
                throw std::invalid_argument("lower bounds must be finite and nonnegative");
            if (upper(s, j) < lower(s, j))
                throw std::invalid_argument("upper bound below lower bound");
        }
}

BoundsSchedule BoundsSchedule::long_only(int n_ctrl) {
    BoundsSchedule b;
    b.lower = Mat::Zero(n_ctrl, 3);
    b.upper = Mat::Constant(n_ctrl, 3, kUnbounded);
    b.validate();
    return b;
}

BoundsSchedule BoundsSchedule::constant_box(int n_ctrl) {
    BoundsSchedule b;
    b.lower.resize(n_ctrl, 3);
    b.upper.resize(n_ctrl, 3);
    for (int s = 0; s < n_ctrl; ++s) {
        b.lower.row(s) << 0.6, 0.9, 0.6;
        b.upper.row(s) << 30.0, 10.0, 5.0;
    }
    b.validate();
    return b;
}

BoundsSchedule BoundsSchedule::time_box() {
    BoundsSchedule b;
    b.lower.resize(5, 3);
    b.upper.resize(5, 3);
    b.lower << 0.8, 0.8, 0.6,  //
        0.6, 0.6, 0.4,         //
        0.4, 0.4, 0.2,         //
        0.2, 0.2, 0.0,         //
        0.0, 0.0, 0.0;
    b.upper << 2.0, 2.0, 2.0,  //
        4.0, 4.0, 4.0,         //
        6.0, 6.0, 6.0,         //
        8.0, 8.0, 8.0,         //
        10.0, 10.0, 10.0;
    b.validate();
    return b;
}

InsurancePolicy InsurancePolicy::init(const BoundsSchedule& bounds, std::uint64_t seed,
                                      InsurancePolicySpec spec) {
    bounds.validate();
    if (spec.n_uw < 1 || spec.hidden < 1)
        throw std::invalid_argument("bad insurance policy spec");
    InsurancePolicy p;
    p.spec_ = spec;
    p.bounds_ = bounds;
    GruSpec gs;
    gs.input_dim = spec.input_dim();
    gs.hidden_dim = spec.hidden;
    p.gru_ = GruCell::init(gs, stream_seed(seed, 0x696e7367ULL), "ins_gru");
    MlpSpec ms;
    ms.input_dim = spec.hidden;
    ms.hidden_dims = spec.head_hidden;
    ms.output_dim = 3;
    ms.residual = true;
    p.head_ = Mlp::init(ms, stream_seed(seed, 0x696e7368ULL), "ins_head");
    return p;
}

std::vector<TensorParam*> InsurancePolicy::params() {
    std::vector<TensorParam*> out = gru_.params();
    for (auto* p : head_.params()) out.push_back(p);
    return out;
}

namespace {

// Feature scaling keeps GRU pre-activations O(1): volumes can reach 30 and the
// cumulative discounted reward reaches a few tens.
constexpr double kAlphaScale = 0.1;
constexpr double kRewardScale = 1.0 / 30.0;

// Discounted per-unit reward coefficients over a scenario subset. The profit
// of cohort i in development year d lands in calendar year i + d and carries
// discount v^{i+d}; it becomes known at time i + d, so the decision taken at
// time i_dec only sees years i' + d <= i_dec - 1.
struct SubsetCoeffs {
    Mat r_if;                     // [B x 1] total discounted in-force reward
    std::vector<Mat> c_full;      // per decision s: [B x 3] full coefficients
    std::vector<Mat> cum_if;      // per decision s: [B x 1] realized in-force part
    std::vector<std::vector<Mat>> part;  // part[s'][s]: realized share of decision s'
};

SubsetCoeffs subset_coeffs(const LobProfitCube& cube, const std::vector<int>& idx) {
    const int B = static_cast<int>(idx.size());
    const int n0 = cube.n0;
    const int n_ctrl = cube.n_uw - cube.n0;
    const int n = cube.n_years;
    const double v = cube.v;

    std::vector<double> disc(n + cube.n_uw + 1, 1.0);
    for (std::size_t t = 1; t < disc.size(); ++t) disc[t] = disc[t - 1] * v;

    SubsetCoeffs out;
    out.r_if = Mat::Zero(B, 1);
    out.c_full.assign(n_ctrl, Mat::Zero(B, 3));
    out.cum_if.assign(n_ctrl, Mat::Zero(B, 1));
    out.part.assign(n_ctrl, std::vector<Mat>(n_ctrl, Mat()));

    for (int b = 0; b < B; ++b) {
        const int k = idx[b];
        for (int i = 0; i < n0; ++i)
            for (int d = 1; d + i <= n; ++d) {
                double y = disc[i + d] * (cube.alpha_if_m * cube.xm[cube.idx(k, i, d)] +
                                          cube.alpha_if_l * cube.xl[cube.idx(k, i, d)]);
                out.r_if(b, 0) += y;
                for (int s = 0; s < n_ctrl; ++s)
                    if (i + d <= n0 + s - 1) out.cum_if[s](b, 0) += y;
            }
        for (int s = 0; s < n_ctrl; ++s) {
            const int i = n0 + s;
            for (int d = 1; d + i <= n; ++d) {
                double w = disc[i + d];
                out.c_full[s](b, 0) += w * cube.xm[cube.idx(k, i, d)];
                out.c_full[s](b, 1) += w * cube.xl[cube.idx(k, i, d)];
                out.c_full[s](b, 2) += w * cube.xc[cube.idx(k, i, d)];
            }
        }
    }
    for (int sp = 0; sp < n_ctrl; ++sp)
        for (int s = sp + 2; s < n_ctrl; ++s) {
            const int i = n0 + sp;
            const int d_lim = std::min(n - i, s - 1 - sp);
            Mat m = Mat::Zero(B, 3);
            for (int b = 0; b < B; ++b) {
                const int k = idx[b];
                for (int d = 1; d <= d_lim; ++d) {
                    double w = disc[i + d];
                    m(b, 0) += w * cube.xm[cube.idx(k, i, d)];
                    m(b, 1) += w * cube.xl[cube.idx(k, i, d)];
                    m(b, 2) += w * cube.xc[cube.idx(k, i, d)];
                }
            }
            out.part[sp][s] = std::move(m);
        }
    return out;
}

Mat subset_surv_col(const LobProfitCube& cube, Lob lob, const std::vector<int>& idx,
                    int cohort, int t) {
    Mat col(idx.size(), 1);
    const auto& src = lob == Lob::Mortality ? cube.sm : cube.sl;
    for (std::size_t b = 0; b < idx.size(); ++b)
        col(b, 0) = src[cube.sidx(idx[b], cohort, t)];
    return col;
}

void check_policy_cube(const InsurancePolicy& policy, const LobProfitCube& cube) {
    if (policy.spec().n_uw != cube.n_uw)
        throw std::invalid_argument("policy underwriting horizon does not match the cube");
    if (policy.bounds().n_ctrl() != cube.n_uw - cube.n0)
        throw std::invalid_argument("bounds schedule does not match the cube decision dates");
}

}  // namespace

InsuranceRolloutVars rollout_insurance_tape(ad::Tape& t, InsurancePolicy& policy,
                                            const LobProfitCube& cube,
                                            const std::vector<int>& idx) {
    check_policy_cube(policy, cube);
    if (idx.empty()) throw std::invalid_argument("empty scenario subset");
    for (int k : idx)
        if (k < 0 || k >= cube.n_scen) throw std::out_of_range("scenario index out of range");

    const int B = static_cast<int>(idx.size());
    const int A = cube.n_uw;
    const int n0 = cube.n0;
    const int n_ctrl = A - n0;
    SubsetCoeffs cf = subset_coeffs(cube, idx);

    ad::Var h = t.constant(Mat::Zero(B, policy.spec().hidden));
    ad::Var zero_col = t.constant(Mat::Zero(B, 1));
    std::vector<ad::Var> alphas;

    for (int s = 0; s < n_ctrl; ++s) {
        const int i_dec = n0 + s;
        std::vector<ad::Var> feats;
        feats.push_back(
            t.constant(Mat::Constant(B, 1, static_cast<double>(s) / n_ctrl)));

        ad::Var cum = t.constant(cf.cum_if[s]);
        for (int sp = 0; sp + 2 <= s; ++sp)
            cum = t.add(cum, t.rowsum(t.mul_elem_const(alphas[sp], cf.part[sp][s])));
        feats.push_back(t.scale(cum, kRewardScale));

        for (int j = 0; j < 3; ++j)
            feats.push_back(s == 0 ? zero_col
                                   : t.scale(t.cols(alphas[s - 1], j, 1), kAlphaScale));

        for (Lob lob : {Lob::Mortality, Lob::Longevity}) {
            const int col = lob == Lob::Mortality ? 0 : 1;
            const double a_if = lob == Lob::Mortality ? cube.alpha_if_m : cube.alpha_if_l;
            for (int c = 0; c < A; ++c) {
                if (c < n0) {
                    feats.push_back(t.constant(
                        kAlphaScale * a_if * subset_surv_col(cube, lob, idx, c, i_dec)));
                } else if (c - n0 < s) {
                    Mat frac = subset_surv_col(cube, lob, idx, c, i_dec);
                    feats.push_back(t.scale(
                        t.mul_elem_const(t.cols(alphas[c - n0], col, 1), frac),
                        kAlphaScale));
                } else {
                    feats.push_back(zero_col);
                }
            }
        }

        if (policy.spec().cohort_mask)
            for (int c = 0; c < A; ++c) {
                bool active = c < n0 || c - n0 < s;
                feats.push_back(t.constant(Mat::Constant(B, 1, active ? 1.0 : 0.0)));
            }

        ad::Var f = t.hconcat(feats);
        h = policy.gru().step(t, h, f);
        ad::Var raw = policy.head().forward(t, h);
        alphas.push_back(
            box_project(t, raw, policy.bounds().lower_at(s), policy.bounds().upper_at(s)));
    }

    ad::Var reward = t.constant(cf.r_if);
    for (int s = 0; s < n_ctrl; ++s)
        reward = t.add(reward, t.rowsum(t.mul_elem_const(alphas[s], cf.c_full[s])));
    return {reward, std::move(alphas)};
}

InsuranceRollout rollout_insurance(InsurancePolicy& policy, const LobProfitCube& cube,
                                   int chunk) {
    check_policy_cube(policy, cube);
    if (chunk < 1) throw std::invalid_argument("chunk must be >= 1");
    const int n_ctrl = cube.n_uw - cube.n0;
    InsuranceRollout out;
    out.reward.resize(cube.n_scen);
    out.controls.assign(n_ctrl, Mat(cube.n_scen, 3));

    for (int start = 0; start < cube.n_scen; start += chunk) {
        const int stop = std::min(start + chunk, cube.n_scen);
        std::vector<int> idx(stop - start);
        for (int k = start; k < stop; ++k) idx[k - start] = k;
        ad::Tape t;
        auto vars = rollout_insurance_tape(t, policy, cube, idx);
        out.reward.segment(start, stop - start) = t.val(vars.reward).col(0);
        for (int s = 0; s < n_ctrl; ++s)
            out.controls[s].middleRows(start, stop - start) = t.val(vars.controls[s]);
    }
    return out;
}

namespace {

class NeuralInsuranceModel : public TrainableModel {
  public:
    NeuralInsuranceModel(InsurancePolicy& policy, const LobProfitCube& cube)
        : policy_(policy), cube_(cube) {}

    std::vector<TensorParam*> params() override { return policy_.params(); }
    int sample_size() const override { return cube_.n_scen; }

    ad::Var utilities(ad::Tape& t, const std::vector<int>& idx) override {
        return rollout_insurance_tape(t, policy_, cube_, idx).reward;
    }

    std::vector<double> utilities_all() override {
        auto roll = rollout_insurance(policy_, cube_);
        return {roll.reward.data(), roll.reward.data() + roll.reward.size()};
    }

  private:
    InsurancePolicy& policy_;
    const LobProfitCube& cube_;
};

// SAA model over scenario-independent controls: a single raw row (Constant,
// projected into the intersection box of all dates) or one raw block per date.
class StaticInsuranceModel : public TrainableModel {
  public:
    StaticInsuranceModel(StaticInsuranceKind kind, const LobProfitCube& cube,
                         const BoundsSchedule& bounds, TensorParam raw)
        : kind_(kind), cube_(cube), bounds_(bounds), raw_(std::move(raw)) {
        const int n_ctrl = cube.n_uw - cube.n0;
        std::vector<int> all(cube.n_scen);
        for (int k = 0; k < cube.n_scen; ++k) all[k] = k;
        coeffs_ = subset_coeffs(cube, all);
        if (kind_ == StaticInsuranceKind::Constant) {
            l_int_ = bounds_.lower.colwise().maxCoeff().transpose();
            u_int_ = bounds_.upper.colwise().minCoeff().transpose();
            for (int j = 0; j < 3; ++j)
                if (l_int_(j) > u_int_(j))
                    throw std::invalid_argument(
                        "constant policy infeasible: empty bounds intersection");
        }
        (void)n_ctrl;
    }

    std::vector<TensorParam*> params() override { return {&raw_}; }
    int sample_size() const override { return cube_.n_scen; }

    ad::Var utilities(ad::Tape& t, const std::vector<int>& idx) override {
        const int n_ctrl = cube_.n_uw - cube_.n0;
        const int B = static_cast<int>(idx.size());
        Mat r_if(B, 1);
        for (int b = 0; b < B; ++b) r_if(b, 0) = coeffs_.r_if(idx[b], 0);
        ad::Var reward = t.constant(r_if);
        ad::Var raw = t.param(raw_);
        for (int s = 0; s < n_ctrl; ++s) {
            Mat c(B, 3);
            for (int b = 0; b < B; ++b) c.row(b) = coeffs_.c_full[s].row(idx[b]);
            ad::Var w = kind_ == StaticInsuranceKind::Constant
                            ? box_project(t, raw, l_int_, u_int_)
                            : box_project(t, t.cols(raw, 3 * s, 3), bounds_.lower_at(s),
                                          bounds_.upper_at(s));
            reward = t.add(reward, t.matmul_const(c, t.transpose(w)));
        }
        return reward;
    }

    std::vector<double> utilities_all() override {
        auto agg = aggregate_lob(cube_, controls());
        return agg.reward;
    }

    Eigen::MatrixXd controls() const {
        const int n_ctrl = cube_.n_uw - cube_.n0;
        ad::Tape t;
        TensorParam raw = raw_;
        Mat out(n_ctrl, 3);
        for (int s = 0; s < n_ctrl; ++s) {
            ad::Var w = kind_ == StaticInsuranceKind::Constant
                            ? box_project(t, t.param(raw), l_int_, u_int_)
                            : box_project(t, t.cols(t.param(raw), 3 * s, 3),
                                          bounds_.lower_at(s), bounds_.upper_at(s));
            out.row(s) = t.val(w).row(0);
        }
        return out;
    }

  private:
    StaticInsuranceKind kind_;
    const LobProfitCube& cube_;
    BoundsSchedule bounds_;
    TensorParam raw_;
    SubsetCoeffs coeffs_;
    Eigen::VectorXd l_int_, u_int_;
};

}  // namespace

TrainResult train_insurance(InsurancePolicy& policy, const LobProfitCube& cube,
                            const TrainConfig& config) {
    check_policy_cube(policy, cube);
    NeuralInsuranceModel model(policy, cube);
    return train(model, config);
}

StaticInsurancePolicy insurance_saa(StaticInsuranceKind kind, const LobProfitCube& cube,
                                    double K, double kappa, const BoundsSchedule& bounds,
                                    std::uint64_t seed, const SaaOptions& options) {
    bounds.validate();
    if (bounds.n_ctrl() != cube.n_uw - cube.n0)
        throw std::invalid_argument("bounds schedule does not match the cube decision dates");
    const int raw_dim = kind == StaticInsuranceKind::Constant ? 3 : 3 * bounds.n_ctrl();
    const RiskLevel level(kappa);

    bool have_best = false;
    StaticInsurancePolicy best;
    best.kind = kind;
    double best_mean = -std::numeric_limits<double>::infinity();
    double best_risk = std::numeric_limits<double>::infinity();

    auto run_start = [&](const Mat& raw0, int s) {
        StaticInsuranceModel model(kind, cube, bounds, TensorParam("ins_static_raw", raw0));

        TrainConfig cfg;
        cfg.K = K;
        cfg.kappa = kappa;
        cfg.epochs = options.epochs;
        cfg.minibatch = options.minibatch;
        cfg.lr = options.lr;
        cfg.eta_lr = options.lr * 0.1;
        cfg.form = options.form;
        cfg.seed = stream_seed(seed, 0x6f707400ULL + s);
        cfg.penalty.rho1 = 0.02;
        cfg.penalty.rho2 = 0.02;
        train(model, cfg);

        Eigen::MatrixXd controls = model.controls();
        RiskReport rep = evaluate_insurance_controls(cube, controls, level);
        double risk = options.form == ConstraintForm::DCVaR ? rep.dcvar_k : rep.cvar_k;
        bool feasible = !std::isfinite(K) || risk <= K + options.feasibility_tol;
        if (!feasible) return;
        if (!have_best || rep.mean > best_mean ||
            (rep.mean == best_mean && risk < best_risk)) {
            have_best = true;
            best.controls = controls;
            best_mean = rep.mean;
            best_risk = risk;
        }
    };

    for (int s = 0; s < options.n_starts; ++s) {
        GaussianStream g(stream_seed(seed, 0x73616173ULL + s));
        Mat raw0(1, raw_dim);
        // start near the conservative corner of the box: approaching the risk
        // bound from the feasible side avoids saturating the projection while
        // the duals adapt
        for (int j = 0; j < raw_dim; ++j) raw0(0, j) = -2.0 + 0.3 * g.next();
        run_start(raw0, s);
    }

    // A date-varying profile generalizes a constant one, but the larger raw
    // space can strand every random start in a worse basin. Add one start
    // warm-started from the constant solution (inverse of box_project).
    if (kind == StaticInsuranceKind::FixedProfile) {
        StaticInsurancePolicy cpol =
            insurance_saa(StaticInsuranceKind::Constant, cube, K, kappa, bounds, seed, options);
        Mat raw0(1, raw_dim);
        for (int s = 0; s < bounds.n_ctrl(); ++s) {
            Eigen::VectorXd lo = bounds.lower_at(s), up = bounds.upper_at(s);
            for (int j = 0; j < 3; ++j) {
                double x = cpol.controls(s, j);
                double r;
                if (std::isfinite(up(j))) {
                    double f = (x - lo(j)) / (up(j) - lo(j));
                    f = std::clamp(f, 1e-6, 1.0 - 1e-6);
                    r = std::log(f / (1.0 - f));
                } else {
                    r = std::log(std::expm1(std::max(x - lo(j), 1e-9)));
                }
                raw0(0, 3 * s + j) = r;
            }
        }
        run_start(raw0, options.n_starts);
    }

    if (!have_best) throw std::runtime_error("infeasible: no SAA start met the risk bound");
    return best;
}

RiskReport evaluate_insurance_controls(const LobProfitCube& cube,
                                       const Eigen::MatrixXd& controls, const RiskLevel& level,
                                       std::optional<double> threshold) {
    auto agg = aggregate_lob(cube, controls);
    std::vector<double> losses(agg.reward.size());
    for (std::size_t i = 0; i < losses.size(); ++i) losses[i] = -agg.reward[i];
    return build_risk_report(LossSample(std::move(losses)), level, 0.0, threshold);
}

RiskReport evaluate_insurance_policy(InsurancePolicy& policy, const LobProfitCube& cube,
                                     const RiskLevel& level, std::optional<double> threshold) {
    auto roll = rollout_insurance(policy, cube);
    std::vector<double> losses(roll.reward.size());
    for (Eigen::Index i = 0; i < roll.reward.size(); ++i) losses[i] = -roll.reward(i);
    return build_risk_report(LossSample(std::move(losses)), level, 0.0, threshold);
}

}  // namespace dcvar
