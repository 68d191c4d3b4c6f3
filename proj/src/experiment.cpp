#include "dcvar/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dcvar/rng.hpp"
#include "json.hpp"

namespace dcvar {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- parsing --

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument("unknown config key: " +
                                        (path.empty() ? it.key() : path + "." + it.key()));
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

UtilityKind utility_from(const std::string& name) {
    if (name == "identity") return UtilityKind::Identity;
    if (name == "log") return UtilityKind::Log;
    throw std::invalid_argument("unknown utility: " + name);
}

std::string utility_name(UtilityKind kind) {
    return kind == UtilityKind::Identity ? "identity" : "log";
}

void parse_training(const json& obj, TrainConfig& t, const std::string& path) {
    check_keys(obj,
               {"epochs", "minibatch", "lr", "eta_lr", "lr_decay_final", "weight_decay",
                "clip_norm", "delta", "eta_inner", "eta_inner_lr", "warmup_frac",
                "adaptive_frac", "stabilization_frac", "utility", "lambda1", "lambda2",
                "rho1", "rho2", "lambda_cap", "ema_factor"},
               path);
    read_field(obj, "epochs", t.epochs);
    read_field(obj, "minibatch", t.minibatch);
    read_field(obj, "lr", t.lr);
    read_field(obj, "eta_lr", t.eta_lr);
    read_field(obj, "lr_decay_final", t.lr_decay_final);
    read_field(obj, "weight_decay", t.weight_decay);
    read_field(obj, "clip_norm", t.clip_norm);
    read_field(obj, "delta", t.delta);
    read_field(obj, "eta_inner", t.eta_inner);
    read_field(obj, "eta_inner_lr", t.eta_inner_lr);
    read_field(obj, "warmup_frac", t.warmup_frac);
    read_field(obj, "adaptive_frac", t.adaptive_frac);
    read_field(obj, "stabilization_frac", t.stabilization_frac);
    if (obj.contains("utility")) t.utility = utility_from(obj.at("utility").get<std::string>());
    read_field(obj, "lambda1", t.penalty.lambda1);
    read_field(obj, "lambda2", t.penalty.lambda2);
    read_field(obj, "rho1", t.penalty.rho1);
    read_field(obj, "rho2", t.penalty.rho2);
    read_field(obj, "lambda_cap", t.penalty.lambda_cap);
    read_field(obj, "ema_factor", t.penalty.ema_factor);
}

void parse_saa(const json& obj, SaaOptions& s, const std::string& path) {
    check_keys(obj, {"n_starts", "epochs", "minibatch", "feasibility_tol", "lr"}, path);
    read_field(obj, "n_starts", s.n_starts);
    read_field(obj, "epochs", s.epochs);
    read_field(obj, "minibatch", s.minibatch);
    read_field(obj, "feasibility_tol", s.feasibility_tol);
    read_field(obj, "lr", s.lr);
}

void parse_market(const json& obj, MarketParams& m, const std::string& path) {
    check_keys(obj, {"mu", "vols", "corr", "rate", "horizon_years"}, path);
    if (obj.contains("mu")) {
        auto v = obj.at("mu").get<std::vector<double>>();
        m.mu = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
    }
    if (obj.contains("vols")) {
        auto v = obj.at("vols").get<std::vector<double>>();
        m.vols = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
    }
    if (obj.contains("corr")) {
        auto rows = obj.at("corr").get<std::vector<std::vector<double>>>();
        m.corr.resize(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<Eigen::Index>(rows[i].size()) != m.corr.cols())
                throw std::invalid_argument("config: ragged correlation matrix");
            for (std::size_t j = 0; j < rows[i].size(); ++j) m.corr(i, j) = rows[i][j];
        }
    }
    read_field(obj, "rate", m.rate);
    read_field(obj, "horizon_years", m.horizon_years);
}

void parse_finance(const json& obj, FinanceJob& f) {
    check_keys(obj,
               {"market", "n_steps", "v0", "K", "kappa", "paths_train", "paths_eval",
                "constraints", "strategies", "nn_hidden", "training", "saa"},
               "finance");
    if (obj.contains("market")) parse_market(obj.at("market"), f.market, "finance.market");
    read_field(obj, "n_steps", f.n_steps);
    read_field(obj, "v0", f.v0);
    read_field(obj, "K", f.K);
    read_field(obj, "kappa", f.kappa);
    read_field(obj, "paths_train", f.paths_train);
    read_field(obj, "paths_eval", f.paths_eval);
    read_field(obj, "constraints", f.constraints);
    read_field(obj, "strategies", f.strategies);
    read_field(obj, "nn_hidden", f.nn_hidden);
    if (obj.contains("training")) parse_training(obj.at("training"), f.training, "finance.training");
    if (obj.contains("saa")) parse_saa(obj.at("saa"), f.saa, "finance.saa");
}

void parse_insurance(const json& obj, InsuranceJob& i) {
    check_keys(obj,
               {"if_m", "if_l", "bounds", "strategies", "scen_train", "scen_eval", "K",
                "kappa", "cohort_mask", "exact_cir", "nn_hidden", "training", "saa"},
               "insurance");
    read_field(obj, "if_m", i.if_m);
    read_field(obj, "if_l", i.if_l);
    read_field(obj, "bounds", i.bounds);
    read_field(obj, "strategies", i.strategies);
    read_field(obj, "scen_train", i.scen_train);
    read_field(obj, "scen_eval", i.scen_eval);
    read_field(obj, "K", i.K);
    read_field(obj, "kappa", i.kappa);
    read_field(obj, "cohort_mask", i.cohort_mask);
    read_field(obj, "exact_cir", i.exact_cir);
    read_field(obj, "nn_hidden", i.nn_hidden);
    if (obj.contains("training"))
        parse_training(obj.at("training"), i.training, "insurance.training");
    if (obj.contains("saa")) parse_saa(obj.at("saa"), i.saa, "insurance.saa");
}

// -------------------------------------------------------------- resolving --

json training_json(const TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"minibatch", t.minibatch},
                {"lr", t.lr},
                {"eta_lr", t.eta_lr},
                {"lr_decay_final", t.lr_decay_final},
                {"weight_decay", t.weight_decay},
                {"clip_norm", t.clip_norm},
                {"delta", t.delta},
                {"eta_inner", t.eta_inner},
                {"eta_inner_lr", t.eta_inner_lr},
                {"warmup_frac", t.warmup_frac},
                {"adaptive_frac", t.adaptive_frac},
                {"stabilization_frac", t.stabilization_frac},
                {"utility", utility_name(t.utility)},
                {"lambda1", t.penalty.lambda1},
                {"lambda2", t.penalty.lambda2},
                {"rho1", t.penalty.rho1},
                {"rho2", t.penalty.rho2},
                {"lambda_cap", t.penalty.lambda_cap},
                {"ema_factor", t.penalty.ema_factor}};
}

json saa_json(const SaaOptions& s) {
    return json{{"n_starts", s.n_starts},
                {"epochs", s.epochs},
                {"minibatch", s.minibatch},
                {"feasibility_tol", s.feasibility_tol},
                {"lr", s.lr}};
}

json market_json(const MarketParams& m) {
    std::vector<double> mu(m.mu.data(), m.mu.data() + m.mu.size());
    std::vector<double> vols(m.vols.data(), m.vols.data() + m.vols.size());
    std::vector<std::vector<double>> corr(m.corr.rows());
    for (Eigen::Index i = 0; i < m.corr.rows(); ++i)
        corr[i].assign(m.corr.row(i).begin(), m.corr.row(i).end());
    return json{{"mu", mu},
                {"vols", vols},
                {"corr", corr},
                {"rate", m.rate},
                {"horizon_years", m.horizon_years}};
}

json resolved_json(const ExperimentConfig& c) {
    json f{{"market", market_json(c.finance.market)},
           {"n_steps", c.finance.n_steps},
           {"v0", c.finance.v0},
           {"K", c.finance.K},
           {"kappa", c.finance.kappa},
           {"paths_train", c.finance.paths_train},
           {"paths_eval", c.finance.paths_eval},
           {"constraints", c.finance.constraints},
           {"strategies", c.finance.strategies},
           {"nn_hidden", c.finance.nn_hidden},
           {"training", training_json(c.finance.training)},
           {"saa", saa_json(c.finance.saa)}};
    json i{{"if_m", c.insurance.if_m},
           {"if_l", c.insurance.if_l},
           {"bounds", c.insurance.bounds},
           {"strategies", c.insurance.strategies},
           {"scen_train", c.insurance.scen_train},
           {"scen_eval", c.insurance.scen_eval},
           {"K", c.insurance.K},
           {"kappa", c.insurance.kappa},
           {"cohort_mask", c.insurance.cohort_mask},
           {"exact_cir", c.insurance.exact_cir},
           {"nn_hidden", c.insurance.nn_hidden},
           {"training", training_json(c.insurance.training)},
           {"saa", saa_json(c.insurance.saa)}};
    return json{{"kind", c.kind},
                {"out_dir", c.out_dir},
                {"seeds",
                 {{"scenario", c.seeds.scenario}, {"init", c.seeds.init}, {"eval", c.seeds.eval}}},
                {"finance", f},
                {"insurance", i}};
}

// deterministic stream tags from strings
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// -------------------------------------------------------------- reporting --

struct QuantileRow {
    std::string key;
    double level;
    double loss;
};

void append_quantiles(std::vector<QuantileRow>& out, const std::string& key,
                      std::vector<double> losses) {
    LossSample sample(std::move(losses));
    std::vector<double> levels;
    for (int p = 1; p <= 99; ++p) levels.push_back(p / 100.0);
    levels.push_back(0.995);
    levels.push_back(0.999);
    for (double q : levels)
        out.push_back({key, q, empirical_var(sample, RiskLevel(q))});
}

void write_quantiles_csv(const std::vector<QuantileRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "key,level,loss_quantile\n");
    for (const auto& r : rows)
        std::fprintf(f, "%s,%.10g,%.10g\n", r.key.c_str(), r.level, r.loss);
    std::fclose(f);
}

ConstraintSet constraint_from(const std::string& name) {
    if (name == "LO") return ConstraintSet::long_only();
    if (name == "RC") return ConstraintSet::paper_relative();
    if (name == "NC") return ConstraintSet::unconstrained();
    throw std::invalid_argument("unknown constraint set: " + name);
}

BoundsSchedule bounds_from(const std::string& name) {
    if (name == "LO") return BoundsSchedule::long_only();
    if (name == "CSTB") return BoundsSchedule::constant_box();
    if (name == "TDB") return BoundsSchedule::time_box();
    throw std::invalid_argument("unknown bounds schedule: " + name);
}

std::string if_label(double m, double l) {
    auto one = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", x);
        return std::string(buf);
    };
    return "IF" + one(m) + one(l);
}

std::vector<double> to_losses(const std::vector<double>& outcomes) {
    std::vector<double> losses(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) losses[i] = -outcomes[i];
    return losses;
}

// ------------------------------------------------------------ experiments --

void run_finance(const ExperimentConfig& cfg, ExperimentResult& result,
                 std::vector<QuantileRow>& quantiles) {
    const FinanceJob& job = cfg.finance;
    const RiskLevel level(job.kappa);

    for (int n : job.n_steps) {
        MarketParams mp = job.market;
        mp.n_steps = n;
        mp.validate();
        ReturnBatch train_b = finance_scenarios(cfg, n, false);
        ReturnBatch eval_b = finance_scenarios(cfg, n, true);

        for (const std::string& cname : job.constraints) {
            ConstraintSet cs = constraint_from(cname);
            for (const std::string& strat : job.strategies) {
                const std::uint64_t tag =
                    fnv1a(cname + "/" + strat + "/" + std::to_string(n));
                std::string label;
                RiskReport rep;
                std::vector<double> losses;

                if (strat == "buy_and_hold" || strat == "constant_mix") {
                    StaticKind kind = strat == "buy_and_hold" ? StaticKind::BuyAndHold
                                                              : StaticKind::ConstantMix;
                    label = strat == "buy_and_hold" ? "BH" : "CM";
                    StaticStrategy s =
                        saa_optimize(kind, train_b, job.v0, job.K, job.kappa, cs,
                                     stream_seed(cfg.seeds.init, tag), job.saa);
                    losses = to_losses(static_terminal_wealth(s, eval_b, job.v0));
                    rep = build_risk_report(LossSample(losses), level, job.v0, job.K);
                } else if (strat == "nn") {
                    label = "NN";
                    FinancialPolicy policy =
                        FinancialPolicy::init(mp.n_assets(), cs, job.v0,
                                              stream_seed(cfg.seeds.init, tag), job.nn_hidden);
                    NeuralFinanceModel model(policy, train_b, job.v0, job.training.utility);
                    TrainConfig tc = job.training;
                    tc.K = job.K;
                    tc.kappa = job.kappa;
                    tc.seed = stream_seed(cfg.seeds.init, fnv1a("opt", tag));
                    TrainResult tr = train(model, tc);
                    const std::string stem =
                        cfg.out_dir + "/fin_" + cname + "_" + std::to_string(n);
                    save_params(policy.params(), stem + "_policy.txt");
                    write_history_csv(tr.history, stem + "_history.csv");
                    WealthPaths wp = rollout(policy, eval_b, job.v0);
                    std::vector<double> wealth(eval_b.n_paths);
                    for (int m = 0; m < eval_b.n_paths; ++m)
                        wealth[m] = wp.wealth(m, eval_b.n_steps);
                    losses = to_losses(wealth);
                    rep = build_risk_report(LossSample(losses), level, job.v0, job.K);
                } else {
                    throw std::invalid_argument("unknown finance strategy: " + strat);
                }

                result.finance.push_back(
                    {cname, label, n, rep.mean, rep.dcvar_k, rep.std, rep.sharpe});
                append_quantiles(quantiles, cname + "/" + label + "/" + std::to_string(n),
                                 std::move(losses));
            }
        }
    }
}

void run_insurance(const ExperimentConfig& cfg, ExperimentResult& result,
                   std::vector<QuantileRow>& quantiles) {
    const InsuranceJob& job = cfg.insurance;
    const RiskLevel level(job.kappa);

    LobProfitCube cube_train = insurance_scenarios(cfg, false);
    LobProfitCube cube_eval = insurance_scenarios(cfg, true);
    const std::string if_name = if_label(job.if_m, job.if_l);

    for (const std::string& bname : job.bounds) {
        BoundsSchedule bounds = bounds_from(bname);
        for (const std::string& strat : job.strategies) {
            const std::uint64_t tag = fnv1a(bname + "/" + strat);
            std::string label;
            std::vector<double> train_rewards, eval_rewards;

            if (strat == "const" || strat == "ft") {
                label = strat == "const" ? "Const" : "FT";
                StaticInsuranceKind kind = strat == "const"
                                               ? StaticInsuranceKind::Constant
                                               : StaticInsuranceKind::FixedProfile;
                StaticInsurancePolicy p =
                    insurance_saa(kind, cube_train, job.K, job.kappa, bounds,
                                  stream_seed(cfg.seeds.init, tag), job.saa);
                train_rewards = aggregate_lob(cube_train, p.controls).reward;
                eval_rewards = aggregate_lob(cube_eval, p.controls).reward;
            } else if (strat == "nn") {
                label = "NN";
                InsurancePolicySpec spec;
                spec.n_uw = cube_train.n_uw;
                spec.hidden = job.nn_hidden;
                spec.cohort_mask = job.cohort_mask;
                InsurancePolicy policy =
                    InsurancePolicy::init(bounds, stream_seed(cfg.seeds.init, tag), spec);
                TrainConfig tc = job.training;
                tc.K = job.K;
                tc.kappa = job.kappa;
                tc.seed = stream_seed(cfg.seeds.init, fnv1a("opt", tag));
                TrainResult tr = train_insurance(policy, cube_train, tc);
                const std::string stem = cfg.out_dir + "/ins_" + bname;
                save_params(policy.params(), stem + "_policy.txt");
                write_history_csv(tr.history, stem + "_history.csv");
                auto rt = rollout_insurance(policy, cube_train);
                auto re = rollout_insurance(policy, cube_eval);
                train_rewards.assign(rt.reward.data(), rt.reward.data() + rt.reward.size());
                eval_rewards.assign(re.reward.data(), re.reward.data() + re.reward.size());
            } else {
                throw std::invalid_argument("unknown insurance strategy: " + strat);
            }

            for (const auto& [set_name, rewards] :
                 {std::pair<std::string, const std::vector<double>&>{"train", train_rewards},
                  {"eval", eval_rewards}}) {
                std::vector<double> losses = to_losses(rewards);
                RiskReport rep = build_risk_report(LossSample(losses), level, 0.0, job.K);
                result.insurance.push_back({if_name, bname, label, set_name, rep.mean,
                                            rep.std, rep.dcvar_k, rep.var_k});
                append_quantiles(quantiles,
                                 if_name + "/" + bname + "/" + label + "/" + set_name,
                                 std::move(losses));
            }
        }
    }
}

}  // namespace

ReturnBatch finance_scenarios(const ExperimentConfig& config, int n_steps, bool eval_set) {
    MarketParams mp = config.finance.market;
    mp.n_steps = n_steps;
    mp.validate();
    const std::string tag =
        (eval_set ? "fin-eval-" : "fin-train-") + std::to_string(n_steps);
    const std::uint64_t base = eval_set ? config.seeds.eval : config.seeds.scenario;
    const int n_paths = eval_set ? config.finance.paths_eval : config.finance.paths_train;
    return simulate_returns(mp, n_paths, stream_seed(base, fnv1a(tag)));
}

LobProfitCube insurance_scenarios(const ExperimentConfig& config, bool eval_set) {
    InsuranceSetup setup;
    setup.alpha_if_m = config.insurance.if_m;
    setup.alpha_if_l = config.insurance.if_l;
    setup.exact_cir = config.insurance.exact_cir;
    setup.calibrate();
    const std::uint64_t base = eval_set ? config.seeds.eval : config.seeds.scenario;
    const int n_scen = eval_set ? config.insurance.scen_eval : config.insurance.scen_train;
    return build_profit_cube(setup, n_scen,
                             stream_seed(base, fnv1a(eval_set ? "ins-eval" : "ins-train")));
}

void ExperimentConfig::validate() const {
    if (kind != "finance" && kind != "insurance")
        throw std::invalid_argument("kind must be 'finance' or 'insurance'");
    if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
    if (kind == "finance") {
        if (finance.n_steps.empty()) throw std::invalid_argument("finance.n_steps empty");
        for (int n : finance.n_steps)
            if (n < 1) throw std::invalid_argument("finance.n_steps entries must be >= 1");
        if (finance.paths_train < 1 || finance.paths_eval < 1)
            throw std::invalid_argument("finance path counts must be >= 1");
        for (const auto& c : finance.constraints) constraint_from(c);
    } else {
        if (insurance.scen_train < 1 || insurance.scen_eval < 1)
            throw std::invalid_argument("insurance scenario counts must be >= 1");
        for (const auto& b : insurance.bounds) bounds_from(b);
    }
}

ExperimentConfig parse_config(const std::string& json_text) {
    json obj = json::parse(json_text);
    if (!obj.is_object()) throw std::invalid_argument("config must be a JSON object");
    check_keys(obj, {"kind", "out_dir", "seeds", "finance", "insurance"}, "");

    ExperimentConfig cfg;
    read_field(obj, "kind", cfg.kind);
    read_field(obj, "out_dir", cfg.out_dir);
    if (obj.contains("seeds")) {
        const json& s = obj.at("seeds");
        check_keys(s, {"scenario", "init", "eval"}, "seeds");
        read_field(s, "scenario", cfg.seeds.scenario);
        read_field(s, "init", cfg.seeds.init);
        read_field(s, "eval", cfg.seeds.eval);
    }
    if (obj.contains("finance")) parse_finance(obj.at("finance"), cfg.finance);
    if (obj.contains("insurance")) parse_insurance(obj.at("insurance"), cfg.insurance);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string resolved_config_json(const ExperimentConfig& config) {
    return resolved_json(config).dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    return fnv1a(resolved_config_json(config));
}

void write_finance_csv(const std::vector<FinanceRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "constraint_type,strategy,N,mean,constraint_value,std,sharpe\n");
    for (const auto& r : rows)
        std::fprintf(f, "%s,%s,%d,%.10g,%.10g,%.10g,%.10g\n", r.constraint_type.c_str(),
                     r.strategy.c_str(), r.n_steps, r.mean, r.constraint_value, r.std_dev,
                     r.sharpe);
    std::fclose(f);
}

void write_insurance_csv(const std::vector<InsuranceRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::fprintf(f, "IF,bounds,policy,set,mean,std,dcvar,var99\n");
    for (const auto& r : rows)
        std::fprintf(f, "%s,%s,%s,%s,%.10g,%.10g,%.10g,%.10g\n", r.in_force.c_str(),
                     r.bounds.c_str(), r.policy.c_str(), r.set.c_str(), r.mean, r.std_dev,
                     r.dcvar, r.var99);
    std::fclose(f);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    ExperimentResult result;
    std::vector<QuantileRow> quantiles;
    // out_dir must exist before training: policy checkpoints land there
    if (config.kind == "finance")
        run_finance(config, result, quantiles);
    else
        run_insurance(config, result, quantiles);

    const std::string base = config.out_dir + "/";
    result.results_path = base + "results.csv";
    result.quantiles_path = base + "quantiles.csv";
    result.manifest_path = base + "manifest.json";

    if (config.kind == "finance")
        write_finance_csv(result.finance, result.results_path);
    else
        write_insurance_csv(result.insurance, result.results_path);
    write_quantiles_csv(quantiles, result.quantiles_path);

    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    json manifest{{"config_hash", std::string(hash_buf)},
                  {"seeds",
                   {{"scenario", config.seeds.scenario},
                    {"init", config.seeds.init},
                    {"eval", config.seeds.eval}}},
                  {"config", resolved_json(config)}};
    std::ofstream mf(result.manifest_path);
    if (!mf) throw std::runtime_error("cannot open " + result.manifest_path);
    mf << manifest.dump(2) << "\n";
    return result;
}

}  // namespace dcvar
