// Command-line driver for the mean-DCVaR portfolio and insurance studies.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dcvar/experiment.hpp"
#include "dcvar/rng.hpp"

namespace {

using namespace dcvar;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int paths = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON experiment configuration");
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed,
                    "base seed (overrides config: scenario=s, init=s+1, eval=s+2)");
    cmd->add_option("--paths", opts.paths, "scenario count (overrides config)");
}

ExperimentConfig resolve(const CommonOpts& opts, const std::string& default_kind) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
    if (cfg.kind.empty()) cfg.kind = default_kind;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) {
        cfg.seeds.scenario = static_cast<std::uint64_t>(opts.seed);
        cfg.seeds.init = static_cast<std::uint64_t>(opts.seed) + 1;
        cfg.seeds.eval = static_cast<std::uint64_t>(opts.seed) + 2;
    }
    if (opts.paths > 0) {
        cfg.finance.paths_train = opts.paths;
        cfg.finance.paths_eval = opts.paths;
        cfg.insurance.scen_train = opts.paths;
        cfg.insurance.scen_eval = opts.paths;
    }
    return cfg;
}

int run_report(ExperimentConfig cfg) {
    auto res = run_experiment(cfg);
    std::cout << "wrote " << res.results_path << "\n"
              << "wrote " << res.quantiles_path << "\n"
              << "wrote " << res.manifest_path << "\n";
    return 0;
}

int run_with_strategies(ExperimentConfig cfg, const std::string& kind, bool neural) {
    cfg.kind = kind;
    auto keep = [&](const std::string& s) { return (s == "nn") == neural; };
    auto& list = kind == "finance" ? cfg.finance.strategies : cfg.insurance.strategies;
    std::vector<std::string> filtered;
    for (const auto& s : list)
        if (keep(s)) filtered.push_back(s);
    if (filtered.empty()) filtered = neural ? std::vector<std::string>{"nn"}
                          : kind == "finance"
                              ? std::vector<std::string>{"buy_and_hold", "constant_mix"}
                              : std::vector<std::string>{"const", "ft"};
    list = filtered;
    return run_report(std::move(cfg));
}

int run_simulate_market(const ExperimentConfig& cfg) {
    MarketParams mp = cfg.finance.market;
    mp.n_steps = cfg.finance.n_steps.at(0);
    mp.validate();
    auto batch = simulate_returns(mp, cfg.finance.paths_train, cfg.seeds.scenario);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/returns.csv";
    dump_returns_csv(batch, path);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int run_insurance_simulate(const ExperimentConfig& cfg) {
    InsuranceSetup setup;
    setup.alpha_if_m = cfg.insurance.if_m;
    setup.alpha_if_l = cfg.insurance.if_l;
    setup.exact_cir = cfg.insurance.exact_cir;
    setup.calibrate();
    auto cube = build_profit_cube(setup, cfg.insurance.scen_train, cfg.seeds.scenario);
    std::filesystem::create_directories(cfg.out_dir);
    export_profit_cube_binary(cube, cfg.out_dir + "/cube.bin");
    export_profit_cube_csv(cube, cfg.out_dir + "/cube.csv");
    std::cout << "wrote " << cfg.out_dir << "/cube.bin\n"
              << "wrote " << cfg.out_dir << "/cube.csv\n";
    return 0;
}

int run_evaluate(const ExperimentConfig& cfg, const std::string& policy_path) {
    const FinanceJob& job = cfg.finance;
    MarketParams mp = job.market;
    mp.n_steps = job.n_steps.at(0);
    mp.validate();
    ConstraintSet cs;
    const std::string cname = job.constraints.at(0);
    if (cname == "LO") cs = ConstraintSet::long_only();
    else if (cname == "RC") cs = ConstraintSet::paper_relative();
    else if (cname == "NC") cs = ConstraintSet::unconstrained();
    else throw std::invalid_argument("unknown constraint set: " + cname);

    FinancialPolicy policy =
        FinancialPolicy::init(mp.n_assets(), cs, job.v0, 0, job.nn_hidden);
    load_params(policy.params(), policy_path);

    auto eval_b = finance_scenarios(cfg, mp.n_steps, true);
    auto wp = rollout(policy, eval_b, job.v0);
    std::vector<double> losses(eval_b.n_paths);
    for (int m = 0; m < eval_b.n_paths; ++m) losses[m] = -wp.wealth(m, eval_b.n_steps);
    RiskReport rep =
        build_risk_report(LossSample(losses), RiskLevel(job.kappa), job.v0, job.K);

    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/evaluate.csv";
    std::vector<FinanceRow> rows{
        {cname, "NN", mp.n_steps, rep.mean, rep.dcvar_k, rep.std, rep.sharpe}};
    write_finance_csv(rows, path);
    std::cout << "wrote " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-period mean-DCVaR optimization: markets and insurance"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string policy_path;

    auto* sim = app.add_subcommand("simulate-market", "generate market scenarios as CSV");
    add_common(sim, opts);
    auto* train_cmd = app.add_subcommand("train", "train the neural financial policy");
    add_common(train_cmd, opts);
    auto* baseline = app.add_subcommand("baseline", "solve the static financial benchmarks");
    add_common(baseline, opts);
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a stored financial policy");
    add_common(evaluate, opts);
    evaluate->add_option("--policy", policy_path, "policy checkpoint file")->required();
    auto* ins_sim = app.add_subcommand("insurance-simulate", "generate the profit cube");
    add_common(ins_sim, opts);
    auto* ins_train = app.add_subcommand("insurance-train", "train the neural underwriting policy");
    add_common(ins_train, opts);
    auto* report = app.add_subcommand("report", "run the configured experiment end to end");
    add_common(report, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate_market(resolve(opts, "finance"));
        if (train_cmd->parsed())
            return run_with_strategies(resolve(opts, "finance"), "finance", true);
        if (baseline->parsed())
            return run_with_strategies(resolve(opts, "finance"), "finance", false);
        if (evaluate->parsed()) return run_evaluate(resolve(opts, "finance"), policy_path);
        if (ins_sim->parsed()) return run_insurance_simulate(resolve(opts, "insurance"));
        if (ins_train->parsed())
            return run_with_strategies(resolve(opts, "insurance"), "insurance", true);
        if (report->parsed()) return run_report(resolve(opts, ""));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
