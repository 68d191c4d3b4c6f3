#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcvar/baselines.hpp"
#include "dcvar/insurance.hpp"
#include "dcvar/market.hpp"
#include "dcvar/training.hpp"

namespace dcvar {

struct SeedConfig {
    std::uint64_t scenario = 1;  // training scenario generation
    std::uint64_t init = 2;      // parameter initialization / optimizer streams
    std::uint64_t eval = 3;      // held-out evaluation scenarios
};

struct FinanceJob {
    MarketParams market = MarketParams::paper_market(4);  // n_steps set per run
    std::vector<int> n_steps = {4};
    double v0 = 100.0;
    double K = 30.0;
    double kappa = 0.99;
    int paths_train = 100000;
    int paths_eval = 100000;
    std::vector<std::string> constraints = {"LO"};  // LO | RC | NC
    std::vector<std::string> strategies = {"buy_and_hold", "constant_mix"};  // + "nn"
    std::vector<int> nn_hidden = {50, 50};
    TrainConfig training;
    SaaOptions saa;
};

struct InsuranceJob {
    double if_m = 0.0, if_l = 0.0;  // in-force volumes (IF00 / IF11)
    std::vector<std::string> bounds = {"CSTB"};  // LO | CSTB | TDB
    std::vector<std::string> strategies = {"const", "ft", "nn"};
    int scen_train = 100000;
    int scen_eval = 100000;
    double K = 30.0;
    double kappa = 0.99;
    bool cohort_mask = false;
    bool exact_cir = false;
    int nn_hidden = 16;
    TrainConfig training;
    SaaOptions saa;

    InsuranceJob() {
        training.epochs = 400;
        training.minibatch = 25000;
        training.delta = 0.3;
        training.eta_inner = 5;
        training.penalty.lambda1 = 5.0;
        training.penalty.lambda2 = 5.0;
    }
};

struct ExperimentConfig {
    std::string kind = "finance";  // finance | insurance
    std::string out_dir = ".";
    SeedConfig seeds;
    FinanceJob finance;
    InsuranceJob insurance;

    void validate() const;
};

// Strict schema: any unrecognized key is rejected with an error naming its
// full path ("unknown config key: ...").
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical dump of the fully resolved configuration (defaults included).
std::string resolved_config_json(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

struct FinanceRow {
    std::string constraint_type;  // LO / RC / NC
    std::string strategy;         // BH / CM / NN
    int n_steps = 0;
    double mean = 0.0, constraint_value = 0.0, std_dev = 0.0, sharpe = 0.0;
};

struct InsuranceRow {
    std::string in_force;  // IF00 / IF11 / ...
    std::string bounds;    // LO / CSTB / TDB
    std::string policy;    // Const / FT / NN
    std::string set;       // train / eval
    double mean = 0.0, std_dev = 0.0, dcvar = 0.0, var99 = 0.0;
};

struct ExperimentResult {
    std::vector<FinanceRow> finance;
    std::vector<InsuranceRow> insurance;
    std::string results_path, manifest_path, quantiles_path;
};

// Scenario batches exactly as used inside run_experiment (train and eval sets
// are disjoint by seed-domain separation).
ReturnBatch finance_scenarios(const ExperimentConfig& config, int n_steps, bool eval_set);
LobProfitCube insurance_scenarios(const ExperimentConfig& config, bool eval_set);

// Full pipeline: scenario generation, baselines/NN training on the train set,
// common evaluation, CSV + quantile dumps + reproducibility manifest.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_finance_csv(const std::vector<FinanceRow>& rows, const std::string& path);
void write_insurance_csv(const std::vector<InsuranceRow>& rows, const std::string& path);

}  // namespace dcvar
