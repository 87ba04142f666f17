#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "quitlab/dataset.hpp"
#include "quitlab/eval.hpp"
#include "quitlab/trainer.hpp"

namespace quitlab {

// One experiment description: where the data comes from, the model and
// training setup, and which root seeds to run. All randomness of a run flows
// from one root seed, split per component (city, split, mlp, train), so the
// seed fields inside city/mlp/train are derived, never taken from here.
struct ExperimentConfig {
    std::string dataset_path;  // empty: generate the synthetic city below
    CityParams city;
    SplitFractions fractions;
    MlpConfig mlp;
    TrainConfig train;
    std::vector<std::size_t> eval_ns = {1, 5, 10};
    std::string out_dir = ".";
    std::vector<std::uint64_t> seeds = {1};
};

nlohmann::json city_params_to_json(const CityParams& p);
CityParams city_params_from_json(const nlohmann::json& j);

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Reads a JSON config file with a top-level "version": 1 field.
ExperimentConfig load_experiment_config(const std::string& path);

struct SingleRunResult {
    TrainResult train_result;
    EvalReport untrained_report;  // same test protocol, freshly initialized model
    EvalReport trained_report;
    std::vector<GeoRecord> records;  // split-tagged dataset of the run
};

// Data -> split -> train -> test-set evaluation for one root seed.
SingleRunResult run_single(const ExperimentConfig& cfg, std::uint64_t root_seed);

// Evaluates a model on the Query/Database partition of `records`.
EvalReport evaluate_model(const Mlp& model, const std::vector<GeoRecord>& records,
                          const std::vector<std::size_t>& ns, const std::string& method,
                          std::size_t k);

// One row per loss: recalls are per-N medians across cfg.seeds.
std::vector<EvalReport> compare_losses(const ExperimentConfig& cfg,
                                       const std::vector<LossKind>& losses);

// One row per k value, same aggregation.
std::vector<EvalReport> sweep_k(const ExperimentConfig& cfg,
                                const std::vector<std::size_t>& ks);

}  // namespace quitlab
