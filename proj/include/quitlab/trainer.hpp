#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "quitlab/dataset.hpp"
#include "quitlab/losses.hpp"
#include "quitlab/mlp.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

struct TrainConfig {
    LossKind loss = LossKind::QuitTrihard;
    std::size_t k = 2;
    Margins margins;
    Metric metric = Metric::SquaredL2;
    double lr0 = 1e-4;
    std::size_t lr_halving_epochs = 5;    // lr halves every this many epochs
    std::size_t early_stop_patience = 10; // consecutive non-improving epochs
    std::size_t max_epochs = 30;
    BatchSpec batch;
    KPolicy k_policy = KPolicy::ClampToAvailable;
    std::uint64_t seed = 1;
};

// lr0 * 0.5^floor(epoch / lr_halving_epochs)
double learning_rate(const TrainConfig& tc, std::size_t epoch);

nlohmann::json train_config_to_json(const TrainConfig& tc);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json mlp_config_to_json(const MlpConfig& mc);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON of both configs, as fixed-width hex.
std::string config_hash(const TrainConfig& tc, const MlpConfig& mc);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    double val_recall1 = 0.0;
    std::int64_t wall_ms = 0;  // real elapsed time, the one non-reproducible column
};

// CSV columns: epoch,mean_loss,lr,val_recall1,wall_ms
void write_training_log_csv(const std::vector<EpochLog>& log, const std::string& path);

struct Checkpoint {
    MlpConfig mlp_config;
    nlohmann::json weights;
    std::size_t epoch = 0;
    double best_val_recall1 = 0.0;
    Rng::State rng_state{};
    std::string hash;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Queries/database for retrieval evaluation. Records tagged Query/Database
// keep their tags; otherwise each place's lexicographically greatest id
// becomes the query and its remaining views the database.
struct QueryPartition {
    std::vector<GeoRecord> queries;
    std::vector<GeoRecord> database;
};
QueryPartition designate_queries(const std::vector<GeoRecord>& records);

// Mean loss and accumulated parameter gradients for one batch of records
// (mean over anchors for the per-anchor losses, the single batch term for
// msml). rng feeds the triplet strategy's negative draw. Starved anchors are
// skipped; valid_terms reports how many contributed.
struct BatchLossGrads {
    double mean_loss = 0.0;
    std::size_t valid_terms = 0;
    Mlp::Gradients grads;
};
BatchLossGrads batch_loss_and_param_grads(const Mlp& model,
                                          const std::vector<GeoRecord>& records,
                                          const std::vector<std::size_t>& batch_indices,
                                          const TrainConfig& tc, Rng* rng);

struct TrainResult {
    Mlp model;  // best-epoch weights
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    std::vector<std::string> warnings;
};

// SGD over epoch_batches with the decayed schedule, validating Recall@1 after
// every epoch, snapshotting the best model, stopping early after
// early_stop_patience consecutive epochs without strict improvement. With no
// val records, validation logs 0 and early stopping is disabled.
TrainResult train(const std::vector<GeoRecord>& train_records,
                  const std::vector<GeoRecord>& val_records,
                  const TrainConfig& tc, const MlpConfig& mc);

}  // namespace quitlab
