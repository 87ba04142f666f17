#include "quitlab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "quitlab/errors.hpp"
#include "quitlab/eval.hpp"
#include "quitlab/parallel.hpp"

namespace quitlab {

double learning_rate(const TrainConfig& tc, std::size_t epoch) {
    if (tc.lr_halving_epochs == 0) return tc.lr0;
    return tc.lr0 * std::pow(0.5, static_cast<double>(epoch / tc.lr_halving_epochs));
}

nlohmann::json train_config_to_json(const TrainConfig& tc) {
    return {{"loss", to_string(tc.loss)},
            {"k", tc.k},
            {"alpha", tc.margins.alpha},
            {"beta", tc.margins.beta},
            {"metric", to_string(tc.metric)},
            {"lr0", tc.lr0},
            {"lr_halving_epochs", tc.lr_halving_epochs},
            {"early_stop_patience", tc.early_stop_patience},
            {"max_epochs", tc.max_epochs},
            {"places_per_batch", tc.batch.places_per_batch},
            {"views_per_place", tc.batch.views_per_place},
            {"k_policy", tc.k_policy == KPolicy::Strict ? "strict" : "clamp"},
            {"seed", std::to_string(tc.seed)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig tc;
    try {
        if (j.contains("loss")) tc.loss = loss_kind_from_string(j.at("loss").get<std::string>());
        if (j.contains("k")) tc.k = j.at("k").get<std::size_t>();
        if (j.contains("alpha")) tc.margins.alpha = j.at("alpha").get<double>();
        if (j.contains("beta")) tc.margins.beta = j.at("beta").get<double>();
        if (j.contains("metric")) tc.metric = metric_from_string(j.at("metric").get<std::string>());
        if (j.contains("lr0")) tc.lr0 = j.at("lr0").get<double>();
        if (j.contains("lr_halving_epochs")) {
            tc.lr_halving_epochs = j.at("lr_halving_epochs").get<std::size_t>();
        }
        if (j.contains("early_stop_patience")) {
            tc.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
        }
        if (j.contains("max_epochs")) tc.max_epochs = j.at("max_epochs").get<std::size_t>();
        if (j.contains("places_per_batch")) {
            tc.batch.places_per_batch = j.at("places_per_batch").get<std::size_t>();
        }
        if (j.contains("views_per_place")) {
            tc.batch.views_per_place = j.at("views_per_place").get<std::size_t>();
        }
        if (j.contains("k_policy")) {
            const std::string p = j.at("k_policy").get<std::string>();
            if (p == "strict") {
                tc.k_policy = KPolicy::Strict;
            } else if (p == "clamp") {
                tc.k_policy = KPolicy::ClampToAvailable;
            } else {
                throw DataError("train config: unknown k_policy: " + p);
            }
        }
        if (j.contains("seed")) tc.seed = std::stoull(j.at("seed").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("train config: bad payload: ") + e.what());
    }
    return tc;
}

nlohmann::json mlp_config_to_json(const MlpConfig& mc) {
    return {{"input_dim", mc.input_dim},
            {"hidden_dims", mc.hidden_dims},
            {"output_dim", mc.output_dim},
            {"final_l2_normalize", mc.final_l2_normalize},
            {"seed", std::to_string(mc.seed)}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& j) {
    MlpConfig mc;
    try {
        if (j.contains("input_dim")) mc.input_dim = j.at("input_dim").get<std::size_t>();
        if (j.contains("hidden_dims")) {
            mc.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        }
        if (j.contains("output_dim")) mc.output_dim = j.at("output_dim").get<std::size_t>();
        if (j.contains("final_l2_normalize")) {
            mc.final_l2_normalize = j.at("final_l2_normalize").get<bool>();
        }
        if (j.contains("seed")) mc.seed = std::stoull(j.at("seed").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("mlp config: bad payload: ") + e.what());
    }
    return mc;
}

std::string config_hash(const TrainConfig& tc, const MlpConfig& mc) {
    nlohmann::json j = {{"train", train_config_to_json(tc)}, {"mlp", mlp_config_to_json(mc)}};
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

void write_training_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_training_log_csv: cannot open: " + path);
    out << "epoch,mean_loss,lr,val_recall1,wall_ms\n";
    char buf[128];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%lld\n", e.epoch, e.mean_loss,
                      e.lr, e.val_recall1, static_cast<long long>(e.wall_ms));
        out << buf;
    }
    if (!out) throw DataError("write_training_log_csv: write failed: " + path);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json state = nlohmann::json::array();
    for (std::uint64_t word : ckpt.rng_state) state.push_back(std::to_string(word));
    nlohmann::json j = {{"version", 1},
                        {"mlp_config", mlp_config_to_json(ckpt.mlp_config)},
                        {"weights", ckpt.weights},
                        {"epoch", ckpt.epoch},
                        {"best_val_recall1", ckpt.best_val_recall1},
                        {"rng_state", state},
                        {"config_hash", ckpt.hash}};
    std::ofstream out(path);
    if (!out) throw DataError("save_checkpoint: cannot open: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("save_checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_checkpoint: cannot open: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("load_checkpoint: malformed JSON: " + path);
    Checkpoint ckpt;
    try {
        if (j.at("version").get<int>() != 1) {
            throw DataError("load_checkpoint: unsupported version in " + path);
        }
        ckpt.mlp_config = mlp_config_from_json(j.at("mlp_config"));
        ckpt.weights = j.at("weights");
        ckpt.epoch = j.at("epoch").get<std::size_t>();
        ckpt.best_val_recall1 = j.at("best_val_recall1").get<double>();
        const nlohmann::json& state = j.at("rng_state");
        if (!state.is_array() || state.size() != ckpt.rng_state.size()) {
            throw DataError("load_checkpoint: bad rng_state in " + path);
        }
        for (std::size_t i = 0; i < ckpt.rng_state.size(); ++i) {
            ckpt.rng_state[i] = std::stoull(state.at(i).get<std::string>());
        }
        ckpt.hash = j.at("config_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("load_checkpoint: bad payload: ") + e.what());
    }
    return ckpt;
}

QueryPartition designate_queries(const std::vector<GeoRecord>& records) {
    QueryPartition out;
    bool tagged = false;
    for (const GeoRecord& r : records) {
        if (r.split == Split::Query || r.split == Split::Database) {
            tagged = true;
            break;
        }
    }
    if (tagged) {
        for (const GeoRecord& r : records) {
            if (r.split == Split::Query) out.queries.push_back(r);
            if (r.split == Split::Database) out.database.push_back(r);
        }
        return out;
    }
    std::map<std::string, std::string> query_id;  // place -> greatest id
    for (const GeoRecord& r : records) {
        auto [it, inserted] = query_id.emplace(r.place_id, r.id);
        if (!inserted && r.id > it->second) it->second = r.id;
    }
    for (const GeoRecord& r : records) {
        if (query_id.at(r.place_id) == r.id) {
            out.queries.push_back(r);
        } else {
            out.database.push_back(r);
        }
    }
    return out;
}

BatchLossGrads batch_loss_and_param_grads(const Mlp& model,
                                          const std::vector<GeoRecord>& records,
                                          const std::vector<std::size_t>& batch_indices,
                                          const TrainConfig& tc, Rng* rng) {
    const std::size_t n = batch_indices.size();
    std::vector<Mlp::Trace> traces(n);
    MiningBatch batch;
    batch.embeddings.resize(n);
    batch.place_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const GeoRecord& r = records[batch_indices[i]];
        batch.embeddings[i] = model.forward_traced(r.features, traces[i]);
        batch.place_ids[i] = r.place_id;
    }

    const std::size_t dim = model.config().output_dim;
    std::vector<Embedding> out_grads(n, Embedding(dim, 0.0));
    auto scatter = [&](const MinedLoss& ml) {
        auto add = [&](std::size_t idx, const Embedding& g) {
            for (std::size_t c = 0; c < dim; ++c) out_grads[idx][c] += g[c];
        };
        add(ml.tuple.anchor, ml.result.anchor_grad);
        for (std::size_t i = 0; i < ml.tuple.positives.size(); ++i) {
            add(ml.tuple.positives[i], ml.result.positive_grads[i]);
        }
        for (std::size_t j = 0; j < ml.tuple.negatives.size(); ++j) {
            add(ml.tuple.negatives[j], ml.result.negative_grads[j]);
        }
    };

    BatchLossGrads out;
    out.grads = model.zero_gradients();
    double total = 0.0;
    if (tc.loss == LossKind::Msml) {
        // One term per batch, not per anchor.
        try {
            MinedLoss ml = batch_loss(batch, tc.loss, tc.k, tc.margins, tc.metric, tc.k_policy, rng);
            total += ml.result.value;
            scatter(ml);
            out.valid_terms = 1;
        } catch (const MiningError&) {
            out.valid_terms = 0;
        }
    } else {
        for (std::size_t a = 0; a < n; ++a) {
            batch.anchor_index = a;
            try {
                MinedLoss ml =
                    batch_loss(batch, tc.loss, tc.k, tc.margins, tc.metric, tc.k_policy, rng);
                total += ml.result.value;
                scatter(ml);
                ++out.valid_terms;
            } catch (const MiningError&) {
                // starved anchor: nothing to learn from in this batch
            }
        }
    }
    if (out.valid_terms == 0) return out;

    out.mean_loss = total / static_cast<double>(out.valid_terms);
    const double scale = 1.0 / static_cast<double>(out.valid_terms);
    Embedding scaled(dim);
    for (std::size_t i = 0; i < n; ++i) {
        bool nonzero = false;
        for (double g : out_grads[i]) {
            if (g != 0.0) {
                nonzero = true;
                break;
            }
        }
        if (!nonzero) continue;
        for (std::size_t c = 0; c < dim; ++c) scaled[c] = out_grads[i][c] * scale;
        model.backward(traces[i], scaled, out.grads);
    }
    return out;
}

namespace {

double val_recall1(const Mlp& model, const std::vector<GeoRecord>& val_records) {
    QueryPartition parts = designate_queries(val_records);
    if (parts.queries.empty() || parts.database.empty()) {
        throw DataError("train: val split yields no query/database pair");
    }
    std::vector<Embedding> q_embs(parts.queries.size());
    std::vector<Embedding> db_embs(parts.database.size());
    parallel_for(parts.queries.size(),
                 [&](std::size_t i) { q_embs[i] = model.forward(parts.queries[i].features); });
    parallel_for(parts.database.size(),
                 [&](std::size_t i) { db_embs[i] = model.forward(parts.database[i].features); });
    EvalReport report =
        recall_at_n(parts.queries, q_embs, parts.database, db_embs, {1}, 25.0, Metric::SquaredL2);
    return report.recall_at.at(1);
}

}  // namespace

TrainResult train(const std::vector<GeoRecord>& train_records,
                  const std::vector<GeoRecord>& val_records,
                  const TrainConfig& tc, const MlpConfig& mc) {
    if (!(tc.lr0 > 0.0)) throw DataError("train: lr0 must be > 0");
    if (tc.k < 1) throw DataError("train: k must be >= 1");
    if (tc.early_stop_patience < 1) throw DataError("train: patience must be >= 1");
    if (tc.max_epochs < 1) throw DataError("train: max_epochs must be >= 1");
    std::set<std::string> train_places;
    for (const GeoRecord& r : train_records) {
        if (r.split == Split::Train) train_places.insert(r.place_id);
    }
    if (train_places.size() < 2) throw DataError("train: need at least 2 train places");

    TrainResult result{Mlp(mc), Checkpoint{}, {}, {}};
    Mlp& model = result.model;
    const std::string hash = config_hash(tc, mc);
    const bool has_val = !val_records.empty();

    Rng draw_rng(derive_seed(tc.seed, "train"));
    const std::uint64_t sampler_seed = derive_seed(tc.seed, "sampler");

    double best = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    auto snapshot = [&](std::size_t epoch, double recall) {
        result.checkpoint.mlp_config = mc;
        result.checkpoint.weights = model.weights_to_json();
        result.checkpoint.epoch = epoch;
        result.checkpoint.best_val_recall1 = recall;
        result.checkpoint.rng_state = draw_rng.state();
        result.checkpoint.hash = hash;
    };

    for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
        auto start = std::chrono::steady_clock::now();
        const double lr = learning_rate(tc, epoch);
        auto batches = epoch_batches(train_records, tc.batch, sampler_seed, epoch);

        double loss_sum = 0.0;
        std::size_t term_count = 0;
        std::size_t skipped = 0;
        for (const auto& batch_indices : batches) {
            BatchLossGrads blg =
                batch_loss_and_param_grads(model, train_records, batch_indices, tc, &draw_rng);
            if (blg.valid_terms == 0) {
                ++skipped;
                continue;
            }
            loss_sum += blg.mean_loss * static_cast<double>(blg.valid_terms);
            term_count += blg.valid_terms;
            model.sgd_step(blg.grads, lr);
        }
        if (skipped > 0) {
            result.warnings.push_back("epoch " + std::to_string(epoch) + ": skipped " +
                                      std::to_string(skipped) + " starved batch(es)");
        }
        if (term_count == 0) {
            throw DataError("train: every batch starved in epoch " + std::to_string(epoch));
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.mean_loss = loss_sum / static_cast<double>(term_count);
        entry.lr = lr;
        entry.val_recall1 = has_val ? val_recall1(model, val_records) : 0.0;
        entry.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        result.log.push_back(entry);

        if (!has_val) {
            snapshot(epoch, 0.0);
            continue;
        }
        if (entry.val_recall1 > best) {
            best = entry.val_recall1;
            since_best = 0;
            snapshot(epoch, best);
        } else {
            ++since_best;
            if (since_best >= tc.early_stop_patience) break;
        }
    }

    model.weights_from_json(result.checkpoint.weights);
    return result;
}

}  // namespace quitlab
