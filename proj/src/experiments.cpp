#include "quitlab/experiments.hpp"

#include <algorithm>
#include <fstream>

#include "quitlab/errors.hpp"
#include "quitlab/parallel.hpp"

namespace quitlab {

nlohmann::json city_params_to_json(const CityParams& p) {
    return {{"num_places", p.num_places},
            {"views_per_place", p.views_per_place},
            {"covisible_views", p.covisible_views},
            {"feature_dim", p.feature_dim},
            {"view_noise", p.view_noise},
            {"distractor_overlap", p.distractor_overlap},
            {"place_spacing_m", p.place_spacing_m},
            {"intra_place_spread_m", p.intra_place_spread_m}};
}

CityParams city_params_from_json(const nlohmann::json& j) {
    CityParams p;
    try {
        if (j.contains("num_places")) p.num_places = j.at("num_places").get<std::size_t>();
        if (j.contains("views_per_place")) {
            p.views_per_place = j.at("views_per_place").get<std::size_t>();
        }
        if (j.contains("covisible_views")) {
            p.covisible_views = j.at("covisible_views").get<std::size_t>();
        }
        if (j.contains("feature_dim")) p.feature_dim = j.at("feature_dim").get<std::size_t>();
        if (j.contains("view_noise")) p.view_noise = j.at("view_noise").get<double>();
        if (j.contains("distractor_overlap")) {
            p.distractor_overlap = j.at("distractor_overlap").get<double>();
        }
        if (j.contains("place_spacing_m")) {
            p.place_spacing_m = j.at("place_spacing_m").get<double>();
        }
        if (j.contains("intra_place_spread_m")) {
            p.intra_place_spread_m = j.at("intra_place_spread_m").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("city params: bad payload: ") + e.what());
    }
    return p;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json seeds = nlohmann::json::array();
    for (std::uint64_t s : cfg.seeds) seeds.push_back(std::to_string(s));
    return {{"version", 1},
            {"dataset_path", cfg.dataset_path},
            {"city", city_params_to_json(cfg.city)},
            {"fractions",
             {{"train", cfg.fractions.train},
              {"val", cfg.fractions.val},
              {"test", cfg.fractions.test}}},
            {"mlp", mlp_config_to_json(cfg.mlp)},
            {"train", train_config_to_json(cfg.train)},
            {"eval_ns", cfg.eval_ns},
            {"out_dir", cfg.out_dir},
            {"seeds", seeds}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("dataset_path")) cfg.dataset_path = j.at("dataset_path").get<std::string>();
        if (j.contains("city")) cfg.city = city_params_from_json(j.at("city"));
        if (j.contains("fractions")) {
            const nlohmann::json& f = j.at("fractions");
            if (f.contains("train")) cfg.fractions.train = f.at("train").get<double>();
            if (f.contains("val")) cfg.fractions.val = f.at("val").get<double>();
            if (f.contains("test")) cfg.fractions.test = f.at("test").get<double>();
        }
        if (j.contains("mlp")) cfg.mlp = mlp_config_from_json(j.at("mlp"));
        if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
        if (j.contains("eval_ns")) cfg.eval_ns = j.at("eval_ns").get<std::vector<std::size_t>>();
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("seeds")) {
            cfg.seeds.clear();
            for (const nlohmann::json& s : j.at("seeds")) {
                cfg.seeds.push_back(std::stoull(s.get<std::string>()));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("experiment config: bad payload: ") + e.what());
    }
    if (cfg.seeds.empty()) throw DataError("experiment config: seeds must be nonempty");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config file not found: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("config file is not valid JSON: " + path);
    if (!j.contains("version") || j.at("version").get<int>() != 1) {
        throw DataError("config file must declare \"version\": 1: " + path);
    }
    return experiment_config_from_json(j);
}

EvalReport evaluate_model(const Mlp& model, const std::vector<GeoRecord>& records,
                          const std::vector<std::size_t>& ns, const std::string& method,
                          std::size_t k) {
    QueryPartition parts = designate_queries(records);
    if (parts.queries.empty()) throw DataError("evaluate_model: no query records");
    if (parts.database.empty()) throw DataError("evaluate_model: no database records");
    std::vector<Embedding> q_embs(parts.queries.size());
    std::vector<Embedding> db_embs(parts.database.size());
    parallel_for(parts.queries.size(),
                 [&](std::size_t i) { q_embs[i] = model.forward(parts.queries[i].features); });
    parallel_for(parts.database.size(),
                 [&](std::size_t i) { db_embs[i] = model.forward(parts.database[i].features); });
    EvalReport report = recall_at_n(parts.queries, q_embs, parts.database, db_embs, ns, 25.0,
                                    Metric::SquaredL2);
    report.method = method;
    report.k = k;
    return report;
}

SingleRunResult run_single(const ExperimentConfig& cfg, std::uint64_t root_seed) {
    std::vector<GeoRecord> records;
    if (!cfg.dataset_path.empty()) {
        records = load_jsonl(cfg.dataset_path);
        if (records.empty()) throw DataError("run_single: dataset is empty: " + cfg.dataset_path);
    } else {
        CityParams city = cfg.city;
        city.seed = derive_seed(root_seed, "city");
        records = generate_city(city);
    }
    bool tagged = false;
    for (const GeoRecord& r : records) {
        if (r.split != Split::Train) {
            tagged = true;
            break;
        }
    }
    if (!tagged) {
        records = split_dataset(records, cfg.fractions, derive_seed(root_seed, "split"));
    }

    std::vector<GeoRecord> train_records, val_records, test_records;
    for (const GeoRecord& r : records) {
        switch (r.split) {
            case Split::Train: train_records.push_back(r); break;
            case Split::Val: val_records.push_back(r); break;
            case Split::Test:
            case Split::Query:
            case Split::Database: test_records.push_back(r); break;
        }
    }

    MlpConfig mc = cfg.mlp;
    mc.seed = derive_seed(root_seed, "mlp");
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(root_seed, "train");

    const std::string hash = config_hash(tc, mc);
    const std::string method = to_string(tc.loss);

    Mlp untrained(mc);
    EvalReport untrained_report =
        evaluate_model(untrained, test_records, cfg.eval_ns, method + "-untrained", tc.k);
    untrained_report.config_hash = hash;

    TrainResult train_result = train(train_records, val_records, tc, mc);
    EvalReport trained_report =
        evaluate_model(train_result.model, test_records, cfg.eval_ns, method, tc.k);
    trained_report.config_hash = hash;
    return SingleRunResult{std::move(train_result), std::move(untrained_report),
                           std::move(trained_report), std::move(records)};
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median of empty set");
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    if (v.size() % 2 == 1) return v[mid];
    return 0.5 * (v[mid - 1] + v[mid]);
}

// Runs cfg once per seed and collapses the trained reports into one row of
// per-N median recalls.
EvalReport median_row(const ExperimentConfig& cfg, const std::string& method, std::size_t k) {
    std::vector<EvalReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
        reports.push_back(run_single(cfg, seed).trained_report);
    }
    EvalReport row;
    row.method = method;
    row.k = k;
    row.config_hash = reports.front().config_hash;
    row.num_queries = reports.front().num_queries;
    row.distance_threshold_m = reports.front().distance_threshold_m;
    for (const auto& [n, recall] : reports.front().recall_at) {
        (void)recall;
        std::vector<double> values;
        for (const EvalReport& r : reports) values.push_back(r.recall_at.at(n));
        row.recall_at[n] = median(values);
    }
    return row;
}

}  // namespace

std::vector<EvalReport> compare_losses(const ExperimentConfig& cfg,
                                       const std::vector<LossKind>& losses) {
    if (losses.empty()) throw UsageError("compare_losses: no losses given");
    std::vector<EvalReport> rows;
    for (LossKind loss : losses) {
        ExperimentConfig c = cfg;
        c.train.loss = loss;
        rows.push_back(median_row(c, to_string(loss), c.train.k));
    }
    return rows;
}

std::vector<EvalReport> sweep_k(const ExperimentConfig& cfg,
                                const std::vector<std::size_t>& ks) {
    if (ks.empty()) throw UsageError("sweep_k: no k values given");
    std::vector<EvalReport> rows;
    for (std::size_t k : ks) {
        if (k < 1) throw UsageError("sweep_k: k values must be >= 1");
        ExperimentConfig c = cfg;
        c.train.k = k;
        rows.push_back(median_row(c, to_string(c.train.loss), k));
    }
    return rows;
}

}  // namespace quitlab
