#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quitlab/dataset.hpp"
#include "quitlab/errors.hpp"
#include "quitlab/eval.hpp"
#include "quitlab/experiments.hpp"
#include "quitlab/gradcheck.hpp"
#include "quitlab/parallel.hpp"
#include "quitlab/trainer.hpp"

namespace {

using namespace quitlab;

namespace fs = std::filesystem;

void apply_thread_env() {
    const char* env = std::getenv("QUITLAB_THREADS");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == nullptr || *end != '\0' || v < 0) {
        throw UsageError("QUITLAB_THREADS must be a nonnegative integer, got: " +
                         std::string(env));
    }
    set_max_threads(static_cast<int>(v));
}

std::string join_out(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void require_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("output directory does not exist: " + dir);
    }
}

std::vector<LossKind> parse_losses(const std::vector<std::string>& names) {
    if (names.empty()) return all_loss_kinds();
    std::vector<LossKind> out;
    for (const std::string& n : names) out.push_back(loss_kind_from_string(n));
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

struct CommonFlags {
    std::string config_path;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string dataset_path;

    ExperimentConfig load() const {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_experiment_config(config_path);
        if (!seeds.empty()) cfg.seeds = seeds;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON experiment config (version 1)");
    cmd->add_option("--seed,--seeds", flags.seeds, "root seed(s), overriding the config");
    cmd->add_option("-o,--out", flags.out_dir, "output directory");
    cmd->add_option("--data", flags.dataset_path, "dataset JSONL path (skips generation)");
}

int run(int argc, char** argv) {
    CLI::App app{"metric-learning lab for multi-positive geo-localization losses"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic multi-view city as JSONL");
    CityParams city;
    std::string gen_out;
    std::uint64_t gen_seed = 1;
    gen->add_option("--places", city.num_places, "number of places");
    gen->add_option("--views", city.views_per_place, "views per place");
    gen->add_option("--covisible", city.covisible_views, "truly covisible views per place");
    gen->add_option("--feature-dim", city.feature_dim, "raw feature dimension");
    gen->add_option("--noise", city.view_noise, "per-view feature noise");
    gen->add_option("--overlap", city.distractor_overlap,
                    "cross-place similarity of distractor views, 0..1");
    gen->add_option("--spacing", city.place_spacing_m, "grid pitch between places, meters");
    gen->add_option("--spread", city.intra_place_spread_m, "place footprint diameter, meters");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("-o,--out", gen_out, "output JSONL path")->required();

    // train
    auto* tr = app.add_subcommand("train", "train an embedding model");
    CommonFlags tr_flags;
    add_common(tr, tr_flags);
    std::string tr_loss, tr_metric;
    std::size_t tr_k = 0, tr_max_epochs = 0, tr_patience = 0, tr_p = 0, tr_v = 0;
    double tr_alpha = -1.0, tr_beta = -1.0, tr_lr0 = 0.0;
    tr->add_option("--loss", tr_loss, "triplet|quad|trihard|msml|quit_trihard|quit_quad");
    tr->add_option("--k", tr_k, "positives per anchor");
    tr->add_option("--alpha", tr_alpha, "relative-distance margin");
    tr->add_option("--beta", tr_beta, "absolute-distance margin");
    tr->add_option("--metric", tr_metric, "squared_l2|l2");
    tr->add_option("--lr0", tr_lr0, "initial learning rate");
    tr->add_option("--max-epochs", tr_max_epochs, "epoch cap");
    tr->add_option("--patience", tr_patience, "early-stop patience, epochs");
    tr->add_option("--batch-places", tr_p, "places per batch");
    tr->add_option("--batch-views", tr_v, "views per place per batch");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string ev_ckpt, ev_data, ev_out;
    double ev_threshold = 25.0;
    std::vector<std::size_t> ev_ns = {1, 5, 10};
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint JSON path")->required();
    ev->add_option("--data", ev_data, "dataset JSONL path")->required();
    ev->add_option("--threshold-m", ev_threshold, "geographic correctness radius, meters");
    ev->add_option("--ns", ev_ns, "recall cutoffs");
    ev->add_option("-o,--out", ev_out, "output directory")->required();

    // sweep-k
    auto* sw = app.add_subcommand("sweep-k", "train one model per k and tabulate recalls");
    CommonFlags sw_flags;
    add_common(sw, sw_flags);
    std::vector<std::size_t> sw_ks = {1, 2, 3, 4};
    sw->add_option("--ks", sw_ks, "k values to sweep");

    // compare-losses
    auto* cmp = app.add_subcommand("compare-losses", "train one model per loss and tabulate");
    CommonFlags cmp_flags;
    add_common(cmp, cmp_flags);
    std::vector<std::string> cmp_losses;
    cmp->add_option("--losses", cmp_losses, "losses to compare (default: all six)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of analytic gradients");
    std::vector<std::string> gc_losses;
    std::size_t gc_trials = 100, gc_model_trials = 20;
    std::uint64_t gc_seed = 1;
    gc->add_option("--losses", gc_losses, "losses to check (default: all six)");
    gc->add_option("--trials", gc_trials, "loss-level trials per loss");
    gc->add_option("--model-trials", gc_model_trials, "through-model trials per loss");
    gc->add_option("--seed", gc_seed, "trial seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    apply_thread_env();

    if (gen->parsed()) {
        city.seed = gen_seed;
        std::vector<GeoRecord> records = generate_city(city);
        fs::path parent = fs::path(gen_out).parent_path();
        if (!parent.empty() && !fs::is_directory(parent)) {
            throw DataError("output directory does not exist: " + parent.string());
        }
        save_jsonl(records, gen_out);
        std::printf("wrote %zu records (%zu places x %zu views) -> %s\n", records.size(),
                    city.num_places, city.views_per_place, gen_out.c_str());
        return 0;
    }

    if (tr->parsed()) {
        ExperimentConfig cfg = tr_flags.load();
        if (!tr_loss.empty()) cfg.train.loss = loss_kind_from_string(tr_loss);
        if (tr_k > 0) cfg.train.k = tr_k;
        if (tr_alpha >= 0.0) cfg.train.margins.alpha = tr_alpha;
        if (tr_beta >= 0.0) cfg.train.margins.beta = tr_beta;
        if (!tr_metric.empty()) cfg.train.metric = metric_from_string(tr_metric);
        if (tr_lr0 > 0.0) cfg.train.lr0 = tr_lr0;
        if (tr_max_epochs > 0) cfg.train.max_epochs = tr_max_epochs;
        if (tr_patience > 0) cfg.train.early_stop_patience = tr_patience;
        if (tr_p > 0) cfg.train.batch.places_per_batch = tr_p;
        if (tr_v > 0) cfg.train.batch.views_per_place = tr_v;
        require_dir(cfg.out_dir);

        SingleRunResult run = run_single(cfg, cfg.seeds.front());
        save_checkpoint(run.train_result.checkpoint, join_out(cfg.out_dir, "checkpoint.json"));
        write_training_log_csv(run.train_result.log,
                               join_out(cfg.out_dir, "training_log.csv"));
        save_jsonl(run.records, join_out(cfg.out_dir, "dataset_split.jsonl"));
        for (const std::string& w : run.train_result.warnings) {
            std::fprintf(stderr, "warning: %s\n", w.c_str());
        }
        std::printf("trained %s (k=%zu) for %zu epoch(s); best val recall@1 %.4f at epoch %zu\n",
                    to_string(cfg.train.loss).c_str(), cfg.train.k, run.train_result.log.size(),
                    run.train_result.checkpoint.best_val_recall1,
                    run.train_result.checkpoint.epoch);
        std::printf("test recall@1 untrained %.4f -> trained %.4f\n",
                    run.untrained_report.recall_at.count(1)
                        ? run.untrained_report.recall_at.at(1)
                        : 0.0,
                    run.trained_report.recall_at.count(1) ? run.trained_report.recall_at.at(1)
                                                          : 0.0);
        std::printf("outputs: checkpoint.json training_log.csv dataset_split.jsonl in %s\n",
                    cfg.out_dir.c_str());
        return 0;
    }

    if (ev->parsed()) {
        require_dir(ev_out);
        Checkpoint ckpt = load_checkpoint(ev_ckpt);
        Mlp model(ckpt.mlp_config);
        model.weights_from_json(ckpt.weights);
        std::vector<GeoRecord> records = load_jsonl(ev_data);
        QueryPartition parts = designate_queries(records);
        if (parts.queries.empty()) throw DataError("eval: dataset yields no queries");
        std::vector<Embedding> q_embs(parts.queries.size());
        std::vector<Embedding> db_embs(parts.database.size());
        parallel_for(parts.queries.size(), [&](std::size_t i) {
            q_embs[i] = model.forward(parts.queries[i].features);
        });
        parallel_for(parts.database.size(), [&](std::size_t i) {
            db_embs[i] = model.forward(parts.database[i].features);
        });
        EvalReport report = recall_at_n(parts.queries, q_embs, parts.database, db_embs, ev_ns,
                                        ev_threshold, Metric::SquaredL2);
        report.method = "checkpoint";
        report.config_hash = ckpt.hash;
        emit_report(report, join_out(ev_out, "report.csv"), ReportFormat::Csv);
        emit_report(report, join_out(ev_out, "report.json"), ReportFormat::Json);
        std::fputs(reports_to_csv({report}).c_str(), stdout);
        return 0;
    }

    if (sw->parsed()) {
        ExperimentConfig cfg = sw_flags.load();
        require_dir(cfg.out_dir);
        std::vector<EvalReport> rows = sweep_k(cfg, sw_ks);
        std::string csv = reports_to_csv(rows);
        write_text(join_out(cfg.out_dir, "sweep_k.csv"), csv);
        std::fputs(csv.c_str(), stdout);
        return 0;
    }

    if (cmp->parsed()) {
        ExperimentConfig cfg = cmp_flags.load();
        require_dir(cfg.out_dir);
        std::vector<EvalReport> rows = compare_losses(cfg, parse_losses(cmp_losses));
        std::string csv = reports_to_csv(rows);
        write_text(join_out(cfg.out_dir, "compare_losses.csv"), csv);
        std::fputs(csv.c_str(), stdout);
        return 0;
    }

    if (gc->parsed()) {
        bool all_pass = true;
        std::printf("%-14s %-13s %8s %8s %12s %s\n", "loss", "level", "trials", "redraws",
                    "max_rel_err", "result");
        for (LossKind kind : parse_losses(gc_losses)) {
            GradCheckOptions opts;
            opts.seed = gc_seed;
            opts.trials = gc_trials;
            GradCheckReport loss_level = check_loss_gradients(kind, opts);
            opts.trials = gc_model_trials;
            GradCheckReport model_level = check_model_gradients(kind, opts);
            for (const GradCheckReport& r : {loss_level, model_level}) {
                std::printf("%-14s %-13s %8zu %8zu %12.3e %s\n", r.loss.c_str(),
                            r.through_model ? "through-model" : "loss-level", r.trials_run,
                            r.redraws, r.max_rel_error, r.pass ? "pass" : "FAIL");
                all_pass = all_pass && r.pass;
            }
        }
        if (!all_pass) throw DataError("gradient check failed");
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
