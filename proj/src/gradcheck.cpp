#include "quitlab/gradcheck.hpp"

#include <cmath>

#include "quitlab/errors.hpp"
#include "quitlab/mlp.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

namespace {

double rel_err(double analytic, double numeric) {
    double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

MiningBatch random_batch(Rng& rng, std::size_t dim, std::size_t num_pos, std::size_t num_neg) {
    MiningBatch b;
    const std::size_t n = 1 + num_pos + num_neg;
    b.anchor_index = 0;
    b.embeddings.assign(n, Embedding(dim));
    b.place_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        b.place_ids[i] = i <= num_pos ? "A" : "B";
        for (double& x : b.embeddings[i]) x = rng.uniform(-1.0, 1.0);
    }
    return b;
}

bool all_gaps_exceed(const std::vector<double>& v, double margin) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            if (std::abs(v[i] - v[j]) <= margin) return false;
        }
    }
    return true;
}

// True when the batch sits safely away from every kink that would invalidate
// a finite-difference probe: hinge boundaries, mining selection ties, and
// (for L2) coincident points.
bool guard_ok(const MiningBatch& batch, const MinedLoss& ml, LossKind kind,
              Metric metric, double margin) {
    for (double arg : ml.result.hinge_args) {
        if (std::abs(arg) <= margin) return false;
    }
    const auto& e = batch.embeddings;
    const std::string& anchor_place = batch.place_ids[batch.anchor_index];
    std::vector<double> pos_d, neg_d;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (i == batch.anchor_index) continue;
        double d = distance(e[batch.anchor_index], e[i], metric);
        (batch.place_ids[i] == anchor_place ? pos_d : neg_d).push_back(d);
    }
    switch (kind) {
        case LossKind::Triplet:
            if (!all_gaps_exceed(pos_d, margin)) return false;
            break;
        case LossKind::Trihard:
        case LossKind::QuitTrihard:
        case LossKind::Quad:
        case LossKind::QuitQuad:
            if (!all_gaps_exceed(pos_d, margin) || !all_gaps_exceed(neg_d, margin)) return false;
            break;
        case LossKind::Msml: {
            std::vector<double> pos_pairs, neg_pairs;
            for (std::size_t i = 0; i < e.size(); ++i) {
                for (std::size_t j = i + 1; j < e.size(); ++j) {
                    double d = distance(e[i], e[j], metric);
                    (batch.place_ids[i] == batch.place_ids[j] ? pos_pairs : neg_pairs)
                        .push_back(d);
                }
            }
            if (!all_gaps_exceed(pos_pairs, margin) || !all_gaps_exceed(neg_pairs, margin)) {
                return false;
            }
            break;
        }
    }
    if (metric == Metric::L2) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            for (std::size_t j = i + 1; j < e.size(); ++j) {
                if (distance(e[i], e[j], Metric::L2) <= margin) return false;
            }
        }
    }
    return true;
}

// Gradients per batch index, combining the roles a loss touched.
std::vector<Embedding> scatter_grads(const MinedLoss& ml, std::size_t batch_size,
                                     std::size_t dim) {
    std::vector<Embedding> out(batch_size, Embedding(dim, 0.0));
    auto add = [&](std::size_t idx, const Embedding& g) {
        for (std::size_t i = 0; i < g.size(); ++i) out[idx][i] += g[i];
    };
    add(ml.tuple.anchor, ml.result.anchor_grad);
    for (std::size_t i = 0; i < ml.tuple.positives.size(); ++i) {
        add(ml.tuple.positives[i], ml.result.positive_grads[i]);
    }
    for (std::size_t j = 0; j < ml.tuple.negatives.size(); ++j) {
        add(ml.tuple.negatives[j], ml.result.negative_grads[j]);
    }
    return out;
}

}  // namespace

GradCheckReport check_loss_gradients(LossKind kind, const GradCheckOptions& opts,
                                     const GradMutator& mutator) {
    GradCheckReport report;
    report.loss = to_string(kind);
    report.tolerance = opts.rel_tol;

    Rng trial_rng(derive_seed(opts.seed, "gradcheck:" + to_string(kind)));
    std::size_t attempts = 0;
    while (report.trials_run < opts.trials) {
        if (++attempts > opts.trials * 200 + 200) {
            throw DataError("gradcheck: could not draw enough kink-free batches for " +
                            report.loss);
        }
        const std::uint64_t trial_seed = trial_rng.next_u64();
        Rng batch_rng(trial_seed);
        MiningBatch batch = random_batch(batch_rng, opts.dim, opts.k + 1, 3);

        auto eval = [&](const MiningBatch& b) {
            Rng draw(derive_seed(trial_seed, "neg-draw"));
            return batch_loss(b, kind, opts.k, opts.margins, opts.metric,
                              KPolicy::ClampToAvailable, &draw);
        };

        MinedLoss ml = eval(batch);
        if (!guard_ok(batch, ml, kind, opts.metric, opts.kink_margin)) {
            ++report.redraws;
            continue;
        }
        if (mutator) mutator(ml);
        std::vector<Embedding> analytic = scatter_grads(ml, batch.embeddings.size(), opts.dim);

        MiningBatch probe = batch;
        for (std::size_t idx = 0; idx < batch.embeddings.size(); ++idx) {
            for (std::size_t c = 0; c < opts.dim; ++c) {
                const double orig = batch.embeddings[idx][c];
                probe.embeddings[idx][c] = orig + opts.step;
                double fp = eval(probe).result.value;
                probe.embeddings[idx][c] = orig - opts.step;
                double fm = eval(probe).result.value;
                probe.embeddings[idx][c] = orig;
                double numeric = (fp - fm) / (2.0 * opts.step);
                report.max_rel_error =
                    std::max(report.max_rel_error, rel_err(analytic[idx][c], numeric));
            }
        }
        ++report.trials_run;
    }
    report.pass = report.max_rel_error <= report.tolerance;
    return report;
}

GradCheckReport check_model_gradients(LossKind kind, const GradCheckOptions& opts) {
    GradCheckReport report;
    report.loss = to_string(kind);
    report.through_model = true;
    report.tolerance = opts.model_rel_tol;

    const std::size_t feature_dim = 5;
    const std::size_t num_records = 1 + (opts.k + 1) + 3;

    Rng trial_rng(derive_seed(opts.seed, "gradcheck-model:" + to_string(kind)));
    std::size_t attempts = 0;
    while (report.trials_run < opts.trials) {
        if (++attempts > opts.trials * 200 + 200) {
            throw DataError("gradcheck: could not draw enough kink-free model trials for " +
                            report.loss);
        }
        const std::uint64_t trial_seed = trial_rng.next_u64();
        Rng batch_rng(trial_seed);

        std::vector<Embedding> features(num_records, Embedding(feature_dim));
        std::vector<std::string> place_ids(num_records);
        for (std::size_t i = 0; i < num_records; ++i) {
            place_ids[i] = i <= opts.k + 1 ? "A" : "B";
            for (double& x : features[i]) x = batch_rng.uniform(-1.0, 1.0);
        }

        MlpConfig mc;
        mc.input_dim = feature_dim;
        mc.hidden_dims = {6};
        mc.output_dim = opts.dim;
        mc.final_l2_normalize = true;
        mc.seed = derive_seed(trial_seed, "weights");
        Mlp model(mc);

        auto embed_batch = [&](std::vector<Mlp::Trace>* traces) {
            MiningBatch b;
            b.place_ids = place_ids;
            b.anchor_index = 0;
            b.embeddings.resize(num_records);
            if (traces) traces->resize(num_records);
            for (std::size_t i = 0; i < num_records; ++i) {
                if (traces) {
                    b.embeddings[i] = model.forward_traced(features[i], (*traces)[i]);
                } else {
                    b.embeddings[i] = model.forward(features[i]);
                }
            }
            return b;
        };
        auto eval = [&](const MiningBatch& b) {
            Rng draw(derive_seed(trial_seed, "neg-draw"));
            return batch_loss(b, kind, opts.k, opts.margins, opts.metric,
                              KPolicy::ClampToAvailable, &draw);
        };

        std::vector<Mlp::Trace> traces;
        MiningBatch batch = embed_batch(&traces);
        MinedLoss ml = eval(batch);

        bool ok = guard_ok(batch, ml, kind, opts.metric, opts.kink_margin);
        for (const Mlp::Trace& t : traces) {
            if (!ok) break;
            for (double pre : t.pre_acts.front()) {  // hidden-layer relu inputs
                if (std::abs(pre) <= opts.kink_margin) {
                    ok = false;
                    break;
                }
            }
            if (t.degenerate_norm) ok = false;
            double norm = 0.0;
            for (double v : t.pre_acts.back()) norm += v * v;
            if (std::sqrt(norm) <= 0.1) ok = false;  // keep 1/norm factors tame
        }
        if (!ok) {
            ++report.redraws;
            continue;
        }

        std::vector<Embedding> out_grads = scatter_grads(ml, num_records, opts.dim);
        Mlp::Gradients param_grads = model.zero_gradients();
        for (std::size_t i = 0; i < num_records; ++i) {
            model.backward(traces[i], out_grads[i], param_grads);
        }
        std::vector<double> analytic;
        for (std::size_t l = 0; l < param_grads.weights.size(); ++l) {
            analytic.insert(analytic.end(), param_grads.weights[l].begin(),
                            param_grads.weights[l].end());
            analytic.insert(analytic.end(), param_grads.biases[l].begin(),
                            param_grads.biases[l].end());
        }

        for (std::size_t pi = 0; pi < model.num_parameters(); ++pi) {
            const double orig = model.get_parameter(pi);
            model.set_parameter(pi, orig + opts.step);
            double fp = eval(embed_batch(nullptr)).result.value;
            model.set_parameter(pi, orig - opts.step);
            double fm = eval(embed_batch(nullptr)).result.value;
            model.set_parameter(pi, orig);
            double numeric = (fp - fm) / (2.0 * opts.step);
            report.max_rel_error =
                std::max(report.max_rel_error, rel_err(analytic[pi], numeric));
        }
        ++report.trials_run;
    }
    report.pass = report.max_rel_error <= report.tolerance;
    return report;
}

}  // namespace quitlab
