#include "quitlab/losses.hpp"

#include <cmath>

#include "quitlab/errors.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

double hinge(double x) {
    return x > 0.0 ? x : 0.0;
}

namespace detail {

void add_distance_grad(Embedding& gx, Embedding& gy, const Embedding& x,
                       const Embedding& y, double coeff, Metric metric) {
    if (metric == Metric::SquaredL2) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double g = coeff * 2.0 * (x[i] - y[i]);
            gx[i] += g;
            gy[i] -= g;
        }
        return;
    }
    double d = distance(x, y, Metric::L2);
    if (d == 0.0) return;  // coincident points: subgradient 0
    for (std::size_t i = 0; i < x.size(); ++i) {
        double g = coeff * (x[i] - y[i]) / d;
        gx[i] += g;
        gy[i] -= g;
    }
}

}  // namespace detail

namespace {

using detail::add_distance_grad;

LossResult make_result(std::size_t dim, std::size_t num_pos, std::size_t num_neg) {
    LossResult r;
    r.anchor_grad.assign(dim, 0.0);
    r.positive_grads.assign(num_pos, Embedding(dim, 0.0));
    r.negative_grads.assign(num_neg, Embedding(dim, 0.0));
    return r;
}

}  // namespace

LossResult triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n,
                        const Margins& m, Metric metric) {
    double d_ap = distance(a, p, metric);
    double d_an = distance(a, n, metric);
    LossResult r = make_result(a.size(), 1, 1);
    double arg = d_ap - d_an + m.alpha;
    r.hinge_args.push_back(arg);
    if (arg > 0.0) {
        r.value += arg;
        ++r.active_terms;
        add_distance_grad(r.anchor_grad, r.positive_grads[0], a, p, 1.0, metric);
        add_distance_grad(r.anchor_grad, r.negative_grads[0], a, n, -1.0, metric);
    }
    return r;
}

LossResult quadruplet_loss(const Embedding& a, const Embedding& p,
                           const Embedding& n1, const Embedding& n2,
                           const Margins& m, Metric metric) {
    double d_ap = distance(a, p, metric);
    double d_an1 = distance(a, n1, metric);
    double d_n12 = distance(n1, n2, metric);
    LossResult r = make_result(a.size(), 1, 2);
    double arg1 = d_ap - d_an1 + m.alpha;  // relative: positive vs anchor's negative
    r.hinge_args.push_back(arg1);
    if (arg1 > 0.0) {
        r.value += arg1;
        ++r.active_terms;
        add_distance_grad(r.anchor_grad, r.positive_grads[0], a, p, 1.0, metric);
        add_distance_grad(r.anchor_grad, r.negative_grads[0], a, n1, -1.0, metric);
    }
    double arg2 = d_ap - d_n12 + m.beta;  // absolute: positive vs negative-negative gap
    r.hinge_args.push_back(arg2);
    if (arg2 > 0.0) {
        r.value += arg2;
        ++r.active_terms;
        add_distance_grad(r.anchor_grad, r.positive_grads[0], a, p, 1.0, metric);
        add_distance_grad(r.negative_grads[0], r.negative_grads[1], n1, n2, -1.0, metric);
    }
    return r;
}

LossResult quit_loss(const QuintupletTuple& t, double neg_distance,
                     const Margins& m, Metric metric) {
    if (t.positives.empty()) throw DataError("quit_loss: tuple has no positives");
    if (!std::isfinite(neg_distance)) throw DataError("quit_loss: non-finite neg_distance");
    LossResult r = make_result(t.anchor.size(), t.positives.size(), t.negatives.size());
    for (std::size_t i = 0; i < t.positives.size(); ++i) {
        double arg = distance(t.anchor, t.positives[i], metric) - neg_distance + m.alpha;
        r.hinge_args.push_back(arg);
        if (arg > 0.0) {
            r.value += arg;
            ++r.active_terms;
            add_distance_grad(r.anchor_grad, r.positive_grads[i], t.anchor, t.positives[i],
                              1.0, metric);
        }
    }
    return r;
}

MinedLoss trihard_loss(const MiningBatch& batch, const Margins& m, Metric metric) {
    MinedLoss out;
    out.tuple = build_tuples(batch, 1, TupleStrategy::Trihard, metric);
    out.result = triplet_loss(batch.embeddings[out.tuple.anchor],
                              batch.embeddings[out.tuple.positives[0]],
                              batch.embeddings[out.tuple.negatives[0]], m, metric);
    return out;
}

MinedLoss msml_loss(const MiningBatch& batch, const Margins& m, Metric metric) {
    MinedLoss out;
    out.tuple = build_tuples(batch, 1, TupleStrategy::Msml, metric);
    const Embedding& pa = batch.embeddings[out.tuple.anchor];
    const Embedding& pb = batch.embeddings[out.tuple.positives[0]];
    const Embedding& na = batch.embeddings[out.tuple.negatives[0]];
    const Embedding& nb = batch.embeddings[out.tuple.negatives[1]];
    LossResult& r = out.result;
    r = make_result(pa.size(), 1, 2);
    double arg = distance(pa, pb, metric) - distance(na, nb, metric) + m.alpha;
    r.hinge_args.push_back(arg);
    if (arg > 0.0) {
        r.value += arg;
        ++r.active_terms;
        add_distance_grad(r.anchor_grad, r.positive_grads[0], pa, pb, 1.0, metric);
        add_distance_grad(r.negative_grads[0], r.negative_grads[1], na, nb, -1.0, metric);
    }
    return out;
}

MinedLoss quit_trihard_loss(const MiningBatch& batch, std::size_t k,
                            const Margins& m, Metric metric, KPolicy policy) {
    MinedLoss out;
    out.tuple = build_tuples(batch, k, TupleStrategy::Trihard, metric);
    if (policy == KPolicy::Strict && out.tuple.clamped_k) {
        throw MiningError(MiningErrorKind::FewerPositivesThanK,
                          "anchor has fewer than k positives in batch");
    }
    const Embedding& a = batch.embeddings[out.tuple.anchor];
    const Embedding& n = batch.embeddings[out.tuple.negatives[0]];
    double neg_d = distance(a, n, metric);
    LossResult& r = out.result;
    r = make_result(a.size(), out.tuple.positives.size(), 1);
    for (std::size_t i = 0; i < out.tuple.positives.size(); ++i) {
        const Embedding& p = batch.embeddings[out.tuple.positives[i]];
        double arg = distance(a, p, metric) - neg_d + m.alpha;
        r.hinge_args.push_back(arg);
        if (arg > 0.0) {
            r.value += arg;
            ++r.active_terms;
            add_distance_grad(r.anchor_grad, r.positive_grads[i], a, p, 1.0, metric);
            add_distance_grad(r.anchor_grad, r.negative_grads[0], a, n, -1.0, metric);
        }
    }
    return out;
}

MinedLoss quit_quad_loss(const MiningBatch& batch, std::size_t k,
                         const Margins& m, Metric metric, KPolicy policy) {
    MinedLoss out;
    out.tuple = build_tuples(batch, k, TupleStrategy::Quad, metric);
    if (policy == KPolicy::Strict && out.tuple.clamped_k) {
        throw MiningError(MiningErrorKind::FewerPositivesThanK,
                          "anchor has fewer than k positives in batch");
    }
    const Embedding& a = batch.embeddings[out.tuple.anchor];
    const Embedding& n1 = batch.embeddings[out.tuple.negatives[0]];
    const Embedding& n2 = batch.embeddings[out.tuple.negatives[1]];
    double d_an1 = distance(a, n1, metric);
    double d_n12 = distance(n1, n2, metric);
    const std::size_t num_pos = out.tuple.positives.size();
    std::vector<double> pos_d(num_pos);
    for (std::size_t i = 0; i < num_pos; ++i) {
        pos_d[i] = distance(a, batch.embeddings[out.tuple.positives[i]], metric);
    }
    LossResult& r = out.result;
    r = make_result(a.size(), num_pos, 2);
    // Both hinge families in the same order as quadruplet_loss evaluates its
    // two terms, so the k=1 case reduces bit-exactly.
    for (std::size_t i = 0; i < num_pos; ++i) {
        const Embedding& p = batch.embeddings[out.tuple.positives[i]];
        double arg1 = pos_d[i] - d_an1 + m.alpha;
        r.hinge_args.push_back(arg1);
        if (arg1 > 0.0) {
            r.value += arg1;
            ++r.active_terms;
            add_distance_grad(r.anchor_grad, r.positive_grads[i], a, p, 1.0, metric);
            add_distance_grad(r.anchor_grad, r.negative_grads[0], a, n1, -1.0, metric);
        }
        double arg2 = pos_d[i] - d_n12 + m.beta;
        r.hinge_args.push_back(arg2);
        if (arg2 > 0.0) {
            r.value += arg2;
            ++r.active_terms;
            add_distance_grad(r.anchor_grad, r.positive_grads[i], a, p, 1.0, metric);
            add_distance_grad(r.negative_grads[0], r.negative_grads[1], n1, n2, -1.0, metric);
        }
    }
    return out;
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::Triplet: return "triplet";
        case LossKind::Quad: return "quad";
        case LossKind::Trihard: return "trihard";
        case LossKind::Msml: return "msml";
        case LossKind::QuitTrihard: return "quit_trihard";
        case LossKind::QuitQuad: return "quit_quad";
    }
    throw DataError("unknown loss kind value");
}

LossKind loss_kind_from_string(std::string_view s) {
    for (LossKind kind : all_loss_kinds()) {
        if (s == to_string(kind)) return kind;
    }
    throw UsageError("unknown loss name: " + std::string(s) +
                     " (valid: triplet, quad, trihard, msml, quit_trihard, quit_quad)");
}

const std::vector<LossKind>& all_loss_kinds() {
    static const std::vector<LossKind> kinds = {
        LossKind::Triplet,     LossKind::Quad,        LossKind::Trihard,
        LossKind::Msml,        LossKind::QuitTrihard, LossKind::QuitQuad,
    };
    return kinds;
}

MinedLoss batch_loss(const MiningBatch& batch, LossKind kind, std::size_t k,
                     const Margins& m, Metric metric, KPolicy policy, Rng* rng) {
    switch (kind) {
        case LossKind::Triplet: {
            MinedLoss out;
            out.tuple = build_tuples(batch, 1, TupleStrategy::Triplet, metric, rng);
            out.result = triplet_loss(batch.embeddings[out.tuple.anchor],
                                      batch.embeddings[out.tuple.positives[0]],
                                      batch.embeddings[out.tuple.negatives[0]], m, metric);
            return out;
        }
        case LossKind::Quad: {
            MinedLoss out;
            out.tuple = build_tuples(batch, 1, TupleStrategy::Quad, metric);
            out.result = quadruplet_loss(batch.embeddings[out.tuple.anchor],
                                         batch.embeddings[out.tuple.positives[0]],
                                         batch.embeddings[out.tuple.negatives[0]],
                                         batch.embeddings[out.tuple.negatives[1]], m, metric);
            return out;
        }
        case LossKind::Trihard:
            return trihard_loss(batch, m, metric);
        case LossKind::Msml:
            return msml_loss(batch, m, metric);
        case LossKind::QuitTrihard:
            return quit_trihard_loss(batch, k, m, metric, policy);
        case LossKind::QuitQuad:
            return quit_quad_loss(batch, k, m, metric, policy);
    }
    throw DataError("unknown loss kind value");
}

}  // namespace quitlab
