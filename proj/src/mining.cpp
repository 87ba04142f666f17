#include "quitlab/mining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quitlab/errors.hpp"
#include "quitlab/rng.hpp"

namespace quitlab {

namespace {

void validate(const MiningBatch& batch) {
    if (batch.embeddings.size() != batch.place_ids.size()) {
        throw DataError("mining: embeddings and place_ids lengths differ");
    }
    if (!batch.positions.empty() && batch.positions.size() != batch.embeddings.size()) {
        throw DataError("mining: positions length differs from embeddings");
    }
    if (batch.anchor_index >= batch.embeddings.size()) {
        throw DataError("mining: anchor_index out of range");
    }
}

// Indices of different-place samples, ascending.
std::vector<std::size_t> negative_indices(const MiningBatch& batch) {
    std::vector<std::size_t> out;
    const std::string& anchor_place = batch.place_ids[batch.anchor_index];
    for (std::size_t i = 0; i < batch.place_ids.size(); ++i) {
        if (batch.place_ids[i] != anchor_place) out.push_back(i);
    }
    return out;
}

}  // namespace

std::size_t hardest_negative(const MiningBatch& batch, Metric metric) {
    validate(batch);
    const Embedding& anchor = batch.embeddings[batch.anchor_index];
    const std::string& anchor_place = batch.place_ids[batch.anchor_index];
    bool found = false;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
        if (batch.place_ids[i] == anchor_place) continue;
        double d = distance(anchor, batch.embeddings[i], metric);
        if (!found || d < best_d) {
            found = true;
            best = i;
            best_d = d;
        }
    }
    if (!found) {
        throw MiningError(MiningErrorKind::NoNegative,
                          "no sample from a different place in batch");
    }
    return best;
}

KNearestResult k_nearest_positives(const MiningBatch& batch, std::size_t k, Metric metric) {
    validate(batch);
    if (k == 0) throw DataError("k_nearest_positives: k must be >= 1");
    const Embedding& anchor = batch.embeddings[batch.anchor_index];
    const std::string& anchor_place = batch.place_ids[batch.anchor_index];
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
        if (i == batch.anchor_index || batch.place_ids[i] != anchor_place) continue;
        candidates.emplace_back(distance(anchor, batch.embeddings[i], metric), i);
    }
    if (candidates.empty()) {
        throw MiningError(MiningErrorKind::NoPositive,
                          "anchor is the only sample of its place in batch");
    }
    std::sort(candidates.begin(), candidates.end());  // (distance, index): ties by lowest index
    KNearestResult out;
    out.clamped = candidates.size() < k;
    std::size_t take = std::min(k, candidates.size());
    out.indices.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.indices.push_back(candidates[i].second);
    return out;
}

GeoCandidates geo_candidates(const std::vector<GeoRecord>& records,
                             const GeoRecord& anchor,
                             const GeoNeighborhood& n) {
    if (!(n.potential_positive_radius_m > 0.0) || !(n.definite_negative_radius_m > 0.0) ||
        n.definite_negative_radius_m <= n.potential_positive_radius_m) {
        throw DataError("geo_candidates: need 0 < positive radius < negative radius");
    }
    GeoCandidates out;
    for (const GeoRecord& r : records) {
        if (r.id == anchor.id) continue;
        if (!std::isfinite(r.x_m) || !std::isfinite(r.y_m)) {
            throw DataError("geo_candidates: record " + r.id + " has non-finite position");
        }
        double dx = r.x_m - anchor.x_m;
        double dy = r.y_m - anchor.y_m;
        double d = std::sqrt(dx * dx + dy * dy);
        if (d <= n.potential_positive_radius_m) {
            out.potential_positives.push_back(r.id);
        } else if (d > n.definite_negative_radius_m) {
            out.definite_negatives.push_back(r.id);
        }
    }
    std::sort(out.potential_positives.begin(), out.potential_positives.end());
    std::sort(out.definite_negatives.begin(), out.definite_negatives.end());
    return out;
}

std::string to_string(TupleStrategy s) {
    switch (s) {
        case TupleStrategy::Triplet: return "triplet";
        case TupleStrategy::Trihard: return "trihard";
        case TupleStrategy::Quad: return "quad";
        case TupleStrategy::Msml: return "msml";
    }
    throw DataError("unknown tuple strategy value");
}

TupleStrategy tuple_strategy_from_string(std::string_view s) {
    if (s == "triplet") return TupleStrategy::Triplet;
    if (s == "trihard") return TupleStrategy::Trihard;
    if (s == "quad") return TupleStrategy::Quad;
    if (s == "msml") return TupleStrategy::Msml;
    throw UsageError("unknown tuple strategy name: " + std::string(s));
}

namespace {

TupleDescriptor build_msml(const MiningBatch& batch, Metric metric) {
    // Batch-global selection: the anchor slot carries one end of the hardest
    // positive pair, independent of batch.anchor_index.
    const std::size_t n = batch.embeddings.size();
    bool have_pos = false, have_neg = false;
    std::size_t pa = 0, pb = 0, na = 0, nb = 0;
    double worst_pos = -1.0;
    double best_neg = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = distance(batch.embeddings[i], batch.embeddings[j], metric);
            if (batch.place_ids[i] == batch.place_ids[j]) {
                if (!have_pos || d > worst_pos) {
                    have_pos = true;
                    worst_pos = d;
                    pa = i;
                    pb = j;
                }
            } else {
                if (!have_neg || d < best_neg) {
                    have_neg = true;
                    best_neg = d;
                    na = i;
                    nb = j;
                }
            }
        }
    }
    if (!have_pos) {
        throw MiningError(MiningErrorKind::NoPositivePair, "no same-place pair in batch");
    }
    if (!have_neg) {
        throw MiningError(MiningErrorKind::NoNegativePair, "no cross-place pair in batch");
    }
    TupleDescriptor t;
    t.anchor = pa;
    t.positives = {pb};
    t.negatives = {na, nb};
    return t;
}

}  // namespace

TupleDescriptor build_tuples(const MiningBatch& batch, std::size_t k,
                             TupleStrategy strategy, Metric metric, Rng* rng) {
    validate(batch);
    if (strategy == TupleStrategy::Msml) return build_msml(batch, metric);

    TupleDescriptor t;
    t.anchor = batch.anchor_index;
    switch (strategy) {
        case TupleStrategy::Triplet: {
            if (rng == nullptr) throw DataError("build_tuples: triplet strategy requires an rng");
            KNearestResult pos = k_nearest_positives(batch, 1, metric);
            t.positives = {pos.indices[0]};
            std::vector<std::size_t> negs = negative_indices(batch);
            if (negs.empty()) {
                throw MiningError(MiningErrorKind::NoNegative,
                                  "no sample from a different place in batch");
            }
            int pick = rng->uniform_int(0, static_cast<int>(negs.size()) - 1);
            t.negatives = {negs[static_cast<std::size_t>(pick)]};
            break;
        }
        case TupleStrategy::Trihard: {
            KNearestResult pos = k_nearest_positives(batch, k, metric);
            t.positives = pos.indices;
            t.clamped_k = pos.clamped;
            t.negatives = {hardest_negative(batch, metric)};
            break;
        }
        case TupleStrategy::Quad: {
            KNearestResult pos = k_nearest_positives(batch, k, metric);
            t.positives = pos.indices;
            t.clamped_k = pos.clamped;
            std::size_t n1 = hardest_negative(batch, metric);
            // Second negative: nearest to the anchor among the remaining
            // different-place samples.
            const Embedding& anchor = batch.embeddings[batch.anchor_index];
            bool found = false;
            std::size_t n2 = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i : negative_indices(batch)) {
                if (i == n1) continue;
                double d = distance(anchor, batch.embeddings[i], metric);
                if (!found || d < best_d) {
                    found = true;
                    n2 = i;
                    best_d = d;
                }
            }
            if (!found) {
                throw MiningError(MiningErrorKind::NotEnoughNegatives,
                                  "quad strategy needs at least 2 negatives");
            }
            t.negatives = {n1, n2};
            break;
        }
        case TupleStrategy::Msml:
            break;  // handled above
    }
    return t;
}

}  // namespace quitlab
