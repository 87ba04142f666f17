#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "quitlab/embedding.hpp"
#include "quitlab/geo_record.hpp"

namespace quitlab {

class Rng;

// A batch of embedded samples plus the labels needed for tuple mining.
// positions is optional (empty means absent); when present it holds (x, y)
// meters parallel to embeddings.
struct MiningBatch {
    std::vector<Embedding> embeddings;
    std::vector<std::string> place_ids;
    std::vector<std::pair<double, double>> positions;
    std::size_t anchor_index = 0;
};

struct GeoNeighborhood {
    double potential_positive_radius_m = 10.0;
    double definite_negative_radius_m = 25.0;
};

// Index of the different-place sample nearest to the anchor; ties broken by
// lowest index. Throws MiningError(NoNegative) when every sample shares the
// anchor's place.
std::size_t hardest_negative(const MiningBatch& batch, Metric metric);

struct KNearestResult {
    std::vector<std::size_t> indices;  // ascending distance to anchor
    bool clamped = false;              // fewer than k positives existed
};

// Up to k same-place indices sorted by ascending distance to the anchor,
// excluding the anchor itself; ties by lowest index. Throws
// MiningError(NoPositive) when the anchor is its place's only sample.
KNearestResult k_nearest_positives(const MiningBatch& batch, std::size_t k, Metric metric);

struct GeoCandidates {
    std::vector<std::string> potential_positives;  // sorted ids
    std::vector<std::string> definite_negatives;   // sorted ids
};

// Splits records by ground distance to the anchor: within the positive radius
// they are potential positives, beyond the negative radius definite negatives,
// and the annulus in between belongs to neither set. The anchor record itself
// (matched by id) is excluded.
GeoCandidates geo_candidates(const std::vector<GeoRecord>& records,
                             const GeoRecord& anchor,
                             const GeoNeighborhood& n);

enum class TupleStrategy {
    Triplet,
    Trihard,
    Quad,
    Msml,
};

std::string to_string(TupleStrategy s);
TupleStrategy tuple_strategy_from_string(std::string_view s);

// Mined tuple, expressed as indices into the source batch.
struct TupleDescriptor {
    std::size_t anchor = 0;
    std::vector<std::size_t> positives;  // nearest-first
    std::vector<std::size_t> negatives;  // strategy-dependent roles
    bool clamped_k = false;
};

// Composes the miners for one anchor. Triplet strategy samples its negative
// uniformly and requires rng; the others ignore it. Msml returns the
// batch-global hardest positive pair (anchor, positives[0]) and closest
// cross-place pair (negatives[0], negatives[1]).
TupleDescriptor build_tuples(const MiningBatch& batch, std::size_t k,
                             TupleStrategy strategy, Metric metric,
                             Rng* rng = nullptr);

}  // namespace quitlab
