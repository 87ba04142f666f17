#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "quitlab/embedding.hpp"
#include "quitlab/mining.hpp"

namespace quitlab {

class Rng;

struct Margins {
    double alpha = 0.3;  // relative-distance margin
    double beta = 0.2;   // absolute-distance margin
};

// max(x, 0). The subgradient at exactly 0 is taken as 0 throughout, so
// zero-loss states are true fixed points of gradient descent.
double hinge(double x);

// Value plus per-role analytic gradients of one loss evaluation. Gradient
// vectors are always sized to the embedding dimension and are exactly zero
// when no hinge term involving that role is active.
struct LossResult {
    double value = 0.0;
    int active_terms = 0;              // hinge terms with argument > 0
    Embedding anchor_grad;
    std::vector<Embedding> positive_grads;
    std::vector<Embedding> negative_grads;
    std::vector<double> hinge_args;    // raw arguments, one per hinge term
};

// Explicit tuple for the k-positive loss: a pre-mined anchor, its positives
// nearest-first, and whatever negatives the caller's variant uses.
struct QuintupletTuple {
    Embedding anchor;
    std::vector<Embedding> positives;
    std::vector<Embedding> negatives;
};

LossResult triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n,
                        const Margins& m, Metric metric);

LossResult quadruplet_loss(const Embedding& a, const Embedding& p,
                           const Embedding& n1, const Embedding& n2,
                           const Margins& m, Metric metric);

// Sum over the tuple's positives of h(d(a, p_i) - neg_distance + alpha).
// neg_distance is a realized scalar and is treated as a constant: gradients
// cover the anchor and positives only, negative slots stay zero.
LossResult quit_loss(const QuintupletTuple& t, double neg_distance,
                     const Margins& m, Metric metric);

// A batch-mined loss together with the indices its gradients refer to:
// result.anchor_grad belongs to batch index tuple.anchor, positive_grads[i]
// to tuple.positives[i], negative_grads[j] to tuple.negatives[j].
struct MinedLoss {
    LossResult result;
    TupleDescriptor tuple;
};

// Nearest positive against the mined hardest negative (single hinge).
MinedLoss trihard_loss(const MiningBatch& batch, const Margins& m, Metric metric);

// Batch-global hardest positive pair vs closest cross-place pair; computed
// once per batch, anchor_index is ignored.
MinedLoss msml_loss(const MiningBatch& batch, const Margins& m, Metric metric);

enum class KPolicy {
    ClampToAvailable,  // fewer than k positives: use what exists
    Strict,            // fewer than k positives: error
};

// k nearest positives against the hardest negative's distance; analytic
// gradients over the active hinge terms.
MinedLoss quit_trihard_loss(const MiningBatch& batch, std::size_t k,
                            const Margins& m, Metric metric,
                            KPolicy policy = KPolicy::ClampToAvailable);

// k nearest positives against two mined negatives: a relative term against
// d(a, n1) with margin alpha and an absolute term against d(n1, n2) with
// margin beta.
MinedLoss quit_quad_loss(const MiningBatch& batch, std::size_t k,
                         const Margins& m, Metric metric,
                         KPolicy policy = KPolicy::ClampToAvailable);

enum class LossKind {
    Triplet,
    Quad,
    Trihard,
    Msml,
    QuitTrihard,
    QuitQuad,
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view s);
const std::vector<LossKind>& all_loss_kinds();

// Uniform entry point used by the trainer and gradient checker. rng is only
// consulted by the triplet strategy's random negative draw.
MinedLoss batch_loss(const MiningBatch& batch, LossKind kind, std::size_t k,
                     const Margins& m, Metric metric,
                     KPolicy policy = KPolicy::ClampToAvailable,
                     Rng* rng = nullptr);

namespace detail {
// Accumulates coeff * d(d(x,y))/dx into gx and the mirrored term into gy.
// Every loss routes every distance term through this one primitive so that
// algebraically equal reductions stay bit-identical.
void add_distance_grad(Embedding& gx, Embedding& gy, const Embedding& x,
                       const Embedding& y, double coeff, Metric metric);
}

}  // namespace quitlab
