#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "quitlab/losses.hpp"

namespace quitlab {

struct GradCheckOptions {
    std::size_t trials = 100;
    double step = 1e-5;            // central-difference half-step
    double rel_tol = 1e-5;         // loss-level pass bar
    double model_rel_tol = 1e-4;   // through-model pass bar
    double kink_margin = 1e-3;     // distance from hinge/relu/selection kinks
    std::size_t dim = 4;           // embedding dim for loss-level tuples
    std::size_t k = 2;
    Metric metric = Metric::SquaredL2;
    Margins margins;
    std::uint64_t seed = 1;
};

struct GradCheckReport {
    std::string loss;
    bool through_model = false;
    std::size_t trials_run = 0;
    std::size_t redraws = 0;       // batches discarded as kink-adjacent
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Test-fixture hook that tampers with a computed loss before comparison.
using GradMutator = std::function<void(MinedLoss&)>;

// Compares analytic per-embedding gradients of one loss against central
// finite differences of the full mined pipeline on random batches. Batches
// whose hinge arguments, mining selection gaps, or (for L2) distances sit
// within kink_margin of a kink are redrawn, never tested.
GradCheckReport check_loss_gradients(LossKind kind, const GradCheckOptions& opts,
                                     const GradMutator& mutator = nullptr);

// Same comparison for d(batch loss)/d(parameter) through a small MLP,
// exercising the loss chain rule composed with linears, ReLUs, and the final
// normalization.
GradCheckReport check_model_gradients(LossKind kind, const GradCheckOptions& opts);

}  // namespace quitlab
