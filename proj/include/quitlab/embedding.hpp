#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace quitlab {

using Embedding = std::vector<double>;

enum class Metric {
    SquaredL2,
    L2,
};

std::string to_string(Metric m);
Metric metric_from_string(std::string_view s);

// Norms below this are treated as degenerate by l2_normalize.
inline constexpr double kNormalizeEpsilon = 1e-12;

// Distance between two embeddings under the given metric. Throws UsageError on
// dimension mismatch or non-finite coordinates.
double distance(const Embedding& a, const Embedding& b, Metric metric);

struct DistanceMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// All-pairs distances, parallelized over rows. Entry (r, c) equals
// distance(as[r], bs[c], metric) exactly: each entry comes from the same
// scalar routine, never from a blocked or refactored formula.
DistanceMatrix pairwise_distances(const std::vector<Embedding>& as,
                                  const std::vector<Embedding>& bs,
                                  Metric metric);

struct NormalizeResult {
    Embedding value;
    bool degenerate = false;  // input norm fell below kNormalizeEpsilon
};

// Scales v to unit L2 norm. Degenerate inputs are returned unchanged with the
// flag set rather than divided by a tiny norm.
NormalizeResult l2_normalize(const Embedding& v);

}  // namespace quitlab
