#include "quitlab/embedding.hpp"

#include <cmath>

#include "quitlab/errors.hpp"
#include "quitlab/parallel.hpp"

namespace quitlab {

std::string to_string(Metric m) {
    switch (m) {
        case Metric::SquaredL2: return "squared_l2";
        case Metric::L2: return "l2";
    }
    throw DataError("unknown metric value");
}

Metric metric_from_string(std::string_view s) {
    if (s == "squared_l2") return Metric::SquaredL2;
    if (s == "l2") return Metric::L2;
    throw UsageError("unknown metric name: " + std::string(s));
}

double distance(const Embedding& a, const Embedding& b, Metric metric) {
    if (a.size() != b.size()) {
        throw UsageError("distance: dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
            throw UsageError("distance: non-finite coordinate at index " + std::to_string(i));
        }
        double d = a[i] - b[i];
        sum += d * d;
    }
    return metric == Metric::SquaredL2 ? sum : std::sqrt(sum);
}

DistanceMatrix pairwise_distances(const std::vector<Embedding>& as,
                                  const std::vector<Embedding>& bs,
                                  Metric metric) {
    if (as.empty() || bs.empty()) {
        throw UsageError("pairwise_distances: empty embedding list");
    }
    DistanceMatrix m;
    m.rows = as.size();
    m.cols = bs.size();
    m.data.assign(m.rows * m.cols, 0.0);
    parallel_for(m.rows, [&](std::size_t r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            m.data[r * m.cols + c] = distance(as[r], bs[c], metric);
        }
    });
    return m;
}

NormalizeResult l2_normalize(const Embedding& v) {
    double sq = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) throw UsageError("l2_normalize: non-finite coordinate");
        sq += x * x;
    }
    double norm = std::sqrt(sq);
    NormalizeResult out;
    if (norm < kNormalizeEpsilon) {
        out.value = v;
        out.degenerate = true;
        return out;
    }
    out.value.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.value[i] = v[i] / norm;
    out.degenerate = false;
    return out;
}

}  // namespace quitlab
