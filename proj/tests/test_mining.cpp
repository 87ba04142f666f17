#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "quitlab/embedding.hpp"
#include "quitlab/errors.hpp"
#include "quitlab/geo_record.hpp"
#include "quitlab/mining.hpp"
#include "quitlab/rng.hpp"

using namespace quitlab;

namespace {

MiningBatch random_batch(Rng& rng, std::size_t size, int num_places, std::size_t dim) {
    MiningBatch b;
    for (std::size_t i = 0; i < size; ++i) {
        Embedding v(dim);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        b.embeddings.push_back(std::move(v));
        b.place_ids.push_back("p" + std::to_string(rng.uniform_int(0, num_places - 1)));
    }
    b.anchor_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(size) - 1));
    return b;
}

// Exhaustive scan, written independently of the library's mining loops.
std::size_t brute_hardest_negative(const MiningBatch& b, Metric metric) {
    bool found = false;
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t i = 0; i < b.embeddings.size(); ++i) {
        if (b.place_ids[i] == b.place_ids[b.anchor_index]) continue;
        double d = distance(b.embeddings[b.anchor_index], b.embeddings[i], metric);
        if (!found || d < best_d) {
            found = true;
            best = i;
            best_d = d;
        }
    }
    REQUIRE(found);
    return best;
}

std::vector<std::size_t> brute_k_nearest_positives(const MiningBatch& b, std::size_t k,
                                                   Metric metric) {
    std::vector<std::pair<double, std::size_t>> pos;
    for (std::size_t i = 0; i < b.embeddings.size(); ++i) {
        if (i == b.anchor_index) continue;
        if (b.place_ids[i] != b.place_ids[b.anchor_index]) continue;
        pos.emplace_back(distance(b.embeddings[b.anchor_index], b.embeddings[i], metric), i);
    }
    std::sort(pos.begin(), pos.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pos.size() && i < k; ++i) out.push_back(pos[i].second);
    return out;
}

bool batch_has_negative(const MiningBatch& b) {
    for (const std::string& p : b.place_ids) {
        if (p != b.place_ids[b.anchor_index]) return true;
    }
    return false;
}

bool batch_has_positive(const MiningBatch& b) {
    for (std::size_t i = 0; i < b.place_ids.size(); ++i) {
        if (i != b.anchor_index && b.place_ids[i] == b.place_ids[b.anchor_index]) return true;
    }
    return false;
}

GeoRecord at(double x, double y, const std::string& id) {
    GeoRecord r;
    r.id = id;
    r.features = {0.0};
    r.x_m = x;
    r.y_m = y;
    r.place_id = "p";
    r.split = Split::Database;
    return r;
}

}  // namespace

TEST_CASE("hardest_negative hand cases") {
    MiningBatch b{{{0.0}, {2.0}, {1.0}, {3.0}}, {"A", "B", "B", "B"}, {}, 0};
    CHECK(hardest_negative(b, Metric::SquaredL2) == 2);

    MiningBatch single{{{0.0}, {5.0}}, {"A", "B"}, {}, 0};
    CHECK(hardest_negative(single, Metric::SquaredL2) == 1);

    MiningBatch tie{{{0.0}, {1.0}, {-1.0}}, {"A", "B", "B"}, {}, 0};
    CHECK(hardest_negative(tie, Metric::SquaredL2) == 1);

    MiningBatch none{{{0.0}, {1.0}}, {"A", "A"}, {}, 0};
    CHECK_THROWS_AS(hardest_negative(none, Metric::SquaredL2), MiningError);
    try {
        hardest_negative(none, Metric::SquaredL2);
    } catch (const MiningError& e) {
        CHECK(e.kind == MiningErrorKind::NoNegative);
    }
}

TEST_CASE("k_nearest_positives hand cases") {
    MiningBatch b{{{0.0}, {2.0}, {0.5}, {1.0}, {7.0}}, {"A", "A", "A", "A", "B"}, {}, 0};
    KNearestResult two = k_nearest_positives(b, 2, Metric::SquaredL2);
    CHECK(two.indices == (std::vector<std::size_t>{2, 3}));
    CHECK(!two.clamped);

    KNearestResult all = k_nearest_positives(b, 9, Metric::SquaredL2);
    CHECK(all.indices == (std::vector<std::size_t>{2, 3, 1}));
    CHECK(all.clamped);

    KNearestResult one = k_nearest_positives(b, 1, Metric::SquaredL2);
    CHECK(one.indices == std::vector<std::size_t>{2});

    MiningBatch lonely{{{0.0}, {1.0}}, {"A", "B"}, {}, 0};
    CHECK_THROWS_AS(k_nearest_positives(lonely, 1, Metric::SquaredL2), MiningError);
    try {
        k_nearest_positives(lonely, 1, Metric::SquaredL2);
    } catch (const MiningError& e) {
        CHECK(e.kind == MiningErrorKind::NoPositive);
    }
}

TEST_CASE("positive ties break to the lower index") {
    MiningBatch b{{{0.0}, {1.0}, {-1.0}, {1.0}}, {"A", "A", "A", "A"}, {}, 0};
    KNearestResult r = k_nearest_positives(b, 3, Metric::SquaredL2);
    CHECK(r.indices == (std::vector<std::size_t>{1, 2, 3}));
}

TEST_CASE("miners equal the brute-force scan on random batches") {
    Rng rng(101);
    int checked = 0;
    while (checked < 200) {
        std::size_t size = static_cast<std::size_t>(rng.uniform_int(4, 256));
        MiningBatch b = random_batch(rng, size, rng.uniform_int(2, 6), 3);
        if (!batch_has_negative(b) || !batch_has_positive(b)) continue;
        ++checked;
        Metric metric = (checked % 2 == 0) ? Metric::SquaredL2 : Metric::L2;

        CHECK(hardest_negative(b, metric) == brute_hardest_negative(b, metric));

        std::size_t k = static_cast<std::size_t>(rng.uniform_int(1, 5));
        KNearestResult got = k_nearest_positives(b, k, metric);
        std::vector<std::size_t> want = brute_k_nearest_positives(b, k, metric);
        CHECK(got.indices == want);
        CHECK(got.clamped == (want.size() < k));
    }
}

TEST_CASE("mined indices respect place membership") {
    Rng rng(103);
    for (int t = 0; t < 50; ++t) {
        MiningBatch b = random_batch(rng, 24, 3, 3);
        if (!batch_has_negative(b) || !batch_has_positive(b)) continue;
        TupleDescriptor d = build_tuples(b, 3, TupleStrategy::Trihard, Metric::SquaredL2);
        CHECK(d.anchor == b.anchor_index);
        for (std::size_t p : d.positives) {
            CHECK(p != b.anchor_index);
            CHECK(b.place_ids[p] == b.place_ids[b.anchor_index]);
        }
        for (std::size_t n : d.negatives) {
            CHECK(b.place_ids[n] != b.place_ids[b.anchor_index]);
        }
    }
}

TEST_CASE("geo_candidates distance rule") {
    std::vector<GeoRecord> records{at(0.0, 0.0, "anchor"), at(5.0, 0.0, "near"),
                                   at(0.0, 17.0, "annulus"), at(30.0, 0.0, "far"),
                                   at(0.0, 0.0, "cohabitant")};
    GeoCandidates c = geo_candidates(records, records[0], GeoNeighborhood{});
    CHECK(c.potential_positives == (std::vector<std::string>{"cohabitant", "near"}));
    CHECK(c.definite_negatives == std::vector<std::string>{"far"});
}

TEST_CASE("geo_candidates boundary and validation") {
    // Exactly on a radius: inclusive for positives, exclusive for negatives.
    std::vector<GeoRecord> records{at(0.0, 0.0, "anchor"), at(10.0, 0.0, "edge10"),
                                   at(25.0, 0.0, "edge25")};
    GeoCandidates c = geo_candidates(records, records[0], GeoNeighborhood{});
    CHECK(c.potential_positives == std::vector<std::string>{"edge10"});
    CHECK(c.definite_negatives.empty());

    GeoNeighborhood bad{30.0, 25.0};
    CHECK_THROWS_AS(geo_candidates(records, records[0], bad), DataError);
}

TEST_CASE("build_tuples quad roles") {
    MiningBatch b{{{0.0}, {0.5}, {3.0}, {2.0}}, {"A", "A", "B", "B"}, {}, 0};
    TupleDescriptor d = build_tuples(b, 1, TupleStrategy::Quad, Metric::SquaredL2);
    CHECK(d.negatives == (std::vector<std::size_t>{3, 2}));

    MiningBatch one_neg{{{0.0}, {0.5}, {3.0}}, {"A", "A", "B"}, {}, 0};
    CHECK_THROWS_AS(build_tuples(one_neg, 1, TupleStrategy::Quad, Metric::SquaredL2),
                    MiningError);
    try {
        build_tuples(one_neg, 1, TupleStrategy::Quad, Metric::SquaredL2);
    } catch (const MiningError& e) {
        CHECK(e.kind == MiningErrorKind::NotEnoughNegatives);
    }
}

TEST_CASE("build_tuples trihard composes the two miners") {
    MiningBatch b{{{0.0}, {0.5}, {1.0}, {1.2}, {3.0}}, {"A", "A", "A", "B", "B"}, {}, 0};
    TupleDescriptor d = build_tuples(b, 2, TupleStrategy::Trihard, Metric::SquaredL2);
    CHECK(d.anchor == 0);
    CHECK(d.positives == (std::vector<std::size_t>{1, 2}));
    CHECK(d.negatives == std::vector<std::size_t>{3});
    CHECK(!d.clamped_k);
}

TEST_CASE("triplet negative draw is deterministic under the seed") {
    Rng setup(107);
    MiningBatch b = random_batch(setup, 32, 2, 3);
    while (!batch_has_negative(b) || !batch_has_positive(b)) {
        b = random_batch(setup, 32, 2, 3);
    }
    Rng r1(999);
    Rng r2(999);
    TupleDescriptor d1 = build_tuples(b, 1, TupleStrategy::Triplet, Metric::SquaredL2, &r1);
    TupleDescriptor d2 = build_tuples(b, 1, TupleStrategy::Triplet, Metric::SquaredL2, &r2);
    CHECK(d1.negatives == d2.negatives);
    CHECK(d1.positives == d2.positives);
    CHECK_THROWS_AS(build_tuples(b, 1, TupleStrategy::Triplet, Metric::SquaredL2, nullptr),
                    DataError);
}

TEST_CASE("msml selection is batch-global") {
    // Places: A = {0, 1}, B = {2, 3}. Hardest positive pair is (2, 3) of place
    // B, closest cross pair is (1, 2).
    MiningBatch b{{{0.0}, {1.0}, {1.4}, {9.0}}, {"A", "A", "B", "B"}, {}, 0};
    TupleDescriptor d = build_tuples(b, 1, TupleStrategy::Msml, Metric::SquaredL2);
    CHECK(d.anchor == 2);
    CHECK(d.positives == std::vector<std::size_t>{3});
    CHECK(d.negatives == (std::vector<std::size_t>{1, 2}));

    MiningBatch no_pos_pair{{{0.0}, {1.0}}, {"A", "B"}, {}, 0};
    CHECK_THROWS_AS(build_tuples(no_pos_pair, 1, TupleStrategy::Msml, Metric::SquaredL2),
                    MiningError);

    MiningBatch no_neg_pair{{{0.0}, {1.0}}, {"A", "A"}, {}, 0};
    try {
        build_tuples(no_neg_pair, 1, TupleStrategy::Msml, Metric::SquaredL2);
        CHECK(false);
    } catch (const MiningError& e) {
        CHECK(e.kind == MiningErrorKind::NoNegativePair);
    }
}

TEST_CASE("strategy names round-trip") {
    for (TupleStrategy s : {TupleStrategy::Triplet, TupleStrategy::Trihard, TupleStrategy::Quad,
                            TupleStrategy::Msml}) {
        CHECK(tuple_strategy_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(tuple_strategy_from_string("hardest"), UsageError);
}
