#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "quitlab/embedding.hpp"
#include "quitlab/errors.hpp"
#include "quitlab/parallel.hpp"
#include "quitlab/rng.hpp"

using namespace quitlab;

TEST_CASE("distance hand values") {
    CHECK(distance({0.0, 0.0}, {0.0, 0.0}, Metric::SquaredL2) == 0.0);
    CHECK(distance({0.0, 0.0}, {3.0, 4.0}, Metric::L2) == 5.0);
    CHECK(distance({1.0, 2.0}, {4.0, 6.0}, Metric::SquaredL2) == 25.0);
}

TEST_CASE("distance is exactly zero for identical inputs") {
    Rng rng(7);
    for (int t = 0; t < 20; ++t) {
        Embedding v(8);
        for (double& x : v) x = rng.uniform(-100.0, 100.0);
        CHECK(distance(v, v, Metric::SquaredL2) == 0.0);
        CHECK(distance(v, v, Metric::L2) == 0.0);
    }
}

TEST_CASE("distance rejects bad input") {
    CHECK_THROWS_AS(distance({1.0}, {1.0, 2.0}, Metric::SquaredL2), UsageError);
    CHECK_THROWS_AS(distance({std::nan("")}, {1.0}, Metric::SquaredL2), UsageError);
    CHECK_THROWS_AS(distance({1.0}, {INFINITY}, Metric::L2), UsageError);
}

TEST_CASE("distance is symmetric bit-for-bit") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        Embedding a(5), b(5);
        for (double& x : a) x = rng.uniform(-10.0, 10.0);
        for (double& x : b) x = rng.uniform(-10.0, 10.0);
        CHECK(distance(a, b, Metric::SquaredL2) == distance(b, a, Metric::SquaredL2));
        CHECK(distance(a, b, Metric::L2) == distance(b, a, Metric::L2));
    }
}

TEST_CASE("triangle inequality holds for the l2 metric") {
    Rng rng(13);
    for (int t = 0; t < 500; ++t) {
        Embedding a(4), b(4), c(4);
        for (double& x : a) x = rng.uniform(-5.0, 5.0);
        for (double& x : b) x = rng.uniform(-5.0, 5.0);
        for (double& x : c) x = rng.uniform(-5.0, 5.0);
        double ab = distance(a, b, Metric::L2);
        double bc = distance(b, c, Metric::L2);
        double ac = distance(a, c, Metric::L2);
        CHECK(ac <= ab + bc + 1e-12);
    }
}

TEST_CASE("pairwise_distances small examples") {
    DistanceMatrix m = pairwise_distances({{0.0}, {1.0}}, {{0.0}, {1.0}}, Metric::SquaredL2);
    CHECK(m.rows == 2);
    CHECK(m.cols == 2);
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(0, 1) == 1.0);
    CHECK(m.at(1, 0) == 1.0);
    CHECK(m.at(1, 1) == 0.0);

    DistanceMatrix one = pairwise_distances({{0.0}}, {{0.0}}, Metric::SquaredL2);
    CHECK(one.at(0, 0) == 0.0);

    DistanceMatrix col = pairwise_distances({{0.0}, {2.0}}, {{1.0}}, Metric::SquaredL2);
    CHECK(col.rows == 2);
    CHECK(col.cols == 1);
    CHECK(col.at(0, 0) == 1.0);
    CHECK(col.at(1, 0) == 1.0);

    CHECK_THROWS_AS(pairwise_distances({}, {{1.0}}, Metric::SquaredL2), UsageError);
}

TEST_CASE("pairwise_distances equals the per-pair loop bit-exactly") {
    Rng rng(17);
    for (int size : {1, 7, 64}) {
        std::vector<Embedding> as(static_cast<std::size_t>(size)), bs(static_cast<std::size_t>(size));
        for (auto& v : as) {
            v.resize(6);
            for (double& x : v) x = rng.uniform(-3.0, 3.0);
        }
        for (auto& v : bs) {
            v.resize(6);
            for (double& x : v) x = rng.uniform(-3.0, 3.0);
        }
        for (Metric metric : {Metric::SquaredL2, Metric::L2}) {
            DistanceMatrix m = pairwise_distances(as, bs, metric);
            for (std::size_t r = 0; r < m.rows; ++r) {
                for (std::size_t c = 0; c < m.cols; ++c) {
                    CHECK(m.at(r, c) == distance(as[r], bs[c], metric));
                }
            }
        }
    }
}

TEST_CASE("pairwise_distances output does not depend on worker count") {
    Rng rng(19);
    std::vector<Embedding> as(33, Embedding(4));
    for (auto& v : as) {
        for (double& x : v) x = rng.uniform(-2.0, 2.0);
    }
    set_max_threads(1);
    DistanceMatrix serial = pairwise_distances(as, as, Metric::L2);
    set_max_threads(8);
    DistanceMatrix parallel = pairwise_distances(as, as, Metric::L2);
    set_max_threads(0);
    CHECK(serial.data == parallel.data);
}

TEST_CASE("l2_normalize hand values") {
    NormalizeResult r = l2_normalize({3.0, 4.0});
    CHECK(!r.degenerate);
    CHECK(r.value[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.value[1] == doctest::Approx(0.8).epsilon(1e-15));

    NormalizeResult unit = l2_normalize({1.0, 0.0, 0.0});
    CHECK(!unit.degenerate);
    CHECK(unit.value == Embedding{1.0, 0.0, 0.0});

    NormalizeResult zero = l2_normalize({0.0, 0.0});
    CHECK(zero.degenerate);
    CHECK(zero.value == Embedding{0.0, 0.0});
}

TEST_CASE("l2_normalize produces unit norm on random input") {
    Rng rng(23);
    for (int t = 0; t < 100; ++t) {
        Embedding v(10);
        for (double& x : v) x = rng.uniform(-4.0, 4.0);
        NormalizeResult r = l2_normalize(v);
        REQUIRE(!r.degenerate);
        double sq = 0.0;
        for (double x : r.value) sq += x * x;
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("metric names round-trip") {
    CHECK(metric_from_string(to_string(Metric::SquaredL2)) == Metric::SquaredL2);
    CHECK(metric_from_string(to_string(Metric::L2)) == Metric::L2);
    CHECK_THROWS_AS(metric_from_string("cosine"), UsageError);
}
