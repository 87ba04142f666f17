#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "quitlab/errors.hpp"
#include "quitlab/eval.hpp"
#include "quitlab/rng.hpp"

using namespace quitlab;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/quitlab_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

GeoRecord rec(const std::string& id, double x, double y, const Embedding& f) {
    GeoRecord r;
    r.id = id;
    r.features = f;
    r.x_m = x;
    r.y_m = y;
    r.place_id = id.substr(0, 1);
    r.split = Split::Database;
    return r;
}

}  // namespace

TEST_CASE("retrieve_top_n basics") {
    std::vector<std::pair<std::string, Embedding>> db{
        {"far", {5.0, 0.0}}, {"exact", {1.0, 2.0}}, {"near", {1.0, 2.5}}};
    std::vector<std::string> top = retrieve_top_n({1.0, 2.0}, db, 2);
    CHECK(top == (std::vector<std::string>{"exact", "near"}));

    std::vector<std::string> all = retrieve_top_n({1.0, 2.0}, db, 99);
    CHECK(all == (std::vector<std::string>{"exact", "near", "far"}));

    CHECK_THROWS_AS(retrieve_top_n({1.0}, {}, 1), DataError);
}

TEST_CASE("retrieval ties break by id") {
    std::vector<std::pair<std::string, Embedding>> db{
        {"zeta", {1.0}}, {"alpha", {-1.0}}, {"mid", {0.5}}};
    std::vector<std::string> top = retrieve_top_n({0.0}, db, 3);
    CHECK(top == (std::vector<std::string>{"mid", "alpha", "zeta"}));
}

TEST_CASE("retrieve_top_n matches a full-sort oracle") {
    Rng rng(201);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::pair<std::string, Embedding>> db;
        for (int i = 0; i < 50; ++i) {
            Embedding v(4);
            for (double& x : v) x = rng.uniform(-1.0, 1.0);
            db.emplace_back("item" + std::to_string(i), std::move(v));
        }
        Embedding q(4);
        for (double& x : q) x = rng.uniform(-1.0, 1.0);

        std::vector<std::pair<double, std::string>> oracle;
        for (const auto& [id, emb] : db) {
            oracle.emplace_back(distance(q, emb, Metric::SquaredL2), id);
        }
        std::sort(oracle.begin(), oracle.end());
        std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 50));
        std::vector<std::string> got = retrieve_top_n(q, db, n, Metric::SquaredL2);
        REQUIRE(got.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == oracle[i].second);
    }
}

TEST_CASE("recall is 1 when each query's twin is its nearest neighbor") {
    std::vector<GeoRecord> queries{rec("q1", 0, 0, {0.0, 0.0}), rec("q2", 1000, 0, {9.0, 9.0})};
    std::vector<GeoRecord> database{rec("d1", 3, 0, {0.1, 0.0}), rec("d2", 1003, 0, {9.1, 9.0}),
                                    rec("d3", 500, 500, {5.0, 5.0})};
    EvalReport r = recall_at_n(queries, {queries[0].features, queries[1].features}, database,
                               {database[0].features, database[1].features, database[2].features},
                               {1, 2});
    CHECK(r.recall_at.at(1) == 1.0);
    CHECK(r.recall_at.at(2) == 1.0);
    CHECK(r.num_queries == 2);
    REQUIRE(r.per_query.size() == 2);
    CHECK(r.per_query[0].query_id == "q1");
    CHECK(r.per_query[0].top_ids[0] == "d1");
    CHECK(r.per_query[0].correct);
}

TEST_CASE("recall is 0 when nothing lies within the threshold") {
    std::vector<GeoRecord> queries{rec("q1", 0, 0, {0.0})};
    std::vector<GeoRecord> database{rec("d1", 100, 0, {0.0}), rec("d2", 0, 26, {0.0})};
    EvalReport r = recall_at_n(queries, {queries[0].features}, database,
                               {database[0].features, database[1].features}, {1, 5});
    CHECK(r.recall_at.at(1) == 0.0);
    CHECK(r.recall_at.at(5) == 0.0);
    CHECK(!r.per_query[0].correct);
}

TEST_CASE("boundary: exactly 25 m counts as correct") {
    std::vector<GeoRecord> queries{rec("q1", 0, 0, {0.0})};
    std::vector<GeoRecord> database{rec("d1", 25, 0, {0.0})};
    EvalReport r = recall_at_n(queries, {queries[0].features}, database, {database[0].features},
                               {1});
    CHECK(r.recall_at.at(1) == 1.0);
}

TEST_CASE("recall matches an independent double loop") {
    Rng rng(211);
    std::vector<GeoRecord> queries, database;
    std::vector<Embedding> q_emb, db_emb;
    for (int i = 0; i < 20; ++i) {
        Embedding f{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        queries.push_back(rec("q" + std::to_string(i), rng.uniform(0.0, 200.0),
                              rng.uniform(0.0, 200.0), f));
        q_emb.push_back(f);
    }
    for (int i = 0; i < 100; ++i) {
        Embedding f{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        database.push_back(rec("d" + std::to_string(i), rng.uniform(0.0, 200.0),
                               rng.uniform(0.0, 200.0), f));
        db_emb.push_back(f);
    }
    std::vector<std::size_t> ns{1, 5, 10};
    EvalReport got = recall_at_n(queries, q_emb, database, db_emb, ns);

    for (std::size_t n : ns) {
        int correct = 0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            // Full sort with the same tie rule, then scan the prefix.
            std::vector<std::pair<double, std::string>> ranked;
            for (std::size_t d = 0; d < database.size(); ++d) {
                double dist = 0.0;
                for (std::size_t c = 0; c < 2; ++c) {
                    double diff = q_emb[q][c] - db_emb[d][c];
                    dist += diff * diff;
                }
                ranked.emplace_back(dist, database[d].id);
            }
            std::sort(ranked.begin(), ranked.end());
            bool hit = false;
            for (std::size_t r = 0; r < n && r < ranked.size(); ++r) {
                const GeoRecord* match = nullptr;
                for (const GeoRecord& d : database) {
                    if (d.id == ranked[r].second) match = &d;
                }
                double dx = match->x_m - queries[q].x_m;
                double dy = match->y_m - queries[q].y_m;
                if (std::hypot(dx, dy) <= 25.0) hit = true;
            }
            if (hit) ++correct;
        }
        CHECK(got.recall_at.at(n) ==
              static_cast<double>(correct) / static_cast<double>(queries.size()));
    }

    // Monotone in N.
    CHECK(got.recall_at.at(1) <= got.recall_at.at(5));
    CHECK(got.recall_at.at(5) <= got.recall_at.at(10));
}

TEST_CASE("self-retrieval recall is exactly 1") {
    Rng rng(223);
    std::vector<GeoRecord> records;
    std::vector<Embedding> embs;
    for (int i = 0; i < 30; ++i) {
        Embedding f{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        records.push_back(rec("r" + std::to_string(i), rng.uniform(0.0, 1000.0),
                              rng.uniform(0.0, 1000.0), f));
        embs.push_back(f);
    }
    EvalReport r = recall_at_n(records, embs, records, embs, {1, 5, 10});
    CHECK(r.recall_at.at(1) == 1.0);
    CHECK(r.recall_at.at(5) == 1.0);
    CHECK(r.recall_at.at(10) == 1.0);
}

TEST_CASE("recall_at_n input validation") {
    std::vector<GeoRecord> one{rec("a", 0, 0, {0.0})};
    CHECK_THROWS_AS(recall_at_n({}, {}, one, {one[0].features}, {1}), DataError);
    CHECK_THROWS_AS(recall_at_n(one, {one[0].features}, {}, {}, {1}), DataError);
    CHECK_THROWS_AS(recall_at_n(one, {}, one, {one[0].features}, {1}), DataError);
    CHECK_THROWS_AS(recall_at_n(one, {one[0].features}, one, {one[0].features}, {0}), DataError);
    CHECK_THROWS_AS(
        recall_at_n(one, {one[0].features}, one, {one[0].features}, {1}, -5.0), DataError);
}

TEST_CASE("csv fixture row") {
    EvalReport r;
    r.method = "netvlad-analog";
    r.k = 1;
    r.recall_at = {{1, 0.8066}, {5, 0.9088}, {10, 0.9306}};
    std::string csv = reports_to_csv({r});
    CHECK(csv == "method,k,recall@1,recall@5,recall@10\n"
                 "netvlad-analog,1,0.8066,0.9088,0.9306\n");
}

TEST_CASE("csv with no Ns is header-only") {
    EvalReport r;
    r.method = "anything";
    std::string csv = reports_to_csv({r});
    CHECK(csv == "method,k\n");
}

TEST_CASE("csv rejects disagreeing reports") {
    EvalReport a;
    a.method = "a";
    a.recall_at = {{1, 0.5}};
    EvalReport b;
    b.method = "b";
    b.recall_at = {{5, 0.5}};
    CHECK_THROWS_AS(reports_to_csv({a, b}), DataError);
}

TEST_CASE("report json round-trip") {
    EvalReport r;
    r.method = "quit_trihard";
    r.k = 2;
    r.recall_at = {{1, 0.53}, {5, 0.81}, {10, 0.97}};
    r.num_queries = 2;
    r.per_query = {{"q1", {"a", "b"}, true}, {"q2", {"c", "d"}, false}};
    r.config_hash = "00ff00ff00ff00ff";
    r.distance_threshold_m = 25.0;

    EvalReport back = report_from_json(report_to_json(r));
    CHECK(back.method == r.method);
    CHECK(back.k == r.k);
    CHECK(back.recall_at == r.recall_at);
    CHECK(back.num_queries == r.num_queries);
    REQUIRE(back.per_query.size() == 2);
    CHECK(back.per_query[0].query_id == "q1");
    CHECK(back.per_query[0].top_ids == (std::vector<std::string>{"a", "b"}));
    CHECK(back.per_query[0].correct);
    CHECK(!back.per_query[1].correct);
    CHECK(back.config_hash == r.config_hash);
    CHECK(back.distance_threshold_m == r.distance_threshold_m);

    CHECK_THROWS_AS(report_from_json(nlohmann::json{{"method", "x"}}), DataError);
}

TEST_CASE("emit_report writes both formats") {
    EvalReport r;
    r.method = "m";
    r.k = 1;
    r.recall_at = {{1, 1.0}};
    r.num_queries = 1;
    r.per_query = {{"q", {"d"}, true}};

    TempFile csv("report.csv");
    emit_report(r, csv.path, ReportFormat::Csv);
    std::ifstream cin_(csv.path);
    std::string line;
    std::getline(cin_, line);
    CHECK(line == "method,k,recall@1");
    std::getline(cin_, line);
    CHECK(line == "m,1,1.0000");

    TempFile js("report.json");
    emit_report(r, js.path, ReportFormat::Json);
    std::ifstream jin(js.path);
    nlohmann::json parsed = nlohmann::json::parse(jin);
    EvalReport back = report_from_json(parsed);
    CHECK(back.method == "m");
    CHECK(back.recall_at.at(1) == 1.0);
}
