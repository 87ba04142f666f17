#include "quitlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "quitlab/errors.hpp"
#include "quitlab/parallel.hpp"

namespace quitlab {

std::vector<std::string> retrieve_top_n(
    const Embedding& query,
    const std::vector<std::pair<std::string, Embedding>>& database,
    std::size_t n, Metric metric) {
    if (database.empty()) throw DataError("retrieve_top_n: empty database");
    if (n < 1) throw DataError("retrieve_top_n: n must be >= 1");
    std::vector<std::pair<double, const std::string*>> ranked;
    ranked.reserve(database.size());
    for (const auto& [id, emb] : database) {
        ranked.emplace_back(distance(query, emb, metric), &id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return *a.second < *b.second;
    });
    std::size_t take = std::min(n, ranked.size());
    std::vector<std::string> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(*ranked[i].second);
    return out;
}

EvalReport recall_at_n(const std::vector<GeoRecord>& queries,
                       const std::vector<Embedding>& query_embeddings,
                       const std::vector<GeoRecord>& database,
                       const std::vector<Embedding>& database_embeddings,
                       const std::vector<std::size_t>& ns,
                       double threshold_m, Metric metric) {
    if (queries.empty()) throw DataError("recall_at_n: zero queries");
    if (database.empty()) throw DataError("recall_at_n: empty database");
    if (queries.size() != query_embeddings.size() ||
        database.size() != database_embeddings.size()) {
        throw DataError("recall_at_n: records and embeddings lengths differ");
    }
    if (!(threshold_m > 0.0)) throw DataError("recall_at_n: threshold must be > 0");

    std::size_t max_n = 0;
    for (std::size_t n : ns) {
        if (n < 1) throw DataError("recall_at_n: N values must be >= 1");
        max_n = std::max(max_n, n);
    }

    std::vector<std::pair<std::string, Embedding>> db;
    db.reserve(database.size());
    std::map<std::string, std::pair<double, double>> db_pos;
    for (std::size_t i = 0; i < database.size(); ++i) {
        db.emplace_back(database[i].id, database_embeddings[i]);
        db_pos[database[i].id] = {database[i].x_m, database[i].y_m};
    }

    EvalReport report;
    report.num_queries = queries.size();
    report.distance_threshold_m = threshold_m;
    report.per_query.resize(queries.size());
    std::vector<std::size_t> correct_rank(queries.size());  // 1-based; 0 = never correct

    parallel_for(queries.size(), [&](std::size_t q) {
        EvalReport::QueryOutcome& out = report.per_query[q];
        out.query_id = queries[q].id;
        if (max_n == 0) return;
        out.top_ids = retrieve_top_n(query_embeddings[q], db, max_n, metric);
        std::size_t rank = 0;
        for (std::size_t r = 0; r < out.top_ids.size(); ++r) {
            const auto& [x, y] = db_pos.at(out.top_ids[r]);
            double dx = x - queries[q].x_m;
            double dy = y - queries[q].y_m;
            if (std::sqrt(dx * dx + dy * dy) <= threshold_m) {
                rank = r + 1;
                break;
            }
        }
        correct_rank[q] = rank;
        out.correct = rank != 0;
    });

    for (std::size_t n : ns) {
        std::size_t correct = 0;
        for (std::size_t rank : correct_rank) {
            if (rank != 0 && rank <= n) ++correct;
        }
        report.recall_at[n] =
            static_cast<double>(correct) / static_cast<double>(queries.size());
    }
    return report;
}

namespace {

std::string format_recall(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw DataError("reports_to_csv: no reports");
    std::string header = "method,k";
    for (const auto& [n, recall] : reports[0].recall_at) {
        (void)recall;
        header += ",recall@" + std::to_string(n);
    }
    std::string out = header + "\n";
    for (const EvalReport& r : reports) {
        if (r.recall_at.size() != reports[0].recall_at.size()) {
            throw DataError("reports_to_csv: reports disagree on N values");
        }
        if (r.recall_at.empty()) continue;  // header-only output
        std::string row = r.method + "," + std::to_string(r.k);
        for (const auto& [n, recall] : r.recall_at) {
            if (!reports[0].recall_at.contains(n)) {
                throw DataError("reports_to_csv: reports disagree on N values");
            }
            row += "," + format_recall(recall);
        }
        out += row + "\n";
    }
    return out;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json recall = nlohmann::json::object();
    for (const auto& [n, v] : report.recall_at) recall[std::to_string(n)] = v;
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& q : report.per_query) {
        per_query.push_back(
            {{"query_id", q.query_id}, {"top_ids", q.top_ids}, {"correct", q.correct}});
    }
    return {{"method", report.method},
            {"k", report.k},
            {"recall_at", recall},
            {"num_queries", report.num_queries},
            {"per_query", per_query},
            {"config_hash", report.config_hash},
            {"distance_threshold_m", report.distance_threshold_m}};
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    try {
        report.method = j.at("method").get<std::string>();
        report.k = j.at("k").get<std::size_t>();
        for (const auto& [key, value] : j.at("recall_at").items()) {
            report.recall_at[std::stoul(key)] = value.get<double>();
        }
        report.num_queries = j.at("num_queries").get<std::size_t>();
        for (const nlohmann::json& q : j.at("per_query")) {
            EvalReport::QueryOutcome out;
            out.query_id = q.at("query_id").get<std::string>();
            out.top_ids = q.at("top_ids").get<std::vector<std::string>>();
            out.correct = q.at("correct").get<bool>();
            report.per_query.push_back(std::move(out));
        }
        report.config_hash = j.at("config_hash").get<std::string>();
        report.distance_threshold_m = j.at("distance_threshold_m").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report_from_json: bad payload: ") + e.what());
    }
    return report;
}

void emit_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw DataError("emit_report: cannot open for writing: " + path);
    if (format == ReportFormat::Csv) {
        out << reports_to_csv({report});
    } else {
        out << report_to_json(report).dump(2) << '\n';
    }
    if (!out) throw DataError("emit_report: write failed: " + path);
}

}  // namespace quitlab
