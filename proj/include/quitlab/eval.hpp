#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "quitlab/embedding.hpp"
#include "quitlab/geo_record.hpp"

namespace quitlab {

struct EvalReport {
    std::string method;                     // row label, e.g. the loss name
    std::size_t k = 1;                      // positive-count hyperparameter of the run
    std::map<std::size_t, double> recall_at;
    std::size_t num_queries = 0;
    struct QueryOutcome {
        std::string query_id;
        std::vector<std::string> top_ids;   // ranked, length max(Ns)
        bool correct = false;               // within threshold at the largest N
    };
    std::vector<QueryOutcome> per_query;
    std::string config_hash;
    double distance_threshold_m = 25.0;
};

// Exhaustive exact search: ids of the n nearest database embeddings by
// ascending distance, distance ties broken by id order.
std::vector<std::string> retrieve_top_n(const Embedding& query,
                                        const std::vector<std::pair<std::string, Embedding>>& database,
                                        std::size_t n,
                                        Metric metric = Metric::SquaredL2);

// A query counts correct at N iff any of its top-N retrieved items lies
// within threshold_m (planar Euclidean) of the query position. Parallel over
// queries; per_query is ordered by query index.
EvalReport recall_at_n(const std::vector<GeoRecord>& queries,
                       const std::vector<Embedding>& query_embeddings,
                       const std::vector<GeoRecord>& database,
                       const std::vector<Embedding>& database_embeddings,
                       const std::vector<std::size_t>& ns,
                       double threshold_m = 25.0,
                       Metric metric = Metric::SquaredL2);

// Combined CSV: header method,k,recall@N... from the reports' shared Ns, one
// row per report, recalls printed with four decimals.
std::string reports_to_csv(const std::vector<EvalReport>& reports);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { Json, Csv };

void emit_report(const EvalReport& report, const std::string& path, ReportFormat format);

}  // namespace quitlab
