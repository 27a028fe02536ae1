#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tcmm/linalg.hpp"

namespace tcmm {

/// Indices sorted by descending similarity, ties by ascending index.
std::vector<std::size_t> rank_by_similarity(std::span<const double> sims);

/// Gallery rows ranked by descending dot product with the query.
std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery);

/// Plain (non-interpolated) average precision of one ranking:
/// (1/P) sum over hit positions r of hits_so_far / r.
/// std::nullopt when the gallery holds no positive for this query.
std::optional<double> average_precision(std::span<const std::size_t> ranking, int query_id,
                                        std::span<const int> gallery_ids);

/// cmc[k] = fraction of queries whose first hit sits at rank <= k + 1.
/// Queries without any positive are left out of the fraction.
std::vector<double> cmc_curve(const std::vector<std::vector<std::size_t>>& rankings, std::span<const int> query_ids,
                              std::span<const int> gallery_ids, int k_max);

struct RetrievalMetrics {
    double mean_ap = 0.0;
    std::vector<double> cmc;
    std::vector<std::optional<double>> per_query_ap;
    std::size_t num_queries = 0;
    std::size_t excluded_queries = 0;

    /// {mAP, cmc, num_queries, excluded_queries}
    nlohmann::json to_json() const;
    /// "query,ap" lines; excluded queries are written with an empty ap.
    std::string per_query_csv() const;
};

RetrievalMetrics evaluate_retrieval(const Matrix& query_features, std::span<const int> query_ids,
                                    const Matrix& gallery_features, std::span<const int> gallery_ids, int k_max);

}  // namespace tcmm
