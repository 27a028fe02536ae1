#include "tcmm/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tcmm {

std::vector<std::size_t> rank_by_similarity(std::span<const double> sims) {
    std::vector<std::size_t> order(sims.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
    return order;
}

std::vector<std::size_t> rank_gallery(std::span<const double> query, const Matrix& gallery) {
    if (gallery.rows() == 0) throw std::invalid_argument("rank_gallery: empty gallery");
    std::vector<double> sims(gallery.rows());
    for (std::size_t g = 0; g < gallery.rows(); ++g) sims[g] = dot(query, gallery.row(g));
    return rank_by_similarity(sims);
}

std::optional<double> average_precision(std::span<const std::size_t> ranking, int query_id,
                                        std::span<const int> gallery_ids) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (gallery_ids[ranking[r]] != query_id) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    if (hits == 0) return std::nullopt;
    return sum / static_cast<double>(hits);
}

std::vector<double> cmc_curve(const std::vector<std::vector<std::size_t>>& rankings, std::span<const int> query_ids,
                              std::span<const int> gallery_ids, int k_max) {
    if (rankings.size() != query_ids.size()) throw ShapeError("cmc_curve: rankings vs query ids count");
    if (k_max < 1 || static_cast<std::size_t>(k_max) > gallery_ids.size()) {
        throw std::invalid_argument("cmc_curve: k_max must be in [1, gallery size]");
    }
    std::vector<double> counts(static_cast<std::size_t>(k_max), 0.0);
    std::size_t valid = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        const auto& rk = rankings[q];
        const auto it = std::find_if(rk.begin(), rk.end(), [&](std::size_t g) { return gallery_ids[g] == query_ids[q]; });
        if (it == rk.end()) continue;
        ++valid;
        const auto first = static_cast<std::size_t>(it - rk.begin());
        for (std::size_t k = first; k < counts.size(); ++k) counts[k] += 1.0;
    }
    if (valid == 0) throw std::invalid_argument("cmc_curve: no query has a gallery positive");
    for (auto& c : counts) c /= static_cast<double>(valid);
    return counts;
}

RetrievalMetrics evaluate_retrieval(const Matrix& query_features, std::span<const int> query_ids,
                                    const Matrix& gallery_features, std::span<const int> gallery_ids, int k_max) {
    if (query_features.rows() != query_ids.size()) throw ShapeError("evaluate_retrieval: query ids count");
    if (gallery_features.rows() != gallery_ids.size()) throw ShapeError("evaluate_retrieval: gallery ids count");
    RetrievalMetrics m;
    m.num_queries = query_ids.size();
    std::vector<std::vector<std::size_t>> rankings;
    rankings.reserve(query_ids.size());
    double sum = 0.0;
    for (std::size_t q = 0; q < query_ids.size(); ++q) {
        rankings.push_back(rank_gallery(query_features.row(q), gallery_features));
        auto ap = average_precision(rankings.back(), query_ids[q], gallery_ids);
        if (ap) {
            sum += *ap;
        } else {
            ++m.excluded_queries;
        }
        m.per_query_ap.push_back(ap);
    }
    const auto valid = m.num_queries - m.excluded_queries;
    if (valid == 0) throw std::invalid_argument("evaluate_retrieval: no query has a gallery positive");
    m.mean_ap = sum / static_cast<double>(valid);
    m.cmc = cmc_curve(rankings, query_ids, gallery_ids, k_max);
    return m;
}

nlohmann::json RetrievalMetrics::to_json() const {
    return {{"mAP", mean_ap}, {"cmc", cmc}, {"num_queries", num_queries}, {"excluded_queries", excluded_queries}};
}

std::string RetrievalMetrics::per_query_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "query,ap\n";
    for (std::size_t q = 0; q < per_query_ap.size(); ++q) {
        out << q << ',';
        if (per_query_ap[q]) out << *per_query_ap[q];
        out << '\n';
    }
    return out.str();
}

}  // namespace tcmm
