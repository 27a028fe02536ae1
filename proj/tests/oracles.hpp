#pragma once

// Deliberately naive reference implementations used to cross-check the
// library: transitive closure for density clustering, full sorts for the
// mining routines, and direct definition scans for the retrieval metrics.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "tcmm/cluster.hpp"
#include "tcmm/linalg.hpp"
#include "tcmm/memory.hpp"

namespace tcmm::oracle {

struct DensityOracle {
    std::vector<bool> core;
    /// Component id per core point (-1 for non-core), from boolean closure.
    std::vector<int> component;
    /// neighbours[i][j]: d(i, j) <= eps
    std::vector<std::vector<bool>> neighbours;
};

inline DensityOracle density_closure(const Matrix& dist, double eps, int min_pts) {
    const std::size_t n = dist.rows();
    DensityOracle o;
    o.neighbours.assign(n, std::vector<bool>(n, false));
    o.core.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            o.neighbours[i][j] = dist(i, j) <= eps;
            count += o.neighbours[i][j] ? 1 : 0;
        }
        o.core[i] = count >= min_pts;
    }
    // reach[i][j]: core i and core j joined by a chain of core points
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) reach[i][j] = o.core[i] && o.core[j] && (i == j || o.neighbours[i][j]);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    o.component.assign(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!o.core[i] || o.component[i] >= 0) continue;
        for (std::size_t j = 0; j < n; ++j)
            if (reach[i][j]) o.component[j] = next;
        ++next;
    }
    return o;
}

/// True when `labels` is a valid density clustering for the oracle: core
/// points partitioned exactly as the closure (up to renaming), every border
/// point attached to the cluster of one of its core neighbours, and every
/// point with no core neighbour marked as an outlier.
inline bool agrees_with_closure(const DensityOracle& o, const PseudoLabels& labels) {
    const std::size_t n = o.core.size();
    if (labels.size() != n) return false;
    std::map<int, int> comp_to_label, label_to_comp;
    for (std::size_t i = 0; i < n; ++i) {
        if (!o.core[i]) continue;
        const int l = labels.labels[i];
        if (l < 0) return false;
        auto [a, fa] = comp_to_label.emplace(o.component[i], l);
        auto [b, fb] = label_to_comp.emplace(l, o.component[i]);
        if (a->second != l || b->second != o.component[i]) return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (o.core[i]) continue;
        bool has_core_neighbour = false;
        bool matches = false;
        for (std::size_t j = 0; j < n; ++j)
            if (o.core[j] && o.neighbours[i][j]) {
                has_core_neighbour = true;
                matches = matches || labels.labels[i] == comp_to_label.at(o.component[j]);
            }
        if (has_core_neighbour ? !matches : labels.labels[i] != kOutlier) return false;
    }
    // ids dense in [0, C)
    for (int l : labels.labels)
        if (l < kOutlier || l >= labels.num_clusters) return false;
    return static_cast<int>(comp_to_label.size()) == labels.num_clusters;
}

/// Sort every candidate by (key, index) and return the leading indices.
template <typename Less>
std::vector<std::size_t> sorted_indices(std::vector<std::size_t> idx, Less less) {
    std::sort(idx.begin(), idx.end(), less);
    return idx;
}

inline std::vector<double> sims_against(const Matrix& rows, std::span<const double> q) {
    std::vector<double> s(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) s[r] = dot(rows.row(r), q);
    return s;
}

inline std::size_t hardest_positive(const InstanceMemory& mem, std::span<const double> f_b, int label) {
    const auto s = sims_against(mem.features, f_b);
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < mem.size(); ++i)
        if (mem.labels[i] == label) cand.push_back(i);
    return sorted_indices(cand, [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] < s[b] : a < b; })
        .front();
}

inline std::vector<std::size_t> top_k_negatives(const InstanceMemory& mem, std::span<const double> f_b, int label,
                                                int kappa, bool include_outliers) {
    const auto s = sims_against(mem.features, f_b);
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < mem.size(); ++i)
        if (mem.labels[i] != label && (include_outliers || mem.labels[i] != kOutlier)) cand.push_back(i);
    auto all = sorted_indices(cand, [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
    all.resize(std::min(all.size(), static_cast<std::size_t>(kappa)));
    return all;
}

struct TokenChoice {
    std::size_t positive;
    std::vector<std::size_t> negatives;
};

inline TokenChoice select_tokens(std::span<const double> f_b, const Matrix& tokens, std::size_t num_negatives) {
    const auto s = sims_against(tokens, f_b);
    std::vector<std::size_t> idx(tokens.rows());
    std::iota(idx.begin(), idx.end(), 0);
    const auto desc = sorted_indices(idx, [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
    TokenChoice out{desc.front(), {}};
    std::vector<std::size_t> rest(desc.begin() + 1, desc.end());
    const auto asc = sorted_indices(rest, [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] < s[b] : a < b; });
    out.negatives.assign(asc.begin(), asc.begin() + static_cast<std::ptrdiff_t>(num_negatives));
    return out;
}

inline std::vector<std::size_t> rank(std::span<const double> sims) {
    std::vector<std::size_t> idx(sims.size());
    std::iota(idx.begin(), idx.end(), 0);
    return sorted_indices(idx, [&](std::size_t a, std::size_t b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; });
}

/// AP straight from the definition: mean over positives of precision at
/// the positive's rank.
inline std::optional<double> average_precision(std::span<const std::size_t> ranking, int query_id,
                                               std::span<const int> gallery_ids) {
    std::vector<std::size_t> hit_ranks;
    for (std::size_t r = 0; r < ranking.size(); ++r)
        if (gallery_ids[ranking[r]] == query_id) hit_ranks.push_back(r + 1);
    if (hit_ranks.empty()) return std::nullopt;
    double sum = 0.0;
    for (std::size_t k = 0; k < hit_ranks.size(); ++k) {
        // number of hits at rank <= hit_ranks[k], counted afresh
        std::size_t hits = 0;
        for (std::size_t r = 0; r < hit_ranks[k]; ++r) hits += gallery_ids[ranking[r]] == query_id ? 1 : 0;
        sum += static_cast<double>(hits) / static_cast<double>(hit_ranks[k]);
    }
    return sum / static_cast<double>(hit_ranks.size());
}

inline std::vector<double> cmc(const std::vector<std::vector<std::size_t>>& rankings, std::span<const int> query_ids,
                               std::span<const int> gallery_ids, int k_max) {
    std::vector<double> out(static_cast<std::size_t>(k_max), 0.0);
    std::size_t valid = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        std::optional<std::size_t> first;
        for (std::size_t r = 0; r < rankings[q].size() && !first; ++r)
            if (gallery_ids[rankings[q][r]] == query_ids[q]) first = r;
        if (!first) continue;
        ++valid;
        for (int k = 0; k < k_max; ++k)
            if (*first <= static_cast<std::size_t>(k)) out[static_cast<std::size_t>(k)] += 1.0;
    }
    for (auto& v : out) v /= static_cast<double>(valid);
    return out;
}

}  // namespace tcmm::oracle
