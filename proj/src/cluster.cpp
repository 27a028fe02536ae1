#include "tcmm/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace tcmm {

std::size_t PseudoLabels::num_outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
}

Matrix pairwise_cosine_dist(const Matrix& features) {
    const std::size_t n = features.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double norm = l2_norm(features.row(i));
        if (std::abs(norm - 1.0) > 1e-6) {
            throw std::invalid_argument("pairwise_cosine_dist: feature " + std::to_string(i) +
                                        " is not unit norm (norm " + std::to_string(norm) + ")");
        }
    }
    Matrix d(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::clamp(1.0 - dot(features.row(i), features.row(j)), 0.0, 2.0);
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

PseudoLabels dbscan_from_distances(const Matrix& dist, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    if (dist.rows() != dist.cols()) throw ShapeError("dbscan: distance matrix must be square");

    const std::size_t n = dist.rows();
    constexpr int kUnvisited = -2;
    PseudoLabels out;
    out.labels.assign(n, kUnvisited);
    if (n == 0) return out;

    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (dist(i, j) <= eps) neighbours[i].push_back(j);
        }
    }
    auto is_core = [&](std::size_t i) { return neighbours[i].size() >= static_cast<std::size_t>(min_pts); };

    int next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != kUnvisited) continue;
        if (!is_core(i)) {
            out.labels[i] = kOutlier;  // may still be claimed later as a border point
            continue;
        }
        const int id = next_id++;
        out.labels[i] = id;
        std::deque<std::size_t> frontier(neighbours[i].begin(), neighbours[i].end());
        while (!frontier.empty()) {
            const std::size_t q = frontier.front();
            frontier.pop_front();
            if (out.labels[q] == kOutlier) {
                out.labels[q] = id;
                continue;
            }
            if (out.labels[q] != kUnvisited) continue;
            out.labels[q] = id;
            if (is_core(q)) frontier.insert(frontier.end(), neighbours[q].begin(), neighbours[q].end());
        }
    }
    out.num_clusters = next_id;
    return out;
}

PseudoLabels dbscan(const Matrix& features, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    return dbscan_from_distances(pairwise_cosine_dist(features), eps, min_pts);
}

}  // namespace tcmm
