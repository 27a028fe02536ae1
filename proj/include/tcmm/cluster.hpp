#pragma once

#include <vector>

#include "tcmm/linalg.hpp"

namespace tcmm {

inline constexpr int kOutlier = -1;

/// Cluster ids are dense in [0, num_clusters); kOutlier marks noise points.
struct PseudoLabels {
    std::vector<int> labels;
    int num_clusters = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t num_outliers() const;
};

/// d[i][j] = 1 - <f_i, f_j>, clamped to [0, 2], exact zero diagonal.
/// Rows of `features` must be unit norm (tolerance 1e-6).
Matrix pairwise_cosine_dist(const Matrix& features);

/// Classic DBSCAN over cosine distance.
///  - neighbourhood of i: all j (including i) with d(i, j) <= eps
///  - core point: neighbourhood size >= min_pts
///  - points are scanned in ascending index; a border point keeps the first
///    cluster that reaches it
/// Cluster ids are assigned in order of first appearance.
PseudoLabels dbscan(const Matrix& features, double eps, int min_pts);

/// Same, over a precomputed symmetric distance matrix.
PseudoLabels dbscan_from_distances(const Matrix& dist, double eps, int min_pts);

}  // namespace tcmm
