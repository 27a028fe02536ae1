#pragma once

#include <vector>

#include "tcmm/cluster.hpp"
#include "tcmm/linalg.hpp"

namespace tcmm {

/// Per-sample feature bank over the whole training set. Outliers are kept
/// (label kOutlier) so they can serve as negatives.
struct InstanceMemory {
    Matrix features;  // N x D, rows unit norm
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// One unit-norm centroid per cluster.
struct PrototypeMemory {
    Matrix prototypes;  // C x D

    std::size_t size() const { return prototypes.rows(); }
};

InstanceMemory build_instance_memory(const Matrix& features, const PseudoLabels& labels);

/// Mean of each cluster's member features, then normalized. Outliers
/// contribute nothing. Throws if no sample is clustered.
PrototypeMemory compute_prototypes(const InstanceMemory& mem);

/// Index of the same-label entry least similar to f_b (lowest index on ties).
std::size_t hardest_positive(const InstanceMemory& mem, std::span<const double> f_b, int label);

enum class OutlierNegatives { Include, Exclude };

/// Indices of the kappa entries most similar to f_b among entries whose label
/// differs from `label`, by descending similarity (lowest index on ties).
/// Outlier entries are candidates unless `outliers` is Exclude. Returns
/// fewer than kappa when the candidate pool is smaller.
std::vector<std::size_t> top_k_negatives(const InstanceMemory& mem, std::span<const double> f_b, int label,
                                         int kappa, OutlierNegatives outliers = OutlierNegatives::Include);

/// p_c <- normalize(mu p_c + (1 - mu) f_b)
void momentum_update_prototype(PrototypeMemory& mem, int cluster, std::span<const double> f_b, double mu);

/// f_n <- normalize(mu f_n + (1 - mu) f_b), slot n only.
void momentum_update_instance(InstanceMemory& mem, std::size_t slot, std::span<const double> f_b, double mu);

/// The unnormalized mix mu a + (1 - mu) b.
FeatureVec momentum_mix(std::span<const double> stored, std::span<const double> fresh, double mu);

}  // namespace tcmm
