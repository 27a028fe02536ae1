#include "tcmm/memory.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tcmm {

namespace {

void store_row(Matrix& m, std::size_t r, std::span<const double> v) {
    if (v.size() != m.cols()) throw ShapeError("memory: feature dim mismatch");
    std::copy(v.begin(), v.end(), m.row(r).begin());
}

void check_mu(double mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("momentum: mu must be in [0, 1]");
}

}  // namespace

InstanceMemory build_instance_memory(const Matrix& features, const PseudoLabels& labels) {
    if (features.rows() != labels.size()) {
        throw ShapeError("build_instance_memory: " + std::to_string(features.rows()) + " features vs " +
                         std::to_string(labels.size()) + " labels");
    }
    InstanceMemory mem;
    mem.features = Matrix(features.rows(), features.cols());
    mem.labels = labels.labels;
    for (std::size_t i = 0; i < features.rows(); ++i) store_row(mem.features, i, l2_normalize(features.row(i)));
    return mem;
}

PrototypeMemory compute_prototypes(const InstanceMemory& mem) {
    int max_label = kOutlier;
    for (int l : mem.labels) max_label = std::max(max_label, l);
    if (max_label < 0) throw std::invalid_argument("compute_prototypes: every sample is an outlier");

    const auto c = static_cast<std::size_t>(max_label) + 1;
    Matrix sums(c, mem.features.cols(), 0.0);
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const int l = mem.labels[i];
        if (l < 0) continue;
        axpy(1.0, mem.features.row(i), sums.row(static_cast<std::size_t>(l)));
        ++counts[static_cast<std::size_t>(l)];
    }
    PrototypeMemory out;
    out.prototypes = Matrix(c, mem.features.cols());
    for (std::size_t k = 0; k < c; ++k) {
        if (counts[k] == 0) throw std::invalid_argument("compute_prototypes: cluster " + std::to_string(k) + " is empty");
        auto row = sums.row(k);
        for (auto& x : row) x /= static_cast<double>(counts[k]);
        store_row(out.prototypes, k, l2_normalize(row));
    }
    return out;
}

std::size_t hardest_positive(const InstanceMemory& mem, std::span<const double> f_b, int label) {
    if (label < 0) throw std::invalid_argument("hardest_positive: anchor label must be >= 0");
    std::size_t best = mem.size();
    double best_sim = 0.0;
    for (std::size_t i = 0; i < mem.size(); ++i) {
        if (mem.labels[i] != label) continue;
        const double s = dot(f_b, mem.features.row(i));
        if (best == mem.size() || s < best_sim) {
            best = i;
            best_sim = s;
        }
    }
    if (best == mem.size()) {
        throw std::invalid_argument("hardest_positive: no memory entry carries label " + std::to_string(label));
    }
    return best;
}

std::vector<std::size_t> top_k_negatives(const InstanceMemory& mem, std::span<const double> f_b, int label,
                                         int kappa, OutlierNegatives outliers) {
    if (label < 0) throw std::invalid_argument("top_k_negatives: anchor label must be >= 0");
    if (kappa < 1) throw std::invalid_argument("top_k_negatives: kappa must be >= 1");
    std::vector<std::size_t> cand;
    std::vector<double> sims(mem.size(), 0.0);
    for (std::size_t i = 0; i < mem.size(); ++i) {
        const int l = mem.labels[i];
        if (l == label) continue;
        if (l == kOutlier && outliers == OutlierNegatives::Exclude) continue;
        sims[i] = dot(f_b, mem.features.row(i));
        cand.push_back(i);
    }
    if (cand.empty()) throw std::invalid_argument("top_k_negatives: no negative candidates");
    const auto k = std::min(cand.size(), static_cast<std::size_t>(kappa));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
    cand.resize(k);
    return cand;
}

FeatureVec momentum_mix(std::span<const double> stored, std::span<const double> fresh, double mu) {
    check_mu(mu);
    if (stored.size() != fresh.size()) throw ShapeError("momentum: feature dim mismatch");
    FeatureVec out(stored.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu * stored[i] + (1.0 - mu) * fresh[i];
    return out;
}

namespace {

// The endpoints are exact: mu = 1 leaves the slot bit-for-bit alone and
// mu = 0 stores f_b verbatim (it is already a unit-norm encoder output).
void momentum_update_row(Matrix& m, std::size_t row, std::span<const double> f_b, double mu) {
    check_mu(mu);
    if (f_b.size() != m.cols()) throw ShapeError("momentum: feature dim mismatch");
    if (mu == 1.0) return;
    if (mu == 0.0) {
        store_row(m, row, f_b);
        return;
    }
    store_row(m, row, l2_normalize(momentum_mix(m.row(row), f_b, mu)));
}

}  // namespace

void momentum_update_prototype(PrototypeMemory& mem, int cluster, std::span<const double> f_b, double mu) {
    if (cluster < 0 || static_cast<std::size_t>(cluster) >= mem.size()) {
        throw std::out_of_range("momentum_update_prototype: cluster " + std::to_string(cluster) + " out of range");
    }
    momentum_update_row(mem.prototypes, static_cast<std::size_t>(cluster), f_b, mu);
}

void momentum_update_instance(InstanceMemory& mem, std::size_t slot, std::span<const double> f_b, double mu) {
    if (slot >= mem.size()) {
        throw std::out_of_range("momentum_update_instance: slot " + std::to_string(slot) + " out of range");
    }
    momentum_update_row(mem.features, slot, f_b, mu);
}

}  // namespace tcmm
