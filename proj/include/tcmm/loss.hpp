#pragma once

#include <span>
#include <vector>

#include "tcmm/linalg.hpp"
#include "tcmm/memory.hpp"

namespace tcmm {

using FeatureRefs = std::vector<std::span<const double>>;

/// Value and gradient of one contrastive term. Gradients flow into the
/// image feature, and for the token constraint also into the selected
/// tokens; memory entries and prototypes are constants.
struct LossOutput {
    double value = 0.0;
    FeatureVec grad_image;
    /// Constraint loss only: row 0 is the positive token, rows 1..R the
    /// negatives in selection order. Empty for the memory losses.
    Matrix grad_tokens;
    /// Softmax weights over the participating features, positive first.
    std::vector<double> weights;
};

/// Number of negative patch tokens: max(1, floor(I * alpha)).
int patch_rate(int num_patches, double alpha);

struct TokenSelection {
    std::size_t positive = 0;
    std::vector<std::size_t> negatives;  // ascending similarity
};

/// Positive = most similar token to f_b; negatives = the patch_rate(I, alpha)
/// least similar of the rest. Lowest index wins ties.
TokenSelection select_constraint_tokens(std::span<const double> f_b, const Matrix& tokens, double alpha);

/// -log softmax of the positive over {positive} + negatives, temperature tau.
/// Shared by the token constraint and the anchor loss.
LossOutput softmax_contrast(std::span<const double> f_b, std::span<const double> positive,
                            const FeatureRefs& negatives, double tau);

/// Token constraint: pull f_b toward its best patch token, push it from the
/// R worst. grad_tokens is filled.
LossOutput constraint_loss(std::span<const double> f_b, std::span<const double> pos_token,
                           const FeatureRefs& neg_tokens, double tau);

/// Prototype contrast over all C prototypes; `label` selects the positive.
LossOutput prototype_loss(std::span<const double> f_b, const PrototypeMemory& protos, int label, double tau);

/// Anchor contrast: hardest same-cluster instance against the kappa most
/// similar cross-cluster instances.
LossOutput anchor_loss(std::span<const double> f_b, std::span<const double> positive,
                       const FeatureRefs& negatives, double tau);

struct LossWeights {
    double constraint = 1.0;
    double prototype = 1.0;
    double anchor = 1.0;
};

/// Weighted sum of the three terms. grad_tokens is the constraint's, scaled.
LossOutput total_loss(const LossOutput& constraint, const LossOutput& proto, const LossOutput& anchor,
                      const LossWeights& weights);

}  // namespace tcmm
