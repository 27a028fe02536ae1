#include "tcmm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tcmm {

int patch_rate(int num_patches, double alpha) {
    if (num_patches < 1) throw std::invalid_argument("patch_rate: patch count must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("patch_rate: alpha must be in (0, 1]");
    // The slack absorbs binary rounding of decimal rates such as 0.075 so that
    // exact products (8 * 0.125) do not floor one short.
    const auto r = static_cast<int>(std::floor(static_cast<double>(num_patches) * alpha + 1e-9));
    return std::max(1, r);
}

TokenSelection select_constraint_tokens(std::span<const double> f_b, const Matrix& tokens, double alpha) {
    const auto n = tokens.rows();
    const auto r = static_cast<std::size_t>(patch_rate(static_cast<int>(n), alpha));
    if (n <= r) {
        throw std::invalid_argument("select_constraint_tokens: " + std::to_string(n) + " tokens cannot supply 1 positive and " +
                                    std::to_string(r) + " negatives");
    }
    std::vector<double> sims(n);
    for (std::size_t i = 0; i < n; ++i) sims[i] = dot(f_b, tokens.row(i));

    TokenSelection sel;
    for (std::size_t i = 1; i < n; ++i) {
        if (sims[i] > sims[sel.positive]) sel.positive = i;
    }
    std::vector<std::size_t> rest;
    rest.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i != sel.positive) rest.push_back(i);
    }
    std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(r), rest.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] < sims[b] || (sims[a] == sims[b] && a < b); });
    rest.resize(r);
    sel.negatives = std::move(rest);
    return sel;
}

namespace {

void check_tau(double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("contrastive loss: tau must be > 0");
}

// -log(exp(s[pos]/tau) / sum_j exp(s[j]/tau)) over members; fills value,
// softmax weights and the image gradient. grad_tokens is left to callers.
LossOutput softmax_cross_entropy(std::span<const double> f_b, const FeatureRefs& members, std::size_t pos, double tau) {
    check_tau(tau);
    if (members.empty()) throw std::invalid_argument("contrastive loss: no participating features");
    const std::size_t m = members.size();
    std::vector<double> logits(m);
    for (std::size_t j = 0; j < m; ++j) logits[j] = dot(f_b, members[j]) / tau;

    const auto top = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    std::vector<double> e(m);
    double tail = 0.0;  // sum of shifted exponentials excluding the max term (which is exactly 1)
    for (std::size_t j = 0; j < m; ++j) {
        e[j] = std::exp(logits[j] - logits[top]);
        if (j != top) tail += e[j];
    }
    const double denom = 1.0 + tail;

    LossOutput out;
    out.value = std::log1p(tail) + (logits[top] - logits[pos]);
    out.weights.resize(m);
    for (std::size_t j = 0; j < m; ++j) out.weights[j] = e[j] / denom;

    out.grad_image.assign(f_b.size(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double coeff = (out.weights[j] - (j == pos ? 1.0 : 0.0)) / tau;
        axpy(coeff, members[j], out.grad_image);
    }
    return out;
}

FeatureRefs with_positive(std::span<const double> positive, const FeatureRefs& negatives) {
    FeatureRefs members;
    members.reserve(negatives.size() + 1);
    members.push_back(positive);
    members.insert(members.end(), negatives.begin(), negatives.end());
    return members;
}

}  // namespace

LossOutput softmax_contrast(std::span<const double> f_b, std::span<const double> positive,
                            const FeatureRefs& negatives, double tau) {
    if (negatives.empty()) throw std::invalid_argument("contrastive loss: at least one negative required");
    return softmax_cross_entropy(f_b, with_positive(positive, negatives), 0, tau);
}

LossOutput constraint_loss(std::span<const double> f_b, std::span<const double> pos_token,
                           const FeatureRefs& neg_tokens, double tau) {
    auto out = softmax_contrast(f_b, pos_token, neg_tokens, tau);
    out.grad_tokens = Matrix(neg_tokens.size() + 1, f_b.size());
    for (std::size_t j = 0; j < out.weights.size(); ++j) {
        const double coeff = (out.weights[j] - (j == 0 ? 1.0 : 0.0)) / tau;
        axpy(coeff, f_b, out.grad_tokens.row(j));
    }
    return out;
}

LossOutput prototype_loss(std::span<const double> f_b, const PrototypeMemory& protos, int label, double tau) {
    if (label < 0 || static_cast<std::size_t>(label) >= protos.size()) {
        throw std::out_of_range("prototype_loss: label " + std::to_string(label) + " outside [0, " +
                                std::to_string(protos.size()) + ")");
    }
    FeatureRefs members;
    members.reserve(protos.size());
    for (std::size_t c = 0; c < protos.size(); ++c) members.push_back(protos.prototypes.row(c));
    return softmax_cross_entropy(f_b, members, static_cast<std::size_t>(label), tau);
}

LossOutput anchor_loss(std::span<const double> f_b, std::span<const double> positive,
                       const FeatureRefs& negatives, double tau) {
    return softmax_contrast(f_b, positive, negatives, tau);
}

LossOutput total_loss(const LossOutput& constraint, const LossOutput& proto, const LossOutput& anchor,
                      const LossWeights& w) {
    if (w.constraint < 0.0 || w.prototype < 0.0 || w.anchor < 0.0) {
        throw std::invalid_argument("total_loss: weights must be >= 0");
    }
    const std::size_t d = constraint.grad_image.size();
    if (proto.grad_image.size() != d || anchor.grad_image.size() != d) throw ShapeError("total_loss: gradient dims differ");

    LossOutput out;
    out.value = w.constraint * constraint.value + w.prototype * proto.value + w.anchor * anchor.value;
    out.grad_image.assign(d, 0.0);
    axpy(w.constraint, constraint.grad_image, out.grad_image);
    axpy(w.prototype, proto.grad_image, out.grad_image);
    axpy(w.anchor, anchor.grad_image, out.grad_image);
    out.grad_tokens = constraint.grad_tokens;
    for (auto& g : out.grad_tokens.data()) g *= w.constraint;
    return out;
}

}  // namespace tcmm
