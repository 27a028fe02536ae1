#include "tcmm/gradcheck.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tcmm/encoder.hpp"
#include "tcmm/loss.hpp"
#include "tcmm/rng.hpp"

namespace tcmm {

namespace {

FeatureVec unit_gaussian(Rng& rng, std::size_t dim) {
    FeatureVec v(dim);
    for (auto& x : v) x = rng.normal();
    return l2_normalize(v);
}

Matrix unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
    Matrix m(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto v = unit_gaussian(rng, dim);
        std::copy(v.begin(), v.end(), m.row(r).begin());
    }
    return m;
}

FeatureRefs all_rows(const Matrix& m, std::size_t from = 0) {
    FeatureRefs out;
    for (std::size_t r = from; r < m.rows(); ++r) out.push_back(m.row(r));
    return out;
}

constexpr std::size_t kLossDim = 8;

struct GradPair {
    std::vector<double> analytic;
    std::vector<double> numeric;
};

// f_b followed by the positive and negative tokens, all perturbed.
GradPair constraint_instance(Rng& rng, double h) {
    const std::size_t negs = 1 + rng.below(6);
    const double tau = 0.05 + 0.95 * rng.uniform();
    const auto f_b = unit_gaussian(rng, kLossDim);
    const Matrix tokens = unit_rows(rng, negs + 1, kLossDim);

    auto split_eval = [&](std::span<const double> x) {
        Matrix t(negs + 1, kLossDim);
        std::copy(x.begin() + kLossDim, x.end(), t.data().begin());
        return constraint_loss(x.first(kLossDim), t.row(0), all_rows(t, 1), tau).value;
    };
    std::vector<double> x(f_b);
    x.insert(x.end(), tokens.data().begin(), tokens.data().end());

    const auto out = constraint_loss(f_b, tokens.row(0), all_rows(tokens, 1), tau);
    GradPair g;
    g.analytic = out.grad_image;
    g.analytic.insert(g.analytic.end(), out.grad_tokens.data().begin(), out.grad_tokens.data().end());
    g.numeric = finite_diff_grad(split_eval, x, h);
    return g;
}

GradPair prototype_instance(Rng& rng, double h) {
    const std::size_t c = 2 + rng.below(7);
    const double tau = 0.05 + 0.95 * rng.uniform();
    const auto f_b = unit_gaussian(rng, kLossDim);
    PrototypeMemory protos{unit_rows(rng, c, kLossDim)};
    const int label = static_cast<int>(rng.below(c));
    GradPair g;
    g.analytic = prototype_loss(f_b, protos, label, tau).grad_image;
    g.numeric = finite_diff_grad([&](std::span<const double> x) { return prototype_loss(x, protos, label, tau).value; },
                                 f_b, h);
    return g;
}

GradPair anchor_instance(Rng& rng, double h) {
    const std::size_t k = 1 + rng.below(6);
    const double tau = 0.05 + 0.95 * rng.uniform();
    const auto f_b = unit_gaussian(rng, kLossDim);
    const auto pos = unit_gaussian(rng, kLossDim);
    const Matrix negs = unit_rows(rng, k, kLossDim);
    const auto refs = all_rows(negs);
    GradPair g;
    g.analytic = anchor_loss(f_b, pos, refs, tau).grad_image;
    g.numeric = finite_diff_grad([&](std::span<const double> x) { return anchor_loss(x, pos, refs, tau).value; }, f_b, h);
    return g;
}

// Small encoder: D = 4, d_in = 6, I = 6, Z = 3. The scalar objective is a
// random linear functional of all encoder outputs.
GradPair encoder_instance(Rng& rng, double h) {
    constexpr int d = 4, din = 6, patches_n = 6, parts = 3;
    const EncoderParams params = init_params(d, din, parts, rng.next_u64());
    Matrix patches(patches_n, din);
    for (auto& x : patches.data()) x = rng.normal();
    FeatureVec g_image(d);
    for (auto& x : g_image) x = rng.normal();
    Matrix g_tokens(patches_n, d);
    for (auto& x : g_tokens.data()) x = rng.normal();

    auto flatten = [](const EncoderParams& p) {
        std::vector<double> flat;
        for (const auto* m : p.matrices()) flat.insert(flat.end(), m->data().begin(), m->data().end());
        return flat;
    };
    auto objective = [&](std::span<const double> flat) {
        EncoderParams p = params;
        std::size_t off = 0;
        for (auto* m : p.matrices()) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + m->data().size()), m->data().begin());
            off += m->data().size();
        }
        const auto out = encode(p, patches);
        double v = dot(g_image, out.image_feature);
        v += dot(g_tokens.data(), out.patch_tokens.data());
        return v;
    };
    GradPair g;
    g.analytic = flatten(encode_backward(params, patches, g_image, g_tokens));
    g.numeric = finite_diff_grad(objective, flatten(params), h);
    return g;
}

}  // namespace

const char* component_name(GradComponent c) {
    switch (c) {
        case GradComponent::ConstraintLoss: return "constraint_loss";
        case GradComponent::PrototypeLoss: return "prototype_loss";
        case GradComponent::AnchorLoss: return "anchor_loss";
        case GradComponent::EncodeBackward: return "encode_backward";
    }
    return "unknown";
}

double check_instance(GradComponent c, std::uint64_t instance_seed, double step, bool sabotage) {
    Rng rng(instance_seed);
    GradPair g;
    switch (c) {
        case GradComponent::ConstraintLoss: g = constraint_instance(rng, step); break;
        case GradComponent::PrototypeLoss: g = prototype_instance(rng, step); break;
        case GradComponent::AnchorLoss: g = anchor_instance(rng, step); break;
        case GradComponent::EncodeBackward: g = encoder_instance(rng, step); break;
    }
    if (sabotage) {
        for (auto& x : g.analytic) x *= 1.01;
    }
    return relative_error(g.analytic, g.numeric);
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    GradcheckReport report;
    const GradComponent all[] = {GradComponent::ConstraintLoss, GradComponent::PrototypeLoss, GradComponent::AnchorLoss,
                                 GradComponent::EncodeBackward};
    for (const auto c : all) {
        const bool sabotage = std::find(options.sabotage.begin(), options.sabotage.end(), c) != options.sabotage.end();
        ComponentReport rep{c};
        rep.trials = options.trials;
        for (int t = 0; t < options.trials; ++t) {
            const auto s = derive_seed(options.seed, static_cast<std::uint64_t>(c) + 1, static_cast<std::uint64_t>(t));
            const double err = check_instance(c, s, options.step, sabotage);
            if (t == 0 || err > rep.max_relative_error) {
                rep.max_relative_error = err;
                rep.worst_instance_seed = s;
            }
        }
        rep.pass = rep.max_relative_error < options.tolerance;
        report.components.push_back(rep);
    }
    return report;
}

bool GradcheckReport::all_pass() const {
    return std::all_of(components.begin(), components.end(), [](const ComponentReport& r) { return r.pass; });
}

std::string GradcheckReport::text() const {
    std::ostringstream out;
    for (const auto& r : components) {
        char line[256];
        std::snprintf(line, sizeof line, "%s %-16s max_rel_err=%.3e trials=%d worst_instance_seed=%llu\n",
                      r.pass ? "PASS" : "FAIL", component_name(r.component), r.max_relative_error, r.trials,
                      static_cast<unsigned long long>(r.worst_instance_seed));
        out << line;
    }
    return out.str();
}

}  // namespace tcmm
