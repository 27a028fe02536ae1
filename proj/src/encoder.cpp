#include "tcmm/encoder.hpp"

#include <cmath>
#include <string>

#include "tcmm/rng.hpp"

namespace tcmm {

std::vector<const Matrix*> EncoderParams::matrices() const {
    std::vector<const Matrix*> out{&w_patch, &w_cls};
    for (const auto& m : w_part) out.push_back(&m);
    return out;
}

std::vector<Matrix*> EncoderParams::matrices() {
    std::vector<Matrix*> out{&w_patch, &w_cls};
    for (auto& m : w_part) out.push_back(&m);
    return out;
}

std::size_t EncoderParams::num_parameters() const {
    std::size_t n = 0;
    for (const auto* m : matrices()) n += m->data().size();
    return n;
}

EncoderParams EncoderParams::zeros_like() const {
    EncoderParams z;
    z.w_patch = Matrix(w_patch.rows(), w_patch.cols());
    z.w_cls = Matrix(w_cls.rows(), w_cls.cols());
    for (const auto& m : w_part) z.w_part.emplace_back(m.rows(), m.cols());
    return z;
}

EncoderParams init_params(int feature_dim, int input_dim, int num_parts, std::uint64_t seed) {
    if (feature_dim < 2) throw std::invalid_argument("init_params: feature_dim must be >= 2");
    if (input_dim < 1) throw std::invalid_argument("init_params: input_dim must be >= 1");
    if (num_parts < 1) throw std::invalid_argument("init_params: num_parts must be >= 1");
    const auto d = static_cast<std::size_t>(feature_dim);
    const auto din = static_cast<std::size_t>(input_dim);
    EncoderParams p;
    p.w_patch = Matrix(d, din);
    p.w_cls = Matrix(d, din);
    p.w_part.assign(static_cast<std::size_t>(num_parts), Matrix(d, din));
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(din));
    for (auto* m : p.matrices()) {
        for (auto& x : m->data()) x = scale * rng.normal();
    }
    return p;
}

std::pair<std::size_t, std::size_t> part_range(std::size_t num_patches, std::size_t num_parts, std::size_t z) {
    const std::size_t width = num_patches / num_parts;
    const std::size_t begin = z * width;
    const std::size_t end = (z + 1 == num_parts) ? num_patches : begin + width;
    return {begin, end};
}

namespace {

void check_shapes(const EncoderParams& params, const Matrix& patches) {
    if (params.w_part.empty()) throw ShapeError("encode: encoder has no part heads");
    if (patches.cols() != params.input_dim()) {
        throw ShapeError("encode: patch dim " + std::to_string(patches.cols()) + " != encoder input dim " +
                         std::to_string(params.input_dim()));
    }
    if (patches.rows() < params.num_parts()) {
        throw ShapeError("encode: " + std::to_string(patches.rows()) + " patches < " +
                         std::to_string(params.num_parts()) + " part groups");
    }
}

FeatureVec mean_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    FeatureVec out(m.cols(), 0.0);
    for (std::size_t r = begin; r < end; ++r) axpy(1.0, m.row(r), out);
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (auto& x : out) x *= inv;
    return out;
}

struct PooledInputs {
    FeatureVec mean_all;
    std::vector<FeatureVec> mean_part;
};

PooledInputs pool(const EncoderParams& params, const Matrix& patches) {
    PooledInputs out;
    out.mean_all = mean_rows(patches, 0, patches.rows());
    for (std::size_t z = 0; z < params.num_parts(); ++z) {
        const auto [b, e] = part_range(patches.rows(), params.num_parts(), z);
        out.mean_part.push_back(mean_rows(patches, b, e));
    }
    return out;
}

FeatureVec image_preactivation(const EncoderParams& params, const PooledInputs& pooled) {
    FeatureVec u = matvec(params.w_cls, pooled.mean_all);
    const double inv_z = 1.0 / static_cast<double>(params.num_parts());
    for (std::size_t z = 0; z < params.num_parts(); ++z) {
        axpy(inv_z, matvec(params.w_part[z], pooled.mean_part[z]), u);
    }
    return u;
}

}  // namespace

EncodeOutput encode(const EncoderParams& params, const Matrix& patches) {
    check_shapes(params, patches);
    EncodeOutput out;
    out.patch_tokens = Matrix(patches.rows(), params.feature_dim());
    for (std::size_t i = 0; i < patches.rows(); ++i) {
        const auto tok = l2_normalize(matvec(params.w_patch, patches.row(i)));
        std::copy(tok.begin(), tok.end(), out.patch_tokens.row(i).begin());
    }
    out.image_feature = l2_normalize(image_preactivation(params, pool(params, patches)));
    return out;
}

EncoderParams encode_backward(const EncoderParams& params, const Matrix& patches,
                              std::span<const double> grad_image, const Matrix& grad_tokens) {
    check_shapes(params, patches);
    if (grad_image.size() != params.feature_dim()) throw ShapeError("encode_backward: grad_image dim mismatch");
    if (grad_tokens.rows() != patches.rows() || grad_tokens.cols() != params.feature_dim()) {
        throw ShapeError("encode_backward: grad_tokens shape mismatch");
    }
    EncoderParams grad = params.zeros_like();

    const auto pooled = pool(params, patches);
    const auto g_u = normalize_backward(image_preactivation(params, pooled), grad_image);
    add_outer(grad.w_cls, 1.0, g_u, pooled.mean_all);
    const double inv_z = 1.0 / static_cast<double>(params.num_parts());
    for (std::size_t z = 0; z < params.num_parts(); ++z) {
        add_outer(grad.w_part[z], inv_z, g_u, pooled.mean_part[z]);
    }

    for (std::size_t i = 0; i < patches.rows(); ++i) {
        const auto g_tok = grad_tokens.row(i);
        bool any = false;
        for (double g : g_tok) any = any || g != 0.0;
        if (!any) continue;
        const auto v = matvec(params.w_patch, patches.row(i));
        add_outer(grad.w_patch, 1.0, normalize_backward(v, g_tok), patches.row(i));
    }
    return grad;
}

}  // namespace tcmm
