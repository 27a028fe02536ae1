#pragma once

#include <cstdint>
#include <vector>

#include "tcmm/linalg.hpp"

namespace tcmm {

/// Weights of the toy patch encoder. Every matrix is D x d_in.
struct EncoderParams {
    Matrix w_patch;              // shared per-patch projection -> patch tokens
    Matrix w_cls;                // global head over the mean patch
    std::vector<Matrix> w_part;  // one head per contiguous patch group

    std::size_t feature_dim() const { return w_cls.rows(); }
    std::size_t input_dim() const { return w_cls.cols(); }
    std::size_t num_parts() const { return w_part.size(); }

    /// All matrices in declaration order: w_patch, w_cls, w_part[0..Z).
    std::vector<const Matrix*> matrices() const;
    std::vector<Matrix*> matrices();

    std::size_t num_parameters() const;

    /// Same-shaped zero parameters.
    EncoderParams zeros_like() const;

    bool operator==(const EncoderParams&) const = default;
};

/// Entries i.i.d. N(0, 1/d_in), i.e. std 1/sqrt(d_in). Deterministic in seed.
EncoderParams init_params(int feature_dim, int input_dim, int num_parts, std::uint64_t seed);

struct EncodeOutput {
    FeatureVec image_feature;  // f_b, unit norm
    Matrix patch_tokens;       // I x D, each row unit norm
};

/// [begin, end) patch range of part group z out of num_parts; the last
/// group absorbs the remainder.
std::pair<std::size_t, std::size_t> part_range(std::size_t num_patches, std::size_t num_parts, std::size_t z);

/// token_i = normalize(W_patch x_i)
/// f_b     = normalize(W_cls mean(x) + (1/Z) sum_z W_part[z] mean(x in group z))
EncodeOutput encode(const EncoderParams& params, const Matrix& patches);

/// Gradient of <grad_image, f_b> + sum_i <grad_tokens[i], token_i> with
/// respect to every parameter matrix, through both normalizations.
EncoderParams encode_backward(const EncoderParams& params, const Matrix& patches,
                              std::span<const double> grad_image, const Matrix& grad_tokens);

}  // namespace tcmm
