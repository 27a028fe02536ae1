#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "tcmm/linalg.hpp"

namespace tcmm {

/// Invalid dataset parameters. what() names the offending field.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SynthSpec {
    int num_identities = 0;
    int samples_per_identity = 0;
    int patches_per_image = 0;
    int patch_input_dim = 0;
    double identity_spread = 0.0;   // within-identity Gaussian std per coordinate
    double noise_patch_prob = 0.0;  // chance a patch is replaced by N(0, I) noise
    std::uint64_t seed = 0;

    /// Throws SpecError naming the first violated field.
    void validate() const;

    bool operator==(const SynthSpec&) const = default;
};

struct Sample {
    Matrix patches;  // patches_per_image x patch_input_dim
    int identity = 0;

    bool operator==(const Sample&) const = default;
};

struct SynthDataset {
    SynthSpec spec;
    std::vector<Sample> samples;
    /// One flag per (sample, patch), sample-major. Filled by generate() only;
    /// never persisted, so a dataset read from disk has it empty.
    std::vector<std::uint8_t> noise_mask;

    std::size_t size() const { return samples.size(); }
};

/// Draws K unit anchors, then every patch of every sample in sample-major
/// order. Samples are identity-major: sample s has identity s / samples_per_identity.
SynthDataset generate(const SynthSpec& spec);

struct QueryGallerySplit {
    std::vector<std::size_t> query;
    std::vector<std::size_t> gallery;
};

/// Per identity, shuffles its sample indices and takes the first
/// query_per_identity as queries. Both index lists come back ascending.
QueryGallerySplit split_query_gallery(const SynthDataset& ds, int query_per_identity, std::uint64_t seed);

/// Writes `<stem>.json` and `<stem>.f32`.
void write_dataset(const SynthDataset& ds, const std::filesystem::path& stem);
SynthDataset read_dataset(const std::filesystem::path& stem);

}  // namespace tcmm
