#include "tcmm/synth.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tcmm/blob_io.hpp"
#include "tcmm/rng.hpp"

namespace tcmm {

void SynthSpec::validate() const {
    if (num_identities < 2) throw SpecError("num_identities: must be >= 2");
    if (samples_per_identity < 1) throw SpecError("samples_per_identity: must be >= 1");
    if (patches_per_image < 4) throw SpecError("patches_per_image: must be >= 4");
    if (patch_input_dim < 1) throw SpecError("patch_input_dim: must be >= 1");
    if (!(identity_spread >= 0.0)) throw SpecError("identity_spread: must be >= 0");
    if (!(noise_patch_prob >= 0.0 && noise_patch_prob < 1.0)) {
        throw SpecError("noise_patch_prob: must be in [0, 1)");
    }
}

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    const auto k = static_cast<std::size_t>(spec.num_identities);
    const auto spi = static_cast<std::size_t>(spec.samples_per_identity);
    const auto ipatches = static_cast<std::size_t>(spec.patches_per_image);
    const auto dim = static_cast<std::size_t>(spec.patch_input_dim);

    Rng rng(spec.seed);
    std::vector<FeatureVec> anchors;
    anchors.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
        FeatureVec v(dim);
        for (auto& x : v) x = rng.normal();
        // A zero draw is practically impossible; resample rather than keep it.
        while (l2_norm(v) == 0.0) {
            for (auto& x : v) x = rng.normal();
        }
        anchors.push_back(l2_normalize(v));
    }

    SynthDataset ds;
    ds.spec = spec;
    ds.samples.reserve(k * spi);
    ds.noise_mask.reserve(k * spi * ipatches);
    for (std::size_t id = 0; id < k; ++id) {
        for (std::size_t j = 0; j < spi; ++j) {
            Sample s{Matrix(ipatches, dim), static_cast<int>(id)};
            for (std::size_t p = 0; p < ipatches; ++p) {
                auto row = s.patches.row(p);
                const bool noise = rng.uniform() < spec.noise_patch_prob;
                for (std::size_t c = 0; c < dim; ++c) {
                    row[c] = noise ? rng.normal() : anchors[id][c] + spec.identity_spread * rng.normal();
                }
                ds.noise_mask.push_back(noise ? 1 : 0);
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

QueryGallerySplit split_query_gallery(const SynthDataset& ds, int query_per_identity, std::uint64_t seed) {
    if (query_per_identity < 0) throw SpecError("query_per_identity: must be >= 0");
    std::vector<std::vector<std::size_t>> by_id(static_cast<std::size_t>(ds.spec.num_identities));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const int id = ds.samples[i].identity;
        if (id < 0 || id >= ds.spec.num_identities) throw SpecError("sample identity out of range");
        by_id[static_cast<std::size_t>(id)].push_back(i);
    }
    QueryGallerySplit out;
    Rng rng(seed);
    const auto qpi = static_cast<std::size_t>(query_per_identity);
    for (std::size_t id = 0; id < by_id.size(); ++id) {
        auto& members = by_id[id];
        if (members.size() <= qpi) {
            throw SpecError("query_per_identity: identity " + std::to_string(id) + " has only " +
                            std::to_string(members.size()) + " samples, need more than " +
                            std::to_string(qpi));
        }
        rng.shuffle(std::span(members));
        out.query.insert(out.query.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(qpi));
        out.gallery.insert(out.gallery.end(), members.begin() + static_cast<std::ptrdiff_t>(qpi), members.end());
    }
    std::sort(out.query.begin(), out.query.end());
    std::sort(out.gallery.begin(), out.gallery.end());
    return out;
}

void write_dataset(const SynthDataset& ds, const std::filesystem::path& stem) {
    BlobWriter blob;
    for (const auto& s : ds.samples) blob.put_f32(s.patches.data());
    for (const auto& s : ds.samples) blob.put_i32(s.identity);

    const auto& sp = ds.spec;
    nlohmann::json manifest = {
        {"format_version", 1},
        {"num_identities", sp.num_identities},
        {"samples_per_identity", sp.samples_per_identity},
        {"patches_per_image", sp.patches_per_image},
        {"patch_input_dim", sp.patch_input_dim},
        {"identity_spread", sp.identity_spread},
        {"noise_patch_prob", sp.noise_patch_prob},
        {"seed", sp.seed},
        {"num_samples", ds.samples.size()},
    };
    write_pair(stem, std::move(manifest), blob);
}

SynthDataset read_dataset(const std::filesystem::path& stem) {
    auto [m, blob] = read_pair(stem);
    SynthDataset ds;
    try {
        if (m.at("format_version").get<int>() != 1) throw FormatError("unsupported dataset format_version");
        auto& sp = ds.spec;
        sp.num_identities = m.at("num_identities").get<int>();
        sp.samples_per_identity = m.at("samples_per_identity").get<int>();
        sp.patches_per_image = m.at("patches_per_image").get<int>();
        sp.patch_input_dim = m.at("patch_input_dim").get<int>();
        sp.identity_spread = m.at("identity_spread").get<double>();
        sp.noise_patch_prob = m.at("noise_patch_prob").get<double>();
        sp.seed = m.at("seed").get<std::uint64_t>();
        const auto n = m.at("num_samples").get<std::size_t>();
        sp.validate();
        const auto ip = static_cast<std::size_t>(sp.patches_per_image);
        const auto dim = static_cast<std::size_t>(sp.patch_input_dim);
        if (n != static_cast<std::size_t>(sp.num_identities) * static_cast<std::size_t>(sp.samples_per_identity)) {
            throw FormatError("num_samples disagrees with num_identities x samples_per_identity");
        }
        if (blob.remaining() != n * (ip * dim + 1) * 4) {
            throw FormatError("blob size does not match manifest dimensions");
        }
        ds.samples.resize(n);
        for (auto& s : ds.samples) {
            s.patches = Matrix(ip, dim);
            for (auto& x : s.patches.data()) x = blob.f32();
        }
        for (auto& s : ds.samples) {
            s.identity = blob.i32();
            if (s.identity < 0 || s.identity >= sp.num_identities) throw FormatError("identity label out of range");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    } catch (const SpecError& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    }
    return ds;
}

}  // namespace tcmm
