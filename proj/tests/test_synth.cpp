#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tcmm/blob_io.hpp"
#include "tcmm/synth.hpp"
#include "test_support.hpp"

using namespace tcmm;

namespace {

SynthSpec small_spec() {
    SynthSpec s;
    s.num_identities = 2;
    s.samples_per_identity = 3;
    s.patches_per_image = 4;
    s.patch_input_dim = 8;
    s.identity_spread = 0.1;
    s.noise_patch_prob = 0.0;
    s.seed = 7;
    return s;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) { return read_bytes(p); }

}  // namespace

TEST_CASE("generate counts samples and assigns identities identity-major") {
    const auto ds = generate(small_spec());
    REQUIRE(ds.size() == 6);
    std::vector<int> ids;
    for (const auto& s : ds.samples) {
        ids.push_back(s.identity);
        CHECK(s.patches.rows() == 4);
        CHECK(s.patches.cols() == 8);
    }
    CHECK(ids == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(std::none_of(ds.noise_mask.begin(), ds.noise_mask.end(), [](auto m) { return m != 0; }));
}

TEST_CASE("generate is a pure function of its parameters, down to the written bytes") {
    testing::TempDir dir("synth_det");
    const auto a = generate(small_spec());
    const auto b = generate(small_spec());
    CHECK(a.samples == b.samples);
    write_dataset(a, dir.path() / "a");
    write_dataset(b, dir.path() / "b");
    CHECK(file_bytes(dir.path() / "a.f32") == file_bytes(dir.path() / "b.f32"));
    CHECK(file_bytes(dir.path() / "a.json") == file_bytes(dir.path() / "b.json"));

    auto other = small_spec();
    other.seed = 8;
    CHECK(generate(other).samples != a.samples);
}

TEST_CASE("noise patch count per image follows the binomial rate") {
    SynthSpec s;
    s.num_identities = 10;
    s.samples_per_identity = 100;
    s.patches_per_image = 128;
    s.patch_input_dim = 2;
    s.identity_spread = 0.1;
    s.noise_patch_prob = 0.25;
    s.seed = 3;
    const auto ds = generate(s);
    REQUIRE(ds.size() == 1000);
    REQUIRE(ds.noise_mask.size() == 1000 * 128);
    const double total = static_cast<double>(std::count(ds.noise_mask.begin(), ds.noise_mask.end(), 1));
    const double per_image = total / 1000.0;
    // Binomial(128, 0.25) has std sqrt(24) per image; mean over 1000 images
    // has std sqrt(24 / 1000) ~= 0.155. Accept a 4-sigma band.
    CHECK(std::abs(per_image - 32.0) < 4.0 * std::sqrt(24.0 / 1000.0));
}

TEST_CASE("validate names the violated field") {
    const auto expect_field = [](SynthSpec s, const std::string& field) {
        try {
            generate(s);
            FAIL("expected SpecError for " << field);
        } catch (const SpecError& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    auto s = small_spec();
    s.num_identities = 1;
    expect_field(s, "num_identities");
    s = small_spec();
    s.samples_per_identity = 0;
    expect_field(s, "samples_per_identity");
    s = small_spec();
    s.patch_input_dim = 0;
    expect_field(s, "patch_input_dim");
    s = small_spec();
    s.identity_spread = -1.0;
    expect_field(s, "identity_spread");
    s = small_spec();
    s.noise_patch_prob = 1.5;
    expect_field(s, "noise_patch_prob");
}

TEST_CASE("split_query_gallery examples") {
    const auto ds = generate(small_spec());
    const auto split = split_query_gallery(ds, 1, 99);
    CHECK(split.query.size() == 2);
    CHECK(split.gallery.size() == 4);

    std::set<std::size_t> all(split.query.begin(), split.query.end());
    for (auto g : split.gallery) CHECK(all.insert(g).second);
    CHECK(all.size() == ds.size());
    CHECK(std::is_sorted(split.query.begin(), split.query.end()));
    CHECK(std::is_sorted(split.gallery.begin(), split.gallery.end()));

    // one query per identity
    CHECK(ds.samples[split.query[0]].identity == 0);
    CHECK(ds.samples[split.query[1]].identity == 1);

    CHECK_THROWS_AS(split_query_gallery(ds, 3, 99), SpecError);
    const auto again = split_query_gallery(ds, 1, 99);
    CHECK(again.query == split.query);
}

TEST_CASE("dataset round-trips through disk at float32 precision") {
    testing::TempDir dir("synth_rt");
    auto spec = small_spec();
    spec.noise_patch_prob = 0.3;
    const auto ds = generate(spec);
    write_dataset(ds, dir.path() / "ds");
    const auto back = read_dataset(dir.path() / "ds");
    CHECK(back.spec == ds.spec);
    REQUIRE(back.size() == ds.size());
    CHECK(back.noise_mask.empty());
    for (std::size_t s = 0; s < ds.size(); ++s) {
        CHECK(back.samples[s].identity == ds.samples[s].identity);
        for (std::size_t k = 0; k < ds.samples[s].patches.data().size(); ++k) {
            const double v = ds.samples[s].patches.data()[k];
            CHECK(back.samples[s].patches.data()[k] == static_cast<double>(static_cast<float>(v)));
        }
    }
}

TEST_CASE("a truncated blob is rejected with a manifest-vs-blob message") {
    testing::TempDir dir("synth_bad");
    write_dataset(generate(small_spec()), dir.path() / "ds");
    auto bytes = read_bytes(dir.path() / "ds.f32");
    bytes.resize(bytes.size() - 4);
    write_bytes(dir.path() / "ds.f32", bytes);
    try {
        read_dataset(dir.path() / "ds");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("blob length mismatch") != std::string::npos);
    }
    CHECK_THROWS_AS(read_dataset(dir.path() / "missing"), FormatError);
}

TEST_CASE("without noise and spread every patch sits on its identity anchor") {
    auto spec = small_spec();
    spec.identity_spread = 1e-9;
    spec.noise_patch_prob = 0.0;
    const auto ds = generate(spec);
    for (int id = 0; id < spec.num_identities; ++id) {
        const auto& ref = ds.samples[static_cast<std::size_t>(id * spec.samples_per_identity)].patches;
        const auto anchor = l2_normalize(ref.row(0));
        for (const auto& s : ds.samples) {
            if (s.identity != id) continue;
            for (std::size_t i = 0; i < s.patches.rows(); ++i)
                CHECK(dot(l2_normalize(s.patches.row(i)), anchor) > 1.0 - 1e-12);
        }
    }
}
