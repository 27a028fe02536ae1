#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tcmm/memory.hpp"
#include "test_support.hpp"

using namespace tcmm;

namespace {

PseudoLabels make_labels(std::vector<int> l) {
    PseudoLabels p;
    int c = 0;
    for (int x : l) c = std::max(c, x + 1);
    p.labels = std::move(l);
    p.num_clusters = c;
    return p;
}

/// Unit vectors in the plane whose dot with (1, 0) is exactly cos(theta).
Matrix at_similarities(const std::vector<double>& sims) {
    Matrix m(sims.size(), 2);
    for (std::size_t i = 0; i < sims.size(); ++i) {
        m(i, 0) = sims[i];
        m(i, 1) = std::sqrt(1.0 - sims[i] * sims[i]);
    }
    return m;
}

InstanceMemory random_memory(Rng& rng, std::size_t n, std::size_t dim, int clusters, double outlier_rate) {
    const auto f = testing::random_unit_rows(rng, n, dim);
    std::vector<int> l(n);
    for (auto& x : l) x = rng.uniform() < outlier_rate ? kOutlier : static_cast<int>(rng.below(clusters));
    return build_instance_memory(f, make_labels(l));
}

}  // namespace

TEST_CASE("build_instance_memory keeps outliers and checks lengths") {
    Rng rng(1);
    const auto f = testing::random_unit_rows(rng, 5, 3);
    const auto mem = build_instance_memory(f, make_labels({0, 0, 1, -1, 1}));
    CHECK(mem.size() == 5);
    CHECK(mem.labels[3] == kOutlier);
    CHECK(build_instance_memory(Matrix(0, 3), make_labels({})).size() == 0);
    CHECK_THROWS_AS(build_instance_memory(f, make_labels({0, 1})), std::invalid_argument);
}

TEST_CASE("compute_prototypes examples") {
    const auto two = compute_prototypes(build_instance_memory(testing::from_rows({{1, 0}, {0, 1}}), make_labels({0, 0})));
    CHECK(two.prototypes(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(two.prototypes(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));

    const auto single = compute_prototypes(build_instance_memory(testing::from_rows({{0.6, 0.8}}), make_labels({0})));
    CHECK(single.prototypes(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(single.prototypes(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

    const auto three = compute_prototypes(
        build_instance_memory(testing::from_rows({{1, 0}, {0, 1}, {1, 0}}), make_labels({0, 0, 0})));
    CHECK(three.prototypes(0, 0) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-14));
    CHECK(three.prototypes(0, 1) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-14));

    CHECK_THROWS(compute_prototypes(build_instance_memory(testing::from_rows({{1, 0}}), make_labels({-1}))));
}

TEST_CASE("outliers never move a prototype") {
    Rng rng(4);
    auto mem = random_memory(rng, 40, 6, 3, 0.0);
    mem.labels[0] = 0;
    mem.labels[1] = 1;
    mem.labels[2] = 2;
    const auto before = compute_prototypes(mem);
    const auto extra = testing::random_unit_rows(rng, 10, 6);
    InstanceMemory grown;
    grown.features = Matrix(50, 6);
    grown.labels = mem.labels;
    std::copy(mem.features.data().begin(), mem.features.data().end(), grown.features.data().begin());
    std::copy(extra.data().begin(), extra.data().end(), grown.features.data().begin() + 40 * 6);
    grown.labels.resize(50, kOutlier);
    CHECK(compute_prototypes(grown).prototypes == before.prototypes);
}

TEST_CASE("hardest_positive examples") {
    const FeatureVec f_b{1, 0};
    InstanceMemory mem{at_similarities({0.9, 0.2, 0.7}), {0, 0, 0}};
    CHECK(hardest_positive(mem, f_b, 0) == 1);
    InstanceMemory single{at_similarities({0.9, 0.2}), {0, 1}};
    CHECK(hardest_positive(single, f_b, 1) == 1);
    InstanceMemory tie{at_similarities({0.1, 0.5, 0.5}), {1, 0, 0}};
    CHECK(hardest_positive(tie, f_b, 0) == 1);
    CHECK_THROWS(hardest_positive(tie, f_b, 5));
}

TEST_CASE("top_k_negatives examples") {
    const FeatureVec f_b{1, 0};
    InstanceMemory mem{at_similarities({1.0, 0.1, 0.8, 0.4}), {0, 1, -1, 1}};
    CHECK(top_k_negatives(mem, f_b, 0, 2) == std::vector<std::size_t>{2, 3});
    CHECK(top_k_negatives(mem, f_b, 0, 2, OutlierNegatives::Exclude) == std::vector<std::size_t>{3, 1});
    CHECK(top_k_negatives(mem, f_b, 0, 10) == std::vector<std::size_t>{2, 3, 1});
    InstanceMemory none{at_similarities({1.0, 0.5}), {0, 0}};
    CHECK_THROWS(top_k_negatives(none, f_b, 0, 2));
}

TEST_CASE("mining agrees with full-sort oracles") {
    for (std::uint64_t t = 0; t < 100; ++t) {
        Rng rng(derive_seed(31, t));
        const std::size_t n = 2 + rng.below(499);
        // low dimension and coarse coordinates make similarity ties common
        auto mem = random_memory(rng, n, 2 + rng.below(3), 1 + static_cast<int>(rng.below(6)), 0.2);
        if (t % 3 == 0)
            for (auto& v : mem.features.data()) v = std::round(v * 4.0) / 4.0;
        const auto f_b = testing::random_unit(rng, mem.features.cols());
        const int label = mem.labels[rng.below(n)];
        if (label == kOutlier) continue;
        CHECK(hardest_positive(mem, f_b, label) == oracle::hardest_positive(mem, f_b, label));
        const int kappa = 1 + static_cast<int>(rng.below(8));
        for (bool inc : {true, false}) {
            const auto expected = oracle::top_k_negatives(mem, f_b, label, kappa, inc);
            if (expected.empty()) continue;
            CHECK(top_k_negatives(mem, f_b, label, kappa, inc ? OutlierNegatives::Include : OutlierNegatives::Exclude) ==
                  expected);
        }
    }
}

TEST_CASE("outlier candidates only raise the kappa-th negative similarity") {
    for (std::uint64_t t = 0; t < 50; ++t) {
        Rng rng(derive_seed(91, t));
        const auto mem = random_memory(rng, 120, 4, 4, 0.3);
        const auto f_b = testing::random_unit(rng, 4);
        const int kappa = 4;
        const auto with = top_k_negatives(mem, f_b, 0, kappa, OutlierNegatives::Include);
        const auto without = top_k_negatives(mem, f_b, 0, kappa, OutlierNegatives::Exclude);
        REQUIRE(with.size() == static_cast<std::size_t>(kappa));
        REQUIRE(without.size() == static_cast<std::size_t>(kappa));
        for (std::size_t k = 0; k < with.size(); ++k)
            CHECK(dot(mem.features.row(with[k]), f_b) >= dot(mem.features.row(without[k]), f_b));
    }
}

TEST_CASE("momentum endpoints are exact") {
    Rng rng(7);
    const auto f_b = testing::random_unit(rng, 5);
    PrototypeMemory protos{testing::random_unit_rows(rng, 3, 5)};
    const auto before = protos.prototypes;
    momentum_update_prototype(protos, 1, f_b, 1.0);
    CHECK(protos.prototypes == before);
    momentum_update_prototype(protos, 1, f_b, 0.0);
    for (std::size_t k = 0; k < 5; ++k) CHECK(protos.prototypes(1, k) == f_b[k]);
    CHECK(protos.prototypes.row(0)[0] == before.row(0)[0]);

    InstanceMemory mem{testing::random_unit_rows(rng, 4, 5), {0, 0, 1, 1}};
    const auto ins_before = mem.features;
    momentum_update_instance(mem, 2, f_b, 1.0);
    CHECK(mem.features == ins_before);
    momentum_update_instance(mem, 2, f_b, 0.0);
    for (std::size_t k = 0; k < 5; ++k) CHECK(mem.features(2, k) == f_b[k]);
    CHECK_THROWS_AS(momentum_update_prototype(protos, 3, f_b, 0.5), std::out_of_range);
    CHECK_THROWS_AS(momentum_update_instance(mem, 4, f_b, 0.5), std::out_of_range);
}

TEST_CASE("momentum mixing examples") {
    const auto mix = momentum_mix(FeatureVec{1, 0}, FeatureVec{0, 1}, 0.2);
    CHECK(std::abs(mix[0] - 0.2) < 1e-12);
    CHECK(std::abs(mix[1] - 0.8) < 1e-12);

    PrototypeMemory protos{testing::from_rows({{1, 0}})};
    momentum_update_prototype(protos, 0, FeatureVec{0, 1}, 0.2);
    CHECK(protos.prototypes(0, 0) == doctest::Approx(0.2 / std::sqrt(0.68)).epsilon(1e-14));
    CHECK(protos.prototypes(0, 1) == doctest::Approx(0.8 / std::sqrt(0.68)).epsilon(1e-14));
    CHECK(std::abs(protos.prototypes(0, 0) - 0.2425) < 1e-4);

    InstanceMemory mem{testing::from_rows({{0, 1}}), {0}};
    momentum_update_instance(mem, 0, FeatureVec{1, 0}, 0.5);
    CHECK(mem.features(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(mem.features(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
}

TEST_CASE("updated slots stay on the unit sphere") {
    Rng rng(12);
    PrototypeMemory protos{testing::random_unit_rows(rng, 4, 8)};
    InstanceMemory mem{testing::random_unit_rows(rng, 6, 8), {0, 1, 2, 3, 0, 1}};
    for (int step = 0; step < 500; ++step) {
        const auto f_b = testing::random_unit(rng, 8);
        const double mu = rng.uniform();
        momentum_update_prototype(protos, static_cast<int>(rng.below(4)), f_b, mu);
        momentum_update_instance(mem, rng.below(6), f_b, mu);
    }
    for (std::size_t r = 0; r < 4; ++r) CHECK(std::abs(l2_norm(protos.prototypes.row(r)) - 1.0) < 1e-9);
    for (std::size_t r = 0; r < 6; ++r) CHECK(std::abs(l2_norm(mem.features.row(r)) - 1.0) < 1e-9);
}
