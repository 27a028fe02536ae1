#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tcmm {

enum class GradComponent { ConstraintLoss, PrototypeLoss, AnchorLoss, EncodeBackward };

const char* component_name(GradComponent c);

struct GradcheckOptions {
    std::uint64_t seed = 1;
    int trials = 50;
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Negative control for tests: scales this component's analytic
    /// gradient by 1.01 before comparing.
    std::vector<GradComponent> sabotage;
};

struct ComponentReport {
    GradComponent component;
    double max_relative_error = 0.0;
    std::uint64_t worst_instance_seed = 0;
    int trials = 0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<ComponentReport> components;

    bool all_pass() const;
    /// One PASS/FAIL line per component.
    std::string text() const;
};

/// Central-difference check of every analytic gradient on random instances.
/// Trial t of component c is generated from derive_seed(seed, c, t), so a
/// failing instance can be replayed from its reported seed.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

/// Relative error of one instance; exposed for replaying reported seeds.
double check_instance(GradComponent c, std::uint64_t instance_seed, double step, bool sabotage = false);

}  // namespace tcmm
