#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mhqa/nc/graph.hpp"
#include "mhqa/nc/param_store.hpp"

namespace mhqa::nc {

/// Builds a scalar loss on a fresh graph. Must be deterministic: dropout
/// masks, if any, are held fixed across calls.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = true;

    std::size_t failures() const;
    std::string summary() const;
};

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    /// near-zero gradients from amplifying finite-difference round-off.
    double floor = 1e-5;
    /// Restrict the check to these parameters (all when empty).
    std::vector<std::string> only;
};

double relative_error(double analytic, double numeric, double floor);

/// Runs backward once and compares every parameter gradient with central
/// differences (f(theta + eps) - f(theta - eps)) / 2 eps.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& options = {});

/// Compares the gradients already stored in `params` against central
/// differences, without running backward first.
GradCheckReport compare_gradients(const LossBuilder& build, ParamStore& params,
                                  const GradCheckOptions& options = {});

}  // namespace mhqa::nc
