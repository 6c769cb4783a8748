#pragma once

#include "unloc/autograd.hpp"

#include <cstdint>
#include <functional>
#include <span>

namespace unloc {

using GradOp = std::function<Var(std::span<const Var>)>;

struct GradCheckOptions {
    double eps = 1e-5;
    std::uint64_t seed = 7;
    /// Per tensor, at most this many coordinates are perturbed (sampled
    /// without replacement). Zero checks every coordinate.
    Index max_coords_per_tensor = 0;
    /// Optional hook to corrupt the analytic gradient (failure fixtures).
    std::function<void(Tensor&)> tamper;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    /// "input[i]" or the parameter name holding the worst coordinate.
    std::string worst_tensor;
    Index worst_index = -1;
    Index coords_checked = 0;
};

/// Compares the analytic gradient of w.op(inputs) (w a random projection of
/// the output) against central differences. Parameters listed in `params`
/// are perturbed in place and restored. The relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-3 * max|n| + 1e-12).
GradCheckResult gradient_check(const GradOp& op, const std::vector<Tensor>& inputs, const ParamList& params = {},
                               const GradCheckOptions& opt = {});

}  // namespace unloc
