#pragma once

#include "unloc/gradcheck.hpp"

#include <functional>
#include <string>
#include <vector>

namespace unloc {

/// One differentiable module at a small shape, with its own fixed seed.
struct GradCheckEntry {
    std::string name;
    bool pooling = false;  // max or mean reductions: looser tolerance
    std::function<GradCheckResult(const GradCheckOptions&)> run;

    double tolerance() const { return pooling ? 1e-4 : 1e-5; }
};

struct GradCheckRecord {
    std::string name;
    double tolerance = 0.0;
    GradCheckResult result;
    double seconds = 0.0;
    bool passed = false;
};

/// Every registered differentiable module.
const std::vector<GradCheckEntry>& gradcheck_registry();

/// A linear layer checked with every analytic gradient negated. It must fail.
GradCheckEntry sign_flip_fixture();

/// Runs one entry. A non-finite error counts as a failure.
GradCheckRecord run_gradcheck(const GradCheckEntry& entry, const GradCheckOptions& opt = {});

/// One line: PASS/FAIL, name, error, tolerance, worst tensor, seconds.
std::string format_record(const GradCheckRecord& r);

}  // namespace unloc
