#pragma once

#include "unloc/autograd.hpp"

#include <cstdint>
#include <unordered_map>

namespace unloc {

struct AdamConfig {
    double lr = 1e-4;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Classic Adam with bias-corrected moments. Weight decay is an L2 term
/// folded into the gradient before the moment update.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// Applies one update to every trainable parameter in `params`. Moments
    /// are keyed by parameter name and created on first use.
    void step(const ParamList& params);

    const AdamConfig& config() const { return cfg_; }
    AdamConfig& config() { return cfg_; }
    std::int64_t steps() const { return step_; }

    struct Moments {
        Tensor m, v;
    };
    const std::vector<std::pair<std::string, Moments>>& moments() const { return moments_; }
    /// Restores state (checkpoint resume).
    void restore(std::int64_t step, std::vector<std::pair<std::string, Moments>> moments);

private:
    Moments& moments_for(const Parameter& p);

    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<std::pair<std::string, Moments>> moments_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace unloc
