#pragma once

#include "unloc/autograd.hpp"
#include "unloc/sensors.hpp"

#include <map>

namespace unloc {

/// stable: |dt| e^-a + a + |dr| e^-b + b. paper_literal: e^+a and e^+b.
enum class LossMode { stable, paper_literal };

/// Learnable (alpha, beta) pair per modality, initialized to zero.
struct BalanceFactors {
    BalanceFactors();
    void collect(ParamList& out);
    Parameter& alpha(Modality m) { return alphas[static_cast<std::size_t>(index_of(m))]; }
    Parameter& beta(Modality m) { return betas[static_cast<std::size_t>(index_of(m))]; }
    const Parameter& alpha(Modality m) const { return alphas[static_cast<std::size_t>(index_of(m))]; }
    const Parameter& beta(Modality m) const { return betas[static_cast<std::size_t>(index_of(m))]; }

    std::array<Parameter, 3> alphas, betas;
};

struct PoseLoss {
    Var total;
    double translation_l1 = 0.0;  // |t - t'|_1
    double rotation_l1 = 0.0;     // |wrap(r - r')|_1
};

/// Pose loss for one prediction. Rotations are compared after wrapping their
/// difference into one period of `rotation_period` (2 when angles are scaled
/// by 1/pi, 2pi for radians).
PoseLoss pose_loss(const Var& pred_t, const Var& pred_r, const Tensor& gt_t, const Tensor& gt_r, const Var& alpha,
                   const Var& beta, LossMode mode, double rotation_period);

/// Plain sum over the six sensors in canonical order. Missing sensor -> ConfigError.
Var net_loss(const std::map<SensorId, Var>& per_sensor);

}  // namespace unloc
