#include "unloc/objective.hpp"

#include "unloc/ops.hpp"

namespace unloc {

BalanceFactors::BalanceFactors() {
    for (Modality m : {Modality::point_cloud, Modality::image, Modality::radar}) {
        alpha(m) = Parameter("balance.alpha." + std::string(modality_name(m)), Tensor::zeros({1}));
        beta(m) = Parameter("balance.beta." + std::string(modality_name(m)), Tensor::zeros({1}));
    }
}

void BalanceFactors::collect(ParamList& out) {
    for (std::size_t i = 0; i < 3; ++i) out.push_back(&alphas[i]), out.push_back(&betas[i]);
}

PoseLoss pose_loss(const Var& pred_t, const Var& pred_r, const Tensor& gt_t, const Tensor& gt_r, const Var& alpha,
                   const Var& beta, LossMode mode, double rotation_period) {
    if (pred_t.value().size() != 3 || pred_r.value().size() != 3 || gt_t.size() != 3 || gt_r.size() != 3)
        throw DimensionError("pose_loss: translation and rotation must have 3 components");
    if (alpha.value().size() != 1 || beta.value().size() != 1) throw DimensionError("pose_loss: factors must be scalars");
    const Var dt = sum(abs(pred_t - Var(gt_t.reshaped(pred_t.value().shape()))));
    const Var dr = sum(abs(wrap_periodic(pred_r - Var(gt_r.reshaped(pred_r.value().shape())), rotation_period)));
    const double sign = mode == LossMode::stable ? -1.0 : 1.0;
    PoseLoss out;
    out.total = dt * exp(sign * alpha) + alpha + dr * exp(sign * beta) + beta;
    out.translation_l1 = dt.value()[0];
    out.rotation_l1 = dr.value()[0];
    if (!out.total.value().all_finite()) throw NumericError("pose_loss: non-finite loss");
    return out;
}

Var net_loss(const std::map<SensorId, Var>& per_sensor) {
    Var total;
    bool first = true;
    for (SensorId s : kAllSensors) {
        const auto it = per_sensor.find(s);
        if (it == per_sensor.end()) throw ConfigError("net_loss: missing loss for sensor " + std::string(sensor_name(s)));
        total = first ? it->second : total + it->second;
        first = false;
    }
    return total;
}

}  // namespace unloc
