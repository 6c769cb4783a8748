#include "unloc/adam.hpp"

#include <cmath>

namespace unloc {

Adam::Moments& Adam::moments_for(const Parameter& p) {
    auto it = index_.find(p.name());
    if (it == index_.end()) {
        index_.emplace(p.name(), moments_.size());
        moments_.push_back({p.name(), {Tensor::zeros(p.shape()), Tensor::zeros(p.shape())}});
        return moments_.back().second;
    }
    Moments& m = moments_[it->second].second;
    if (m.m.shape() != p.shape()) throw DimensionError("adam: moment shape mismatch for " + p.name());
    return m;
}

void Adam::step(const ParamList& params) {
    for (const Parameter* p : params)
        if (p->trainable() && !p->grad.all_finite())
            throw NumericError("adam: non-finite gradient in parameter '" + p->name() + "'");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (Parameter* p : params) {
        if (!p->trainable()) continue;
        Moments& mo = moments_for(*p);
        auto theta = p->mutable_value().data().array();
        const Eigen::ArrayXd g = p->grad.data().array() + cfg_.weight_decay * theta;
        mo.m.data().array() = cfg_.beta1 * mo.m.data().array() + (1.0 - cfg_.beta1) * g;
        mo.v.data().array() = cfg_.beta2 * mo.v.data().array() + (1.0 - cfg_.beta2) * g.square();
        theta -= cfg_.lr * (mo.m.data().array() / bc1) / ((mo.v.data().array() / bc2).sqrt() + cfg_.eps);
    }
}

void Adam::restore(std::int64_t step, std::vector<std::pair<std::string, Moments>> moments) {
    step_ = step;
    moments_ = std::move(moments);
    index_.clear();
    for (std::size_t i = 0; i < moments_.size(); ++i) index_.emplace(moments_[i].first, i);
}

}  // namespace unloc
