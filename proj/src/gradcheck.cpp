#include "unloc/gradcheck.hpp"

#include "unloc/init.hpp"
#include "unloc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace unloc {

namespace {

std::vector<Index> pick_coords(Index n, Index cap, Rng& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    if (cap > 0 && cap < n) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(cap));
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

}  // namespace

GradCheckResult gradient_check(const GradOp& op, const std::vector<Tensor>& inputs, const ParamList& params,
                               const GradCheckOptions& opt) {
    Rng rng(opt.seed);
    std::vector<Tensor> work = inputs;

    auto evaluate = [&](bool grad) {
        std::vector<Var> vars;
        vars.reserve(work.size());
        for (const Tensor& t : work) vars.emplace_back(t, grad);
        Var out = op(vars);
        return std::make_pair(vars, out);
    };

    auto [vars, out] = evaluate(true);
    const Tensor proj = normal(out.shape(), 1.0, rng);
    Var loss = dot_const(out, proj);
    Gradients grads = backward(loss);

    auto projected = [&]() {
        auto [v, o] = evaluate(false);
        return o.value().data().dot(proj.data());
    };

    struct Target {
        std::string name;
        Tensor* value;
        Tensor analytic;
    };
    std::vector<Target> targets;
    for (std::size_t i = 0; i < work.size(); ++i) {
        const Tensor* g = grads.of(vars[i]);
        targets.push_back({"input[" + std::to_string(i) + "]", &work[i], g ? *g : Tensor::zeros(work[i].shape())});
    }
    for (Parameter* p : params) {
        if (!p->trainable()) continue;
        const Tensor* g = grads.of(p->var());
        targets.push_back({p->name(), &p->mutable_value(), g ? *g : Tensor::zeros(p->shape())});
    }

    GradCheckResult res;
    for (Target& t : targets) {
        if (opt.tamper) opt.tamper(t.analytic);
        const std::vector<Index> coords = pick_coords(t.value->size(), opt.max_coords_per_tensor, rng);
        Eigen::VectorXd numeric(static_cast<Index>(coords.size()));
        for (std::size_t c = 0; c < coords.size(); ++c) {
            double& x = (*t.value)[coords[c]];
            const double x0 = x;
            x = x0 + opt.eps;
            const double fp = projected();
            x = x0 - opt.eps;
            const double fm = projected();
            x = x0;
            numeric[static_cast<Index>(c)] = (fp - fm) / (2.0 * opt.eps);
        }
        const double floor = 1e-3 * (numeric.size() ? numeric.cwiseAbs().maxCoeff() : 0.0) + 1e-12;
        for (std::size_t c = 0; c < coords.size(); ++c) {
            const double a = t.analytic[coords[c]], n = numeric[static_cast<Index>(c)];
            const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
            if (err > res.max_rel_error || res.worst_index < 0) {
                if (err >= res.max_rel_error) {
                    res.max_rel_error = err;
                    res.worst_tensor = t.name;
                    res.worst_index = coords[c];
                }
            }
        }
        res.coords_checked += static_cast<Index>(coords.size());
    }
    return res;
}

}  // namespace unloc
