#include "unloc/slotfilter.hpp"

#include <cmath>

namespace unloc {

void SlotConfig::validate() const {
    if (slots < 1) throw ConfigError("slot filter: need at least one slot");
    if (dim < 1) throw ConfigError("slot filter: dimension must be positive");
    if (iterations < 1) throw ConfigError("slot filter: need at least one iteration");
}

SlotParams::SlotParams(const std::string& name, const SlotConfig& cfg, Rng& rng) : config(cfg) {
    cfg.validate();
    const Index d = cfg.dim;
    key = Parameter(name + ".key", xavier_uniform({d, d}, d, d, rng));
    query = Parameter(name + ".query", xavier_uniform({d, d}, d, d, rng));
    value = Parameter(name + ".value", xavier_uniform({d, d}, d, d, rng));
    mu = Parameter(name + ".mu", normal({d}, 1.0, rng));
    log_sigma = Parameter(name + ".log_sigma", Tensor::zeros({d}));
    gru = GruParams(name + ".gru", d, rng);
    mlp_hidden = Linear(name + ".mlp1", d, d, rng);
    mlp_out = Linear(name + ".mlp2", d, d, rng);
    norm = LayerNorm(name + ".norm", d);
}

void SlotParams::collect(ParamList& out) {
    for (Parameter* p : {&key, &query, &value, &mu, &log_sigma}) out.push_back(p);
    gru.collect(out);
    mlp_hidden.collect(out), mlp_out.collect(out);
    norm.collect(out);
}

Var init_slots(const SlotParams& p, std::uint64_t noise_seed) {
    const Index k = p.config.slots;
    Rng rng(noise_seed);
    const Tensor eps = normal({k, p.config.dim}, 1.0, rng);
    return broadcast_rows(p.mu.var(), k) + broadcast_rows(exp(p.log_sigma.var()), k) * Var(eps);
}

Var attention_step(const Var& inputs, const Var& slots, const SlotParams& p, AttentionTrace* trace,
                   AffinityCounter* counter) {
    const Index d = p.config.dim;
    if (inputs.value().rank() != 2 || inputs.dim(0) == 0) throw EmptyCloudError("attention step: no input tokens");
    if (inputs.dim(1) != d || slots.value().rank() != 2 || slots.dim(1) != d)
        throw DimensionError("attention step: inputs " + shape_str(inputs.value().shape()) + " and slots " +
                             shape_str(slots.value().shape()) + " must both have width " + std::to_string(d));
    const Index n = inputs.dim(0), k = slots.dim(0);

    const Var keys = matmul(inputs, p.key.var());
    const Var queries = matmul(slots, p.query.var());
    const Var values = matmul(inputs, p.value.var());
    const Var alpha = scale(matmul(keys, transpose(queries)), 1.0 / std::sqrt(static_cast<double>(d)));
    const Var gamma = softmax(alpha, p.config.axis == SoftmaxAxis::slots ? 1 : 0);
    const Var w = normalize_columns(gamma);
    const Var beta = matmul(transpose(w), values);
    if (counter) {
        counter->multiplies += 2 * static_cast<std::uint64_t>(n * k * d);
        counter->affinity_entries += static_cast<std::uint64_t>(n * k);
    }
    if (trace) *trace = {alpha, gamma, w, beta};
    return gru_cell(slots, beta, p.gru);
}

Var slot_filter(const Var& tokens, const SlotParams& p, std::uint64_t noise_seed, AffinityCounter* counter) {
    Var slots = init_slots(p, noise_seed);
    for (Index t = 0; t < p.config.iterations; ++t) slots = attention_step(tokens, slots, p, nullptr, counter);
    slots = slots + p.mlp_out(relu(p.mlp_hidden(slots)));
    return mean_rows(p.norm(slots));
}

}  // namespace unloc
