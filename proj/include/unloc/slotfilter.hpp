#pragma once

#include "unloc/layers.hpp"

namespace unloc {

/// Axis of the attention softmax. `slots`: each input distributes its
/// attention over the slots. `inputs`: each slot distributes over the inputs.
enum class SoftmaxAxis { slots, inputs };

struct SlotConfig {
    Index slots = 20;
    Index dim = 1024;
    Index iterations = 3;
    SoftmaxAxis axis = SoftmaxAxis::slots;

    void validate() const;
};

/// Counts the multiplies spent on the N x K affinity and the K x D aggregate.
struct AffinityCounter {
    std::uint64_t multiplies = 0;
    std::uint64_t affinity_entries = 0;
};

struct SlotParams {
    SlotParams() = default;
    SlotParams(const std::string& name, const SlotConfig& cfg, Rng& rng);
    void collect(ParamList& out);

    SlotConfig config;
    Parameter key, query, value;  // D x D, no bias
    Parameter mu, log_sigma;      // D
    GruParams gru;
    Linear mlp_hidden, mlp_out;
    LayerNorm norm;
};

/// slot_i = mu + exp(log_sigma) * eps_i with eps drawn from N(0, I) under `noise_seed`.
Var init_slots(const SlotParams& p, std::uint64_t noise_seed);

/// Intermediate tensors of one attention step, exposed for inspection.
struct AttentionTrace {
    Var affinity;  // alpha, N x K
    Var gamma;     // softmax(alpha)
    Var weights;   // W, columns sum to 1
    Var aggregate; // beta, K x D
};

/// One slot-attention update: affinity, softmax, column normalization,
/// aggregation and GRU update of the slots.
Var attention_step(const Var& inputs, const Var& slots, const SlotParams& p, AttentionTrace* trace = nullptr,
                   AffinityCounter* counter = nullptr);

/// T attention steps from freshly initialized slots, residual MLP, layer
/// normalization and the mean over slots. Returns a length-D vector.
Var slot_filter(const Var& tokens, const SlotParams& p, std::uint64_t noise_seed, AffinityCounter* counter = nullptr);

}  // namespace unloc
