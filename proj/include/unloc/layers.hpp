#pragma once

#include "unloc/autograd.hpp"
#include "unloc/init.hpp"
#include "unloc/ops.hpp"

#include <string>

namespace unloc {

/// Fully connected layer, Xavier-uniform weights and zero bias.
struct Linear {
    Linear() = default;
    Linear(const std::string& name, Index in, Index out, Rng& rng);

    Var operator()(const Var& x) const { return linear(x, weight.var(), bias.var()); }
    Index in_features() const { return weight.shape()[0]; }
    Index out_features() const { return weight.shape()[1]; }
    void collect(ParamList& out) { out.push_back(&weight), out.push_back(&bias); }

    Parameter weight;  // in x out
    Parameter bias;    // out
};

struct LayerNorm {
    LayerNorm() = default;
    LayerNorm(const std::string& name, Index dim);

    Var operator()(const Var& x) const { return layer_norm(x, gamma.var(), beta.var()); }
    void collect(ParamList& out) { out.push_back(&gamma), out.push_back(&beta); }

    Parameter gamma;
    Parameter beta;
};

/// GRU weights. Gates: r (reset), z (update), n (candidate).
struct GruParams {
    GruParams() = default;
    GruParams(const std::string& name, Index dim, Rng& rng);
    void collect(ParamList& out);

    Linear input_r, input_z, input_n;
    Linear hidden_r, hidden_z, hidden_n;
};

/// r = s(x Wir + h Whr), z = s(x Wiz + h Whz), n = tanh(x Win + r * (h Whn)),
/// h' = (1 - z) * n + z * h. Rows of `state`/`input` are independent cells.
Var gru_cell(const Var& state, const Var& input, const GruParams& p);

struct Conv2d {
    Conv2d() = default;
    Conv2d(const std::string& name, Index in, Index out, Index k, int stride, int padding, Rng& rng, bool with_bias = true);

    Var operator()(const Var& x) const {
        return has_bias ? conv2d(x, kernel.var(), bias.var(), stride, padding) : conv2d(x, kernel.var(), stride, padding);
    }
    void collect(ParamList& out) {
        out.push_back(&kernel);
        if (has_bias) out.push_back(&bias);
    }
    Shape output_shape(const Shape& in) const;

    Parameter kernel;  // out x in x k x k
    Parameter bias;
    int stride = 1;
    int padding = 0;
    bool has_bias = true;
};

}  // namespace unloc
