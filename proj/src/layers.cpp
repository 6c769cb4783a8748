#include "unloc/layers.hpp"

namespace unloc {

Linear::Linear(const std::string& name, Index in, Index out, Rng& rng)
    : weight(name + ".weight", xavier_uniform({in, out}, in, out, rng)), bias(name + ".bias", Tensor::zeros({out})) {}

LayerNorm::LayerNorm(const std::string& name, Index dim)
    : gamma(name + ".gamma", Tensor::ones({dim})), beta(name + ".beta", Tensor::zeros({dim})) {}

GruParams::GruParams(const std::string& name, Index dim, Rng& rng)
    : input_r(name + ".input_r", dim, dim, rng),
      input_z(name + ".input_z", dim, dim, rng),
      input_n(name + ".input_n", dim, dim, rng),
      hidden_r(name + ".hidden_r", dim, dim, rng),
      hidden_z(name + ".hidden_z", dim, dim, rng),
      hidden_n(name + ".hidden_n", dim, dim, rng) {}

void GruParams::collect(ParamList& out) {
    for (Linear* l : {&input_r, &input_z, &input_n, &hidden_r, &hidden_z, &hidden_n}) l->collect(out);
}

Var gru_cell(const Var& state, const Var& input, const GruParams& p) {
    if (state.shape() != input.shape())
        throw DimensionError("gru_cell: state " + shape_str(state.shape()) + " and input " + shape_str(input.shape()) +
                             " differ");
    const Var r = sigmoid(p.input_r(input) + p.hidden_r(state));
    const Var z = sigmoid(p.input_z(input) + p.hidden_z(state));
    const Var n = tanh(p.input_n(input) + r * p.hidden_n(state));
    // (1 - z) * n + z * h  ==  n + z * (h - n)
    return n + z * (state - n);
}

Conv2d::Conv2d(const std::string& name, Index in, Index out, Index k, int stride_, int padding_, Rng& rng, bool with_bias)
    : kernel(name + ".kernel", xavier_uniform({out, in, k, k}, in * k * k, out * k * k, rng)),
      bias(name + ".bias", Tensor::zeros({out})), stride(stride_), padding(padding_), has_bias(with_bias) {}

Shape Conv2d::output_shape(const Shape& in) const {
    const Shape& ks = kernel.shape();
    if (in.size() != 4 || in[1] != ks[1])
        throw DimensionError("conv2d: input " + shape_str(in) + " incompatible with kernel " + shape_str(ks));
    const Index hp = in[2] + 2 * padding - ks[2], wp = in[3] + 2 * padding - ks[3];
    if (hp < 0 || wp < 0) throw DimensionError("conv2d: non-positive output size");
    return {in[0], ks[0], hp / stride + 1, wp / stride + 1};
}

}  // namespace unloc
