#pragma once

#include "unloc/autograd.hpp"

#include <span>

namespace unloc {

// Differentiable primitives. Each has a hand-written backward; composite
// layers (GRU, MLPs, blocks) are built from these.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

/// x[R x C] + b[C] broadcast over rows.
Var add_rowvec(const Var& x, const Var& b);
/// v[C] -> n x C.
Var broadcast_rows(const Var& v, Index n);

/// y = x.W + b with x[B x N_in], W[N_in x N_out], b[N_out].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var abs(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
/// Sum of x (.) w for a constant weight tensor of the same size.
Var dot_const(const Var& x, const Tensor& w);

/// Softmax of a rank-1 or rank-2 tensor along `axis`, max-subtracted.
Var softmax(const Var& x, int axis);

/// Normalizes each row of x (last axis) to zero mean / unit variance, then
/// applies gamma and beta of length equal to the last dimension.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Column-wise reductions of an R x C matrix to a length-C vector.
Var max_rows(const Var& x);
Var mean_rows(const Var& x);

/// Divides every column of x[R x C] by its sum.
Var normalize_columns(const Var& x);

Var reshape(const Var& x, Shape shape);
Var concat(std::span<const Var> parts);

/// Maps each element into [-period/2, period/2). Piecewise identity, so the
/// gradient passes through unchanged.
Var wrap_periodic(const Var& x, double period);

/// Cross-correlation. x[B,C_in,H,W], kernel[C_out,C_in,kh,kw], optional
/// bias[C_out]. Output spatial size floor((H + 2p - k)/s) + 1.
Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int padding);
Var conv2d(const Var& x, const Var& kernel, int stride, int padding);

/// Parameter-free residual shortcut: spatial subsampling by `stride` and
/// zero-padding of channels up to `out_channels`.
Var subsample_pad_channels(const Var& x, Index out_channels, int stride);

/// Multiply-accumulate counter, incremented by matmul/linear/conv/sparse conv.
/// Thread-local; tests read deltas.
struct MacCounter {
    static std::uint64_t& value();
    static void add(std::uint64_t n) { value() += n; }
};

}  // namespace unloc
