#include "unloc/ops.hpp"

#include <cmath>

namespace unloc {

std::uint64_t& MacCounter::value() {
    thread_local std::uint64_t count = 0;
    return count;
}

namespace {

void require_rank(const Var& x, int r, const char* op) {
    if (x.value().rank() != r)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(r) + ", got shape " +
                             shape_str(x.shape()));
}

void require_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
}

template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
    Tensor y(x.shape(), x.value().data().unaryExpr(f).eval());
    Var xv = x;
    return Var::make(y, {x}, [xv, y, df](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        Tensor& dx = pg.slot(0);
        const auto& xd = xv.value().data();
        for (Index i = 0; i < g.size(); ++i) dx[i] += g[i] * df(xd[i], y[i]);
    });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0))
        throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor y({m, n});
    y.matrix().noalias() = a.value().matrix() * b.value().matrix();
    MacCounter::add(static_cast<std::uint64_t>(m * k * n));
    Var av = a, bv = b;
    return Var::make(std::move(y), {a, b}, [av, bv](const Tensor& g, ParentGrads& pg) {
        const auto gm = g.matrix();
        if (pg.wants(0)) pg.slot(0).matrix().noalias() += gm * bv.value().matrix().transpose();
        if (pg.wants(1)) pg.slot(1).matrix().noalias() += av.value().matrix().transpose() * gm;
    });
}

Var transpose(const Var& a) {
    require_rank(a, 2, "transpose");
    Tensor y({a.dim(1), a.dim(0)});
    y.matrix() = a.value().matrix().transpose();
    return Var::make(std::move(y), {a}, [](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).matrix() += g.matrix().transpose();
    });
}

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    Tensor y(a.shape(), a.value().data() + b.value().data());
    return Var::make(std::move(y), {a, b}, [](const Tensor& g, ParentGrads& pg) {
        pg.add(0, g);
        pg.add(1, g);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    Tensor y(a.shape(), a.value().data() - b.value().data());
    return Var::make(std::move(y), {a, b}, [](const Tensor& g, ParentGrads& pg) {
        pg.add(0, g);
        if (pg.wants(1)) pg.slot(1).data() -= g.data();
    });
}

Var mul(const Var& a, const Var& b) {
    require_same(a, b, "mul");
    Tensor y(a.shape(), a.value().data().cwiseProduct(b.value().data()));
    Var av = a, bv = b;
    return Var::make(std::move(y), {a, b}, [av, bv](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data() += g.data().cwiseProduct(bv.value().data());
        if (pg.wants(1)) pg.slot(1).data() += g.data().cwiseProduct(av.value().data());
    });
}

Var scale(const Var& a, double s) {
    Tensor y(a.shape(), a.value().data() * s);
    return Var::make(std::move(y), {a}, [s](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data() += s * g.data();
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor y(a.shape(), (a.value().data().array() + s).matrix());
    return Var::make(std::move(y), {a}, [](const Tensor& g, ParentGrads& pg) { pg.add(0, g); });
}

Var add_rowvec(const Var& x, const Var& b) {
    require_rank(b, 1, "add_rowvec");
    const Index cols = b.dim(0);
    if (x.size() % cols != 0 || x.value().rank() < 1 || x.shape().back() != cols)
        throw DimensionError("add_rowvec: last dimension of " + shape_str(x.shape()) + " must equal " +
                             std::to_string(cols));
    const Index rows = x.size() / cols;
    Tensor y = x.value();
    y.matrix(rows).rowwise() += b.value().data().transpose();
    return Var::make(std::move(y), {x, b}, [rows](const Tensor& g, ParentGrads& pg) {
        pg.add(0, g);
        if (pg.wants(1)) pg.slot(1).data() += g.matrix(rows).colwise().sum().transpose();
    });
}

Var broadcast_rows(const Var& v, Index n) {
    require_rank(v, 1, "broadcast_rows");
    Tensor y({n, v.dim(0)});
    y.matrix().rowwise() = v.value().data().transpose();
    return Var::make(std::move(y), {v}, [](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data() += g.matrix().colwise().sum().transpose();
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    if (bias.value().rank() != 1 || bias.dim(0) != weight.dim(1))
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    return add_rowvec(matmul(x, weight), bias);
}

Var relu(const Var& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& x) {
    return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var abs(const Var& x) {
    return unary(x, [](double v) { return std::abs(v); }, [](double xv, double) { return xv > 0 ? 1.0 : (xv < 0 ? -1.0 : 0.0); });
}

Var sum(const Var& x) {
    Tensor y = Tensor::scalar(x.value().data().sum());
    return Var::make(std::move(y), {x}, [](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data().array() += g[0];
    });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var dot_const(const Var& x, const Tensor& w) {
    if (w.size() != x.size()) throw DimensionError("dot_const: size mismatch");
    Tensor y = Tensor::scalar(x.value().data().dot(w.data()));
    return Var::make(std::move(y), {x}, [w](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data() += g[0] * w.data();
    });
}

Var softmax(const Var& x, int axis) {
    const int r = x.value().rank();
    if (r < 1 || r > 2) throw DimensionError("softmax: rank must be 1 or 2, got " + shape_str(x.shape()));
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw DimensionError("softmax: axis out of range");
    if (!x.value().all_finite()) throw NumericError("softmax: non-finite input");
    const Index rows = r == 1 ? 1 : x.dim(0);
    const Index cols = r == 1 ? x.dim(0) : x.dim(1);
    const bool along_rows = (r == 1) || axis == 1;

    Tensor y(x.shape());
    auto xm = x.value().matrix(rows);
    auto ym = y.matrix(rows);
    if (along_rows) {
        for (Index i = 0; i < rows; ++i) {
            ym.row(i) = (xm.row(i).array() - xm.row(i).maxCoeff()).exp().matrix();
            ym.row(i) /= ym.row(i).sum();
        }
    } else {
        for (Index j = 0; j < cols; ++j) {
            ym.col(j) = (xm.col(j).array() - xm.col(j).maxCoeff()).exp().matrix();
            ym.col(j) /= ym.col(j).sum();
        }
    }
    return Var::make(y, {x}, [y, rows, along_rows](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        auto gm = g.matrix(rows);
        auto ym = y.matrix(rows);
        auto dx = pg.slot(0).matrix(rows);
        const RowMatrixXd gy = gm.cwiseProduct(ym);
        if (along_rows)
            dx += gy - (ym.array().colwise() * gy.rowwise().sum().array()).matrix();
        else
            dx += gy - (ym.array().rowwise() * gy.colwise().sum().array()).matrix();
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Index d = x.shape().back();
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
        throw DimensionError("layer_norm: gamma/beta must have shape (" + std::to_string(d) + ")");
    const Index rows = x.size() / d;
    auto xm = x.value().matrix(rows);
    Tensor xhat(x.shape());
    Eigen::VectorXd inv_std(rows);
    auto hm = xhat.matrix(rows);
    for (Index i = 0; i < rows; ++i) {
        const double mu = xm.row(i).mean();
        const double var = (xm.row(i).array() - mu).square().mean();
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        hm.row(i) = (xm.row(i).array() - mu) * inv_std[i];
    }
    Tensor y(x.shape());
    y.matrix(rows) = (hm.array().rowwise() * gamma.value().data().transpose().array()).rowwise() +
                     beta.value().data().transpose().array();
    Var gv = gamma;
    return Var::make(std::move(y), {x, gamma, beta}, [xhat, inv_std, gv, rows, d](const Tensor& g, ParentGrads& pg) {
        auto gm = g.matrix(rows);
        auto hm = xhat.matrix(rows);
        if (pg.wants(1)) pg.slot(1).data() += gm.cwiseProduct(hm).colwise().sum().transpose();
        if (pg.wants(2)) pg.slot(2).data() += gm.colwise().sum().transpose();
        if (pg.wants(0)) {
            auto dx = pg.slot(0).matrix(rows);
            const RowMatrixXd dh = gm.array().rowwise() * gv.value().data().transpose().array();
            const double dn = static_cast<double>(d);
            for (Index i = 0; i < rows; ++i) {
                const double s1 = dh.row(i).sum();
                const double s2 = dh.row(i).dot(hm.row(i));
                dx.row(i) += (inv_std[i] / dn) * (dn * dh.row(i).array() - s1 - hm.row(i).array() * s2).matrix();
            }
        }
    });
}

Var max_rows(const Var& x) {
    require_rank(x, 2, "max_rows");
    const Index rows = x.dim(0), cols = x.dim(1);
    if (rows == 0) throw DimensionError("max_rows: empty input");
    auto xm = x.value().matrix();
    Tensor y({cols});
    std::vector<Index> arg(static_cast<std::size_t>(cols), 0);
    for (Index j = 0; j < cols; ++j) {
        Index best = 0;
        for (Index i = 1; i < rows; ++i)
            if (xm(i, j) > xm(best, j)) best = i;
        arg[static_cast<std::size_t>(j)] = best;
        y[j] = xm(best, j);
    }
    return Var::make(std::move(y), {x}, [arg, cols](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        auto dx = pg.slot(0).matrix();
        for (Index j = 0; j < cols; ++j) dx(arg[static_cast<std::size_t>(j)], j) += g[j];
    });
}

Var mean_rows(const Var& x) {
    require_rank(x, 2, "mean_rows");
    const Index rows = x.dim(0);
    if (rows == 0) throw DimensionError("mean_rows: empty input");
    Tensor y({x.dim(1)});
    // Plain sequential accumulation keeps the sum order fixed.
    auto xm = x.value().matrix();
    for (Index i = 0; i < rows; ++i) y.data() += xm.row(i).transpose();
    y.data() /= static_cast<double>(rows);
    return Var::make(std::move(y), {x}, [rows](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).matrix().rowwise() += g.data().transpose() / static_cast<double>(rows);
    });
}

Var normalize_columns(const Var& x) {
    require_rank(x, 2, "normalize_columns");
    auto xm = x.value().matrix();
    const Eigen::RowVectorXd s = xm.colwise().sum();
    Tensor y(x.shape());
    y.matrix() = xm.array().rowwise() / s.array();
    return Var::make(y, {x}, [y, s](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        auto gm = g.matrix();
        auto ym = y.matrix();
        // d/dx_ij of x_ij / s_j: (g_ij - sum_k g_kj y_kj) / s_j
        const Eigen::RowVectorXd gy = gm.cwiseProduct(ym).colwise().sum();
        pg.slot(0).matrix() += ((gm.rowwise() - gy).array().rowwise() / s.array()).matrix();
    });
}

Var reshape(const Var& x, Shape shape) {
    Tensor y = x.value().reshaped(std::move(shape));
    return Var::make(std::move(y), {x}, [](const Tensor& g, ParentGrads& pg) {
        if (pg.wants(0)) pg.slot(0).data() += g.data();
    });
}

Var concat(std::span<const Var> parts) {
    Index total = 0;
    for (const Var& p : parts) total += p.size();
    Tensor y({total});
    std::vector<Index> offsets;
    Index off = 0;
    for (const Var& p : parts) {
        offsets.push_back(off);
        y.data().segment(off, p.size()) = p.value().data();
        off += p.size();
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    std::vector<Index> sizes;
    for (const Var& p : parts) sizes.push_back(p.size());
    return Var::make(std::move(y), std::move(parents), [offsets, sizes](const Tensor& g, ParentGrads& pg) {
        for (std::size_t i = 0; i < offsets.size(); ++i)
            if (pg.wants(i)) pg.slot(i).data() += g.data().segment(offsets[i], sizes[i]);
    });
}

Var wrap_periodic(const Var& x, double period) {
    Tensor y(x.shape());
    for (Index i = 0; i < x.size(); ++i) {
        const double v = x.value()[i];
        y[i] = v - period * std::floor(v / period + 0.5);
    }
    return Var::make(std::move(y), {x}, [](const Tensor& g, ParentGrads& pg) { pg.add(0, g); });
}

namespace {

struct ConvGeom {
    Index c, h, w, kh, kw, ho, wo;
    int stride, pad;
};

// im2col for one image; col is (c*kh*kw) x (ho*wo).
void im2col(const double* img, const ConvGeom& g, RowMatrixXd& col) {
    col.setZero(g.c * g.kh * g.kw, g.ho * g.wo);
    for (Index ch = 0; ch < g.c; ++ch)
        for (Index ki = 0; ki < g.kh; ++ki)
            for (Index kj = 0; kj < g.kw; ++kj) {
                double* row = col.row((ch * g.kh + ki) * g.kw + kj).data();
                for (Index oi = 0; oi < g.ho; ++oi) {
                    const Index ii = oi * g.stride - g.pad + ki;
                    if (ii < 0 || ii >= g.h) continue;
                    const double* src = img + (ch * g.h + ii) * g.w;
                    for (Index oj = 0; oj < g.wo; ++oj) {
                        const Index jj = oj * g.stride - g.pad + kj;
                        if (jj >= 0 && jj < g.w) row[oi * g.wo + oj] = src[jj];
                    }
                }
            }
}

void col2im(const RowMatrixXd& col, const ConvGeom& g, double* img) {
    for (Index ch = 0; ch < g.c; ++ch)
        for (Index ki = 0; ki < g.kh; ++ki)
            for (Index kj = 0; kj < g.kw; ++kj) {
                const double* row = col.row((ch * g.kh + ki) * g.kw + kj).data();
                for (Index oi = 0; oi < g.ho; ++oi) {
                    const Index ii = oi * g.stride - g.pad + ki;
                    if (ii < 0 || ii >= g.h) continue;
                    double* dst = img + (ch * g.h + ii) * g.w;
                    for (Index oj = 0; oj < g.wo; ++oj) {
                        const Index jj = oj * g.stride - g.pad + kj;
                        if (jj >= 0 && jj < g.w) dst[jj] += row[oi * g.wo + oj];
                    }
                }
            }
}

}  // namespace

Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int padding) {
    require_rank(x, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: negative padding");
    const Index batch = x.dim(0);
    const Index cout = kernel.dim(0);
    if (kernel.dim(1) != x.dim(1))
        throw DimensionError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " +
                             std::to_string(x.dim(1)));
    const bool has_bias = bias.defined();
    if (has_bias && bias.shape() != Shape{cout}) throw DimensionError("conv2d: bias shape mismatch");
    ConvGeom g{x.dim(1), x.dim(2), x.dim(3), kernel.dim(2), kernel.dim(3), 0, 0, stride, padding};
    const Index hp = g.h + 2 * padding - g.kh, wp = g.w + 2 * padding - g.kw;
    if (hp < 0 || wp < 0)
        throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                             shape_str(x.shape()));
    g.ho = hp / stride + 1;
    g.wo = wp / stride + 1;

    const Index in_img = g.c * g.h * g.w, out_img = cout * g.ho * g.wo;
    auto km = kernel.value().matrix(cout);
    Tensor y({batch, cout, g.ho, g.wo});
    auto cols = std::make_shared<std::vector<RowMatrixXd>>(static_cast<std::size_t>(batch));
    for (Index b = 0; b < batch; ++b) {
        RowMatrixXd& col = (*cols)[static_cast<std::size_t>(b)];
        im2col(x.value().ptr() + b * in_img, g, col);
        Eigen::Map<RowMatrixXd> ym(y.ptr() + b * out_img, cout, g.ho * g.wo);
        ym.noalias() = km * col;
        if (has_bias) ym.colwise() += bias.value().data();
    }
    MacCounter::add(static_cast<std::uint64_t>(batch * cout * g.ho * g.wo * g.c * g.kh * g.kw));

    std::vector<Var> parents{x, kernel};
    if (has_bias) parents.push_back(bias);
    Var kv = kernel;
    return Var::make(std::move(y), std::move(parents),
                     [cols, g, kv, batch, cout, in_img, out_img, has_bias](const Tensor& grad, ParentGrads& pg) {
                         auto km = kv.value().matrix(cout);
                         RowMatrixXd dcol;
                         for (Index b = 0; b < batch; ++b) {
                             Eigen::Map<const RowMatrixXd> gm(grad.ptr() + b * out_img, cout, g.ho * g.wo);
                             const RowMatrixXd& col = (*cols)[static_cast<std::size_t>(b)];
                             if (pg.wants(1)) pg.slot(1).matrix(cout).noalias() += gm * col.transpose();
                             if (has_bias && pg.wants(2)) pg.slot(2).data() += gm.rowwise().sum();
                             if (pg.wants(0)) {
                                 dcol.noalias() = km.transpose() * gm;
                                 col2im(dcol, g, pg.slot(0).ptr() + b * in_img);
                             }
                         }
                     });
}

Var conv2d(const Var& x, const Var& kernel, int stride, int padding) { return conv2d(x, kernel, Var(), stride, padding); }

Var subsample_pad_channels(const Var& x, Index out_channels, int stride) {
    require_rank(x, 4, "subsample_pad_channels");
    const Index b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (out_channels < c) throw DimensionError("subsample_pad_channels: cannot drop channels");
    const Index ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
    Tensor y({b, out_channels, ho, wo});
    const auto& xd = x.value();
    for (Index n = 0; n < b; ++n)
        for (Index ch = 0; ch < c; ++ch)
            for (Index i = 0; i < ho; ++i)
                for (Index j = 0; j < wo; ++j)
                    y[((n * out_channels + ch) * ho + i) * wo + j] = xd[((n * c + ch) * h + i * stride) * w + j * stride];
    return Var::make(std::move(y), {x}, [b, c, h, w, ho, wo, out_channels, stride](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        Tensor& dx = pg.slot(0);
        for (Index n = 0; n < b; ++n)
            for (Index ch = 0; ch < c; ++ch)
                for (Index i = 0; i < ho; ++i)
                    for (Index j = 0; j < wo; ++j)
                        dx[((n * c + ch) * h + i * stride) * w + j * stride] += g[((n * out_channels + ch) * ho + i) * wo + j];
    });
}

}  // namespace unloc
