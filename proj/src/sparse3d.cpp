#include "unloc/sparse3d.hpp"

#include <algorithm>
#include <numeric>

namespace unloc {

SparseGeometry::SparseGeometry(Coord3 dense_shape, std::vector<Coord3> coords)
    : shape_(dense_shape), coords_(std::move(coords)) {
    for (Index d : shape_)
        if (d < 1) throw DimensionError("sparse geometry: non-positive dense shape");
    for (const Coord3& c : coords_)
        for (int a = 0; a < 3; ++a)
            if (c[a] < 0 || c[a] >= shape_[a]) throw DimensionError("sparse geometry: coordinate outside dense shape");
    std::sort(coords_.begin(), coords_.end(), [this](const Coord3& a, const Coord3& b) { return linear(a) < linear(b); });
    rows_.reserve(coords_.size());
    for (std::size_t i = 0; i < coords_.size(); ++i)
        if (!rows_.emplace(linear(coords_[i]), static_cast<Index>(i)).second)
            throw DimensionError("sparse geometry: duplicate coordinate");
}

Index SparseGeometry::find(const Coord3& c) const {
    for (int a = 0; a < 3; ++a)
        if (c[a] < 0 || c[a] >= shape_[a]) return -1;
    auto it = rows_.find(linear(c));
    return it == rows_.end() ? -1 : it->second;
}

SparseTensor3D make_sparse(Coord3 dense_shape, const std::vector<Coord3>& coords, const Var& features) {
    if (features.value().rank() != 2 || features.dim(0) != static_cast<Index>(coords.size()))
        throw DimensionError("make_sparse: need one feature row per coordinate");
    auto geom = std::make_shared<const SparseGeometry>(dense_shape, coords);
    // permutation from sorted row -> source row
    std::vector<Index> src(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) src[static_cast<std::size_t>(geom->find(coords[i]))] = static_cast<Index>(i);
    const bool identity = std::is_sorted(src.begin(), src.end());
    if (identity) return {geom, features};
    Tensor y(features.shape());
    for (std::size_t r = 0; r < src.size(); ++r) y.matrix().row(static_cast<Index>(r)) = features.value().matrix().row(src[r]);
    Var f = Var::make(std::move(y), {features}, [src](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        auto dx = pg.slot(0).matrix();
        const auto gm = g.matrix(static_cast<Index>(src.size()));
        for (std::size_t r = 0; r < src.size(); ++r) dx.row(src[r]) += gm.row(static_cast<Index>(r));
    });
    return {geom, f};
}

namespace {

/// Input/output row pairs for each kernel offset.
struct Rulebook {
    std::vector<std::vector<Index>> in_rows, out_rows;
    Index pairs = 0;
};

Index wrap_or_bound(Index v, Index n, bool wrap) {
    if (wrap) return ((v % n) + n) % n;
    return v;
}

}  // namespace

SparseTensor3D sparse_conv3d(const SparseTensor3D& x, const Var& kernel, const Var& bias, int stride, bool azimuth_wrap) {
    const Shape& ks = kernel.shape();
    if (ks.size() != 5) throw DimensionError("sparse_conv3d: kernel must be (kh, kw, kl, C_in, C_out)");
    const Index cin = ks[3], cout = ks[4];
    if (x.channels() != cin)
        throw DimensionError("sparse_conv3d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                             std::to_string(cin));
    if (bias.shape() != Shape{cout}) throw DimensionError("sparse_conv3d: bias shape mismatch");
    if (stride != 1 && stride != 2) throw DimensionError("sparse_conv3d: stride must be 1 or 2");
    const Coord3 k{ks[0], ks[1], ks[2]};
    if (stride == 1)
        for (Index kk : k)
            if (kk % 2 == 0) throw DimensionError("sparse_conv3d: submanifold mode needs odd kernel sizes");
    const Coord3 pad{k[0] / 2, k[1] / 2, k[2] / 2};
    const SparseGeometry& in = *x.geometry;
    const Coord3& ish = in.dense_shape();

    std::shared_ptr<const SparseGeometry> out_geom;
    if (stride == 1) {
        out_geom = x.geometry;
    } else {
        const Coord3 osh{(ish[0] + 1) / 2, (ish[1] + 1) / 2, (ish[2] + 1) / 2};
        std::vector<Coord3> oc;
        oc.reserve(in.coords().size());
        std::unordered_map<Index, bool> seen;
        for (const Coord3& c : in.coords()) {
            const Coord3 o{c[0] / 2, c[1] / 2, c[2] / 2};
            if (seen.emplace((o[0] * osh[1] + o[1]) * osh[2] + o[2], true).second) oc.push_back(o);
        }
        out_geom = std::make_shared<const SparseGeometry>(osh, std::move(oc));
    }

    const Index noff = k[0] * k[1] * k[2];
    auto rb = std::make_shared<Rulebook>();
    rb->in_rows.resize(static_cast<std::size_t>(noff));
    rb->out_rows.resize(static_cast<std::size_t>(noff));
    const auto& ocoords = out_geom->coords();
    for (Index o = 0; o < static_cast<Index>(ocoords.size()); ++o) {
        const Coord3& oc = ocoords[static_cast<std::size_t>(o)];
        for (Index a = 0; a < k[0]; ++a)
            for (Index b = 0; b < k[1]; ++b)
                for (Index c = 0; c < k[2]; ++c) {
                    Coord3 src{oc[0] * stride + a - pad[0], oc[1] * stride + b - pad[1], oc[2] * stride + c - pad[2]};
                    src[1] = wrap_or_bound(src[1], ish[1], azimuth_wrap);
                    const Index row = in.find(src);
                    if (row < 0) continue;
                    const auto off = static_cast<std::size_t>((a * k[1] + b) * k[2] + c);
                    rb->in_rows[off].push_back(row);
                    rb->out_rows[off].push_back(o);
                    ++rb->pairs;
                }
    }

    const Index m_out = out_geom->size();
    Tensor y({m_out, cout});
    auto ym = y.matrix();
    ym.rowwise() = bias.value().data().transpose();
    const auto xm = x.features.value().matrix();
    RowMatrixXd gathered, prod;
    for (Index off = 0; off < noff; ++off) {
        const auto& ir = rb->in_rows[static_cast<std::size_t>(off)];
        const auto& orow = rb->out_rows[static_cast<std::size_t>(off)];
        if (ir.empty()) continue;
        Eigen::Map<const RowMatrixXd> kmat(kernel.value().ptr() + off * cin * cout, cin, cout);
        gathered.resize(static_cast<Index>(ir.size()), cin);
        for (std::size_t p = 0; p < ir.size(); ++p) gathered.row(static_cast<Index>(p)) = xm.row(ir[p]);
        prod.noalias() = gathered * kmat;
        for (std::size_t p = 0; p < orow.size(); ++p) ym.row(orow[p]) += prod.row(static_cast<Index>(p));
    }
    MacCounter::add(static_cast<std::uint64_t>(rb->pairs * cin * cout));

    Var xf = x.features, kv = kernel;
    Var f = Var::make(std::move(y), {x.features, kernel, bias},
                      [rb, xf, kv, noff, cin, cout](const Tensor& g, ParentGrads& pg) {
                          const Index m_out = g.size() / cout;
                          const auto gm = g.matrix(m_out);
                          if (pg.wants(2)) pg.slot(2).data() += gm.colwise().sum().transpose();
                          const bool want_x = pg.wants(0), want_k = pg.wants(1);
                          if (!want_x && !want_k) return;
                          const auto xm = xf.value().matrix();
                          RowMatrixXd gathered_g, gathered_x, dx_rows;
                          for (Index off = 0; off < noff; ++off) {
                              const auto& ir = rb->in_rows[static_cast<std::size_t>(off)];
                              const auto& orow = rb->out_rows[static_cast<std::size_t>(off)];
                              if (ir.empty()) continue;
                              const auto np = static_cast<Index>(ir.size());
                              gathered_g.resize(np, cout);
                              for (Index p = 0; p < np; ++p) gathered_g.row(p) = gm.row(orow[static_cast<std::size_t>(p)]);
                              if (want_k) {
                                  gathered_x.resize(np, cin);
                                  for (Index p = 0; p < np; ++p) gathered_x.row(p) = xm.row(ir[static_cast<std::size_t>(p)]);
                                  Eigen::Map<RowMatrixXd> dk(pg.slot(1).ptr() + off * cin * cout, cin, cout);
                                  dk.noalias() += gathered_x.transpose() * gathered_g;
                              }
                              if (want_x) {
                                  Eigen::Map<const RowMatrixXd> kmat(kv.value().ptr() + off * cin * cout, cin, cout);
                                  dx_rows.noalias() = gathered_g * kmat.transpose();
                                  auto dx = pg.slot(0).matrix();
                                  for (Index p = 0; p < np; ++p) dx.row(ir[static_cast<std::size_t>(p)]) += dx_rows.row(p);
                              }
                          }
                      });
    return {out_geom, f};
}

SparseTensor3D sparse_add(const SparseTensor3D& a, const SparseTensor3D& b) {
    if (a.geometry != b.geometry && !a.geometry->same_sites(*b.geometry))
        throw DimensionError("sparse_add: operands live on different sites");
    return {a.geometry, add(a.features, b.features)};
}

SparseTensor3D sparse_relu(const SparseTensor3D& x) { return {x.geometry, relu(x.features)}; }

SparseConv3d::SparseConv3d(const std::string& name, Coord3 ksize, Index in, Index out, int stride_, bool wrap, Rng& rng)
    : kernel(name + ".kernel", xavier_uniform({ksize[0], ksize[1], ksize[2], in, out}, in * ksize[0] * ksize[1] * ksize[2],
                                              out * ksize[0] * ksize[1] * ksize[2], rng)),
      bias(name + ".bias", Tensor::zeros({out})), stride(stride_), azimuth_wrap(wrap) {}

Coord3 SparseConv3d::output_shape(const Coord3& in) const {
    if (stride == 1) return in;
    return {(in[0] + 1) / 2, (in[1] + 1) / 2, (in[2] + 1) / 2};
}

CbBlock::CbBlock(const std::string& name, Index in, Index out, bool wrap, Rng& rng)
    : stream_a1(name + ".a1", {1, 3, 3}, in, out, 1, wrap, rng),
      stream_a2(name + ".a2", {3, 1, 3}, out, out, 1, wrap, rng),
      stream_b1(name + ".b1", {3, 1, 3}, in, out, 1, wrap, rng),
      stream_b2(name + ".b2", {1, 3, 3}, out, out, 1, wrap, rng) {}

SparseTensor3D CbBlock::operator()(const SparseTensor3D& x) const {
    return sparse_relu(sparse_add(stream_a2(stream_a1(x)), stream_b2(stream_b1(x))));
}

void CbBlock::collect(ParamList& out) {
    for (SparseConv3d* c : {&stream_a1, &stream_a2, &stream_b1, &stream_b2}) c->collect(out);
}

CbdBlock::CbdBlock(const std::string& name, Index in, Index out, bool wrap, Rng& rng)
    : cb(name + ".cb", in, out, wrap, rng), down(name + ".down", {3, 3, 3}, out, out, 2, wrap, rng) {}

std::array<Index, 5> backbone_channels(Index divisor) {
    if (divisor < 1 || 32 % divisor != 0) throw ConfigError("backbone channel divisor must divide 32");
    return {32 / divisor, 64 / divisor, 128 / divisor, 256 / divisor, 512 / divisor};
}

SparseBackbone::SparseBackbone(const std::string& name, Index in_channels, Index divisor, bool wrap, Rng& rng) {
    const auto ch = backbone_channels(divisor);
    cb = CbBlock(name + ".cb0", in_channels, ch[0], wrap, rng);
    for (std::size_t i = 0; i < 4; ++i)
        cbd[i] = CbdBlock(name + ".cbd" + std::to_string(i + 1), ch[i], ch[i + 1], wrap, rng);
}

SparseTensor3D SparseBackbone::operator()(const SparseTensor3D& x) const {
    SparseTensor3D h = cb(x);
    for (const CbdBlock& b : cbd) h = b(h);
    return h;
}

void SparseBackbone::collect(ParamList& out) {
    cb.collect(out);
    for (CbdBlock& b : cbd) b.collect(out);
}

std::pair<Coord3, Index> SparseBackbone::output_shape(const Coord3& in) const {
    Coord3 s = in;
    Index c = cb.stream_a1.in_channels();
    for (const SparseConv3d* conv : {&cb.stream_a1, &cb.stream_a2}) {
        if (conv->in_channels() != c) throw DimensionError("backbone: channel chain broken");
        c = conv->out_channels();
    }
    for (const CbdBlock& b : cbd) {
        for (const SparseConv3d* conv : {&b.cb.stream_a1, &b.cb.stream_a2, &b.down}) {
            if (conv->in_channels() != c) throw DimensionError("backbone: channel chain broken");
            c = conv->out_channels();
            s = conv->output_shape(s);
        }
    }
    return {s, c};
}

Var pool_concat(const SparseTensor3D& x) {
    if (!x.geometry || x.size() == 0) throw EmptyCloudError("pool_concat: no occupied voxels");
    const std::array<Var, 2> parts{max_rows(x.features), mean_rows(x.features)};
    return concat(parts);
}

}  // namespace unloc
