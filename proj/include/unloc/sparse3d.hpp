#pragma once

#include "unloc/layers.hpp"

#include <array>
#include <memory>
#include <unordered_map>

namespace unloc {

using Coord3 = std::array<Index, 3>;

/// Occupied coordinate set of a sparse grid. Immutable once built and shared
/// between every tensor living on the same sites.
class SparseGeometry {
public:
    /// `coords` must be inside `dense_shape`; duplicates are rejected.
    SparseGeometry(Coord3 dense_shape, std::vector<Coord3> coords);

    const Coord3& dense_shape() const { return shape_; }
    const std::vector<Coord3>& coords() const { return coords_; }
    Index size() const { return static_cast<Index>(coords_.size()); }
    Index linear(const Coord3& c) const { return (c[0] * shape_[1] + c[1]) * shape_[2] + c[2]; }
    /// Row of `c`, or -1 when unoccupied.
    Index find(const Coord3& c) const;
    bool same_sites(const SparseGeometry& o) const { return shape_ == o.shape_ && coords_ == o.coords_; }

private:
    Coord3 shape_;
    std::vector<Coord3> coords_;  // sorted by linear index
    std::unordered_map<Index, Index> rows_;
};

/// Sparse voxel grid with one feature row per occupied site.
struct SparseTensor3D {
    std::shared_ptr<const SparseGeometry> geometry;
    Var features;  // M x C, row i belongs to geometry->coords()[i]

    Index channels() const { return features.dim(1); }
    Index size() const { return geometry->size(); }
    const Coord3& dense_shape() const { return geometry->dense_shape(); }
};

/// Builds a tensor from arbitrary-order coordinates; rows are reordered to the
/// geometry's sorted order.
SparseTensor3D make_sparse(Coord3 dense_shape, const std::vector<Coord3>& coords, const Var& features);

/// Sparse 3-D convolution. kernel is (kh, kw, kl, C_in, C_out), bias (C_out).
/// stride 1: submanifold, output sites == input sites, odd kernel dims.
/// stride 2: output sites are floor(c/2) of the input sites, dense shape
/// halved with ceiling, padding k/2 per axis.
/// With `azimuth_wrap` the second (azimuth) axis is periodic.
SparseTensor3D sparse_conv3d(const SparseTensor3D& x, const Var& kernel, const Var& bias, int stride, bool azimuth_wrap);

SparseTensor3D sparse_add(const SparseTensor3D& a, const SparseTensor3D& b);
SparseTensor3D sparse_relu(const SparseTensor3D& x);

struct SparseConv3d {
    SparseConv3d() = default;
    SparseConv3d(const std::string& name, Coord3 ksize, Index in, Index out, int stride, bool azimuth_wrap, Rng& rng);

    SparseTensor3D operator()(const SparseTensor3D& x) const {
        return sparse_conv3d(x, kernel.var(), bias.var(), stride, azimuth_wrap);
    }
    void collect(ParamList& out) { out.push_back(&kernel), out.push_back(&bias); }
    Coord3 output_shape(const Coord3& in) const;
    Index in_channels() const { return kernel.shape()[3]; }
    Index out_channels() const { return kernel.shape()[4]; }

    Parameter kernel;
    Parameter bias;
    int stride = 1;
    bool azimuth_wrap = true;
};

/// Two asymmetric stride-1 streams, (1,3,3)->(3,1,3) and (3,1,3)->(1,3,3),
/// summed and rectified.
struct CbBlock {
    CbBlock() = default;
    CbBlock(const std::string& name, Index in, Index out, bool azimuth_wrap, Rng& rng);

    SparseTensor3D operator()(const SparseTensor3D& x) const;
    void collect(ParamList& out);

    SparseConv3d stream_a1, stream_a2, stream_b1, stream_b2;
};

/// CB block followed by a (3,3,3) stride-2 convolution.
struct CbdBlock {
    CbdBlock() = default;
    CbdBlock(const std::string& name, Index in, Index out, bool azimuth_wrap, Rng& rng);

    SparseTensor3D operator()(const SparseTensor3D& x) const { return down(cb(x)); }
    void collect(ParamList& out) { cb.collect(out), down.collect(out); }

    CbBlock cb;
    SparseConv3d down;
};

/// Channel widths of the five blocks for a given divisor of (32, ..., 512).
std::array<Index, 5> backbone_channels(Index divisor);

/// One CB and four CBD blocks in series.
struct SparseBackbone {
    SparseBackbone() = default;
    SparseBackbone(const std::string& name, Index in_channels, Index channel_divisor, bool azimuth_wrap, Rng& rng);

    SparseTensor3D operator()(const SparseTensor3D& x) const;
    void collect(ParamList& out);
    /// Dense shape and channel count after the backbone, for a given input grid.
    std::pair<Coord3, Index> output_shape(const Coord3& in) const;
    Index out_channels() const { return cbd.back().down.out_channels(); }

    CbBlock cb;
    std::array<CbdBlock, 4> cbd;
};

/// Channelwise max over occupied sites concatenated with channelwise mean.
Var pool_concat(const SparseTensor3D& x);

}  // namespace unloc
