#pragma once

#include "unloc/layers.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace unloc {

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct PointCloud {
    Points3<double> points;                  // x, y, z in meters
    std::optional<Eigen::VectorXd> intensity;  // one per point, in [0, 1]

    Index size() const { return points.rows(); }
};

/// (x, y, z) -> (r, theta, z) with theta = atan2(y, x) in [-pi, pi).
template <typename Derived>
Points3<typename Derived::Scalar> to_cylindrical(const Eigen::MatrixBase<Derived>& xyz) {
    using S = typename Derived::Scalar;
    Points3<S> out(xyz.rows(), 3);
    for (Index i = 0; i < xyz.rows(); ++i) {
        const S x = xyz(i, 0), y = xyz(i, 1);
        S theta = std::atan2(y, x);
        if (theta >= std::numbers::pi_v<S>) theta -= 2 * std::numbers::pi_v<S>;
        out(i, 0) = std::hypot(x, y);
        out(i, 1) = theta;
        out(i, 2) = xyz(i, 2);
    }
    return out;
}

template <typename Derived>
Points3<typename Derived::Scalar> from_cylindrical(const Eigen::MatrixBase<Derived>& rtz) {
    Points3<typename Derived::Scalar> out(rtz.rows(), 3);
    for (Index i = 0; i < rtz.rows(); ++i) {
        out(i, 0) = rtz(i, 0) * std::cos(rtz(i, 1));
        out(i, 1) = rtz(i, 0) * std::sin(rtz(i, 1));
        out(i, 2) = rtz(i, 2);
    }
    return out;
}

/// Uniform bins in (radius, azimuth, height). Azimuth always spans [-pi, pi).
struct CylGridConfig {
    double r_min = 0.0;
    double r_max = 50.0;
    double z_min = -4.0;
    double z_max = 4.0;
    std::array<Index, 3> bins{48, 36, 16};  // (radius, azimuth, height)

    void validate() const;
    Index voxel_count() const { return bins[0] * bins[1] * bins[2]; }
    Index linear_index(const std::array<Index, 3>& c) const { return (c[0] * bins[1] + c[1]) * bins[2] + c[2]; }
    std::array<Index, 3> coord_of(Index linear) const;
    /// Cylindrical coordinates of a voxel's center.
    std::array<double, 3> center(const std::array<Index, 3>& c) const;
};

/// Bin index for `value` in [lo, hi] with `n` bins; hi maps to the last bin.
/// Returns -1 outside the interval.
inline Index uniform_bin(double value, double lo, double hi, Index n) {
    if (!(value >= lo && value <= hi)) return -1;
    const auto b = static_cast<Index>(std::floor((value - lo) / (hi - lo) * static_cast<double>(n)));
    return std::min(b, n - 1);
}

struct Partition {
    std::vector<Index> voxel;  // linear voxel index per point, -1 when dropped
    std::vector<std::array<Index, 3>> coord;
    Index dropped_count = 0;
    Index kept() const { return static_cast<Index>(voxel.size()) - dropped_count; }
};

/// Bins every point; points outside [r_min, r_max] x [z_min, z_max] are dropped.
Partition partition(const Points3<double>& cyl, const CylGridConfig& cfg);

/// Annulus-sector volume of radial bin `h` (same for every azimuth/height bin).
double radial_voxel_volume(const CylGridConfig& cfg, Index h);

/// Per-point input vector: (r, theta, z, x, y, r - r_c, theta - theta_c, z - z_c)
/// for kept points, c being the point's voxel center. Rows follow point order.
Tensor point_inputs(const PointCloud& cloud, const Points3<double>& cyl, const Partition& part, const CylGridConfig& cfg);

inline constexpr Index kPointInputDim = 8;

/// linear(8 -> hidden) -> relu -> linear(hidden -> D).
struct PointMlp {
    PointMlp() = default;
    PointMlp(const std::string& name, Index hidden, Index out, Rng& rng);
    Var operator()(const Var& inputs) const { return second(relu(first(inputs))); }
    void collect(ParamList& out) { first.collect(out), second.collect(out); }

    Linear first, second;
};

struct VoxelizedCloud {
    std::vector<std::array<Index, 3>> coords;  // unique, sorted by linear index
    Var features;                              // M x D
    Index dropped_count = 0;
};

/// Per-voxel channelwise max of point features. `voxel[i]` is the linear voxel
/// index of row i of `features` (or -1 to skip the row). Backward routes each
/// channel to the first point attaining the max.
VoxelizedCloud scatter_max(const Var& features, std::span<const Index> voxel, const CylGridConfig& cfg);

/// Whole cylindrical front end: to_cylindrical -> partition -> MLP -> scatter_max.
struct CylindricalEncoder {
    CylindricalEncoder() = default;
    CylindricalEncoder(const std::string& name, CylGridConfig cfg, Index hidden, Index out_dim, Rng& rng);

    VoxelizedCloud operator()(const PointCloud& cloud) const;
    void collect(ParamList& out) { mlp.collect(out); }
    Index feature_dim() const { return mlp.second.out_features(); }

    CylGridConfig grid;
    PointMlp mlp;
};

}  // namespace unloc
