#include "unloc/cylindrical.hpp"

#include <algorithm>
#include <map>

namespace unloc {

namespace {
constexpr double kPi = std::numbers::pi;
}

void CylGridConfig::validate() const {
    if (!(r_min >= 0.0 && r_max > r_min)) throw ConfigError("cylindrical grid: need r_max > r_min >= 0");
    if (!(z_max > z_min)) throw ConfigError("cylindrical grid: need z_max > z_min");
    for (Index b : bins)
        if (b < 1) throw ConfigError("cylindrical grid: bin counts must be >= 1");
}

std::array<Index, 3> CylGridConfig::coord_of(Index linear) const {
    const Index l = linear % bins[2];
    const Index w = (linear / bins[2]) % bins[1];
    const Index h = linear / (bins[2] * bins[1]);
    return {h, w, l};
}

std::array<double, 3> CylGridConfig::center(const std::array<Index, 3>& c) const {
    const double dr = (r_max - r_min) / static_cast<double>(bins[0]);
    const double dt = 2.0 * kPi / static_cast<double>(bins[1]);
    const double dz = (z_max - z_min) / static_cast<double>(bins[2]);
    return {r_min + (static_cast<double>(c[0]) + 0.5) * dr, -kPi + (static_cast<double>(c[1]) + 0.5) * dt,
            z_min + (static_cast<double>(c[2]) + 0.5) * dz};
}

Partition partition(const Points3<double>& cyl, const CylGridConfig& cfg) {
    cfg.validate();
    Partition p;
    const auto n = static_cast<std::size_t>(cyl.rows());
    p.voxel.assign(n, -1);
    p.coord.assign(n, {-1, -1, -1});
    for (Index i = 0; i < cyl.rows(); ++i) {
        const Index h = uniform_bin(cyl(i, 0), cfg.r_min, cfg.r_max, cfg.bins[0]);
        const Index l = uniform_bin(cyl(i, 2), cfg.z_min, cfg.z_max, cfg.bins[2]);
        if (h < 0 || l < 0) {
            ++p.dropped_count;
            continue;
        }
        // theta is in [-pi, pi) by construction; the clamp covers theta == pi.
        const Index w = uniform_bin(cyl(i, 1), -kPi, kPi, cfg.bins[1]);
        const std::array<Index, 3> c{h, w, l};
        p.coord[static_cast<std::size_t>(i)] = c;
        p.voxel[static_cast<std::size_t>(i)] = cfg.linear_index(c);
    }
    return p;
}

double radial_voxel_volume(const CylGridConfig& cfg, Index h) {
    const double dr = (cfg.r_max - cfg.r_min) / static_cast<double>(cfg.bins[0]);
    const double r0 = cfg.r_min + static_cast<double>(h) * dr, r1 = r0 + dr;
    const double dt = 2.0 * kPi / static_cast<double>(cfg.bins[1]);
    const double dz = (cfg.z_max - cfg.z_min) / static_cast<double>(cfg.bins[2]);
    return 0.5 * (r1 * r1 - r0 * r0) * dt * dz;
}

Tensor point_inputs(const PointCloud& cloud, const Points3<double>& cyl, const Partition& part, const CylGridConfig& cfg) {
    if (part.kept() == 0) return Tensor();
    Tensor out({part.kept(), kPointInputDim});
    auto m = out.matrix();
    Index row = 0;
    for (Index i = 0; i < cyl.rows(); ++i) {
        if (part.voxel[static_cast<std::size_t>(i)] < 0) continue;
        const auto c = cfg.center(part.coord[static_cast<std::size_t>(i)]);
        m.row(row++) << cyl(i, 0), cyl(i, 1), cyl(i, 2), cloud.points(i, 0), cloud.points(i, 1), cyl(i, 0) - c[0],
            cyl(i, 1) - c[1], cyl(i, 2) - c[2];
    }
    return out;
}

PointMlp::PointMlp(const std::string& name, Index hidden, Index out, Rng& rng)
    : first(name + ".fc1", kPointInputDim, hidden, rng), second(name + ".fc2", hidden, out, rng) {}

VoxelizedCloud scatter_max(const Var& features, std::span<const Index> voxel, const CylGridConfig& cfg) {
    if (features.value().rank() != 2 || features.dim(0) != static_cast<Index>(voxel.size()))
        throw DimensionError("scatter_max: need one voxel index per feature row");
    const Index d = features.dim(1);

    // Sorted unique voxel ids -> output row.
    std::map<Index, Index> rows;
    Index dropped = 0;
    for (Index v : voxel) {
        if (v < 0)
            ++dropped;
        else
            rows.emplace(v, 0);
    }
    if (rows.empty()) throw EmptyCloudError("scatter_max: every point was dropped");
    VoxelizedCloud out;
    out.dropped_count = dropped;
    Index next = 0;
    for (auto& [v, r] : rows) {
        r = next++;
        out.coords.push_back(cfg.coord_of(v));
    }

    const Index m = next;
    auto fm = features.value().matrix();
    Tensor y({m, d});
    auto ym = y.matrix();
    std::vector<Index> arg(static_cast<std::size_t>(m * d), -1);
    for (Index i = 0; i < static_cast<Index>(voxel.size()); ++i) {
        if (voxel[static_cast<std::size_t>(i)] < 0) continue;
        const Index r = rows[voxel[static_cast<std::size_t>(i)]];
        for (Index j = 0; j < d; ++j) {
            Index& a = arg[static_cast<std::size_t>(r * d + j)];
            // strict > keeps the first occurrence on ties
            if (a < 0 || fm(i, j) > ym(r, j)) {
                a = i;
                ym(r, j) = fm(i, j);
            }
        }
    }
    out.features = Var::make(std::move(y), {features}, [arg, m, d](const Tensor& g, ParentGrads& pg) {
        if (!pg.wants(0)) return;
        auto dx = pg.slot(0).matrix();
        for (Index r = 0; r < m; ++r)
            for (Index j = 0; j < d; ++j) dx(arg[static_cast<std::size_t>(r * d + j)], j) += g[r * d + j];
    });
    return out;
}

CylindricalEncoder::CylindricalEncoder(const std::string& name, CylGridConfig cfg, Index hidden, Index out_dim, Rng& rng)
    : grid(cfg), mlp(name + ".mlp", hidden, out_dim, rng) {
    grid.validate();
}

VoxelizedCloud CylindricalEncoder::operator()(const PointCloud& cloud) const {
    if (cloud.size() == 0) throw EmptyCloudError("cylindrical encoder: empty point cloud");
    const Points3<double> cyl = to_cylindrical(cloud.points);
    const Partition part = partition(cyl, grid);
    if (part.kept() == 0) throw EmptyCloudError("cylindrical encoder: every point is outside the grid");
    const Var feats = mlp(Var(point_inputs(cloud, cyl, part, grid)));
    std::vector<Index> kept;
    kept.reserve(static_cast<std::size_t>(part.kept()));
    for (Index v : part.voxel)
        if (v >= 0) kept.push_back(v);
    VoxelizedCloud out = scatter_max(feats, kept, grid);
    out.dropped_count = part.dropped_count;
    return out;
}

}  // namespace unloc
