#include <doctest.h>

#include "unloc/cylindrical.hpp"
#include "unloc/gradcheck.hpp"

#include <algorithm>
#include <map>
#include <numbers>

using namespace unloc;

namespace {

Points3<double> random_points(Index n, double extent, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-extent, extent);
    Points3<double> p(n, 3);
    for (Index i = 0; i < n; ++i) p.row(i) << u(rng), u(rng), u(rng) * 0.3;
    return p;
}

// Scalar binning by scanning bin edges.
Index scan_bin(double v, double lo, double hi, Index n) {
    if (v < lo || v > hi) return -1;
    for (Index b = 0; b < n; ++b) {
        const double upper = lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(n);
        if (v < upper) return b;
    }
    return n - 1;
}

}  // namespace

TEST_CASE("to_cylindrical") {
    Points3<double> p(2, 3);
    p << 1, 0, 0, 0, 1, 5;
    const auto c = to_cylindrical(p);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 1) == 0.0);
    CHECK(c(0, 2) == 0.0);
    CHECK(c(1, 0) == 1.0);
    CHECK(c(1, 1) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
    CHECK(c(1, 2) == 5.0);

    SUBCASE("theta in [-pi, pi)") {
        Points3<double> q(1, 3);
        q << -1, 0, 0;
        CHECK(to_cylindrical(q)(0, 1) == doctest::Approx(-std::numbers::pi));
    }
    SUBCASE("round trip") {
        const auto pts = random_points(500, 30.0, 1);
        const auto back = from_cylindrical(to_cylindrical(pts));
        CHECK((back - pts).cwiseAbs().maxCoeff() <= 1e-12);
        const auto cyl = to_cylindrical(pts);
        CHECK((cyl.col(0).array() >= 0).all());
        CHECK((cyl.col(1).array() >= -std::numbers::pi).all());
        CHECK((cyl.col(1).array() < std::numbers::pi).all());
    }
    SUBCASE("templated on scalar") {
        Points3<float> f(1, 3);
        f << 3.f, 4.f, 1.f;
        CHECK(to_cylindrical(f)(0, 0) == doctest::Approx(5.0f));
    }
}

TEST_CASE("partition") {
    CylGridConfig cfg;
    cfg.r_min = 0;
    cfg.r_max = 10;
    cfg.bins = {10, 8, 4};
    cfg.z_min = -2;
    cfg.z_max = 2;

    SUBCASE("boundary rule") {
        Points3<double> cyl(3, 3);
        cyl << 0, 0, 0, 10, 0, 0, 5, 0, -3;
        const Partition p = partition(cyl, cfg);
        CHECK(p.coord[0][0] == 0);
        CHECK(p.coord[1][0] == 9);
        CHECK(p.voxel[2] == -1);
        CHECK(p.dropped_count == 1);
    }
    SUBCASE("random cloud matches scalar binning") {
        const auto pts = random_points(2000, 12.0, 2);
        const auto cyl = to_cylindrical(pts);
        const Partition p = partition(cyl, cfg);
        Index dropped = 0;
        for (Index i = 0; i < pts.rows(); ++i) {
            const double r = std::sqrt(pts(i, 0) * pts(i, 0) + pts(i, 1) * pts(i, 1));
            const double th = std::atan2(pts(i, 1), pts(i, 0));
            const Index h = scan_bin(r, 0, 10, 10), l = scan_bin(pts(i, 2), -2, 2, 4);
            const Index w = scan_bin(th, -std::numbers::pi, std::numbers::pi, 8);
            if (h < 0 || l < 0) {
                ++dropped;
                CHECK(p.voxel[static_cast<std::size_t>(i)] == -1);
                continue;
            }
            CHECK(p.coord[static_cast<std::size_t>(i)] == std::array<Index, 3>{h, w, l});
        }
        CHECK(p.dropped_count == dropped);
    }
    SUBCASE("radial voxel volume grows with radius") {
        for (Index h = 1; h < cfg.bins[0]; ++h) CHECK(radial_voxel_volume(cfg, h) >= radial_voxel_volume(cfg, h - 1));
        double total = 0;
        for (Index h = 0; h < cfg.bins[0]; ++h) total += radial_voxel_volume(cfg, h) * cfg.bins[1] * cfg.bins[2];
        CHECK(total == doctest::Approx(std::numbers::pi * 100 * 4));
    }
    SUBCASE("invalid config") {
        CylGridConfig bad = cfg;
        bad.r_max = bad.r_min;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        bad = cfg;
        bad.bins[1] = 0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}

TEST_CASE("point features") {
    Rng rng(5);
    CylGridConfig cfg;
    cfg.bins = {8, 8, 4};
    cfg.r_max = 20;

    PointCloud cloud;
    cloud.points.resize(3, 3);
    cloud.points << 3, 4, 0.5, 3, 4, 0.5, -6, 1, -1;
    const auto cyl = to_cylindrical(cloud.points);
    const Partition part = partition(cyl, cfg);
    const Tensor in = point_inputs(cloud, cyl, part, cfg);
    REQUIRE(in.shape() == Shape{3, kPointInputDim});

    SUBCASE("zero MLP gives zero features") {
        PointMlp mlp("mlp", 32, 16, rng);
        ParamList ps;
        mlp.collect(ps);
        for (Parameter* p : ps) p->mutable_value().data().setZero();
        CHECK(mlp(Var(in)).value().data().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("identical points give identical rows") {
        PointMlp mlp("mlp", 32, 16, rng);
        const Tensor f = mlp(Var(in)).value();
        CHECK(f.matrix().row(0) == f.matrix().row(1));
    }
    SUBCASE("residual to voxel center is inside the voxel") {
        const auto m = in.matrix();
        CHECK(std::abs(m(0, 5)) <= 0.5 * 20.0 / 8 + 1e-12);
        CHECK(m(0, 0) == doctest::Approx(5.0));
    }
    SUBCASE("gradient through the MLP") {
        PointMlp mlp("mlp", 32, 16, rng);
        ParamList ps;
        mlp.collect(ps);
        Rng r2(9);
        const Tensor x = normal({6, kPointInputDim}, 1.0, r2);
        CHECK(gradient_check([&mlp](auto v) { return mlp(v[0]); }, {x}, ps).max_rel_error < 1e-6);
    }
}

TEST_CASE("scatter_max") {
    CylGridConfig cfg;
    cfg.bins = {4, 4, 2};

    SUBCASE("per-channel max") {
        const std::vector<Index> vox{3, 3};
        const VoxelizedCloud v = scatter_max(Var(Tensor({2, 2}, {1, 5, 3, 2})), vox, cfg);
        REQUIRE(v.coords.size() == 1);
        CHECK(v.features.value()[0] == 3.0);
        CHECK(v.features.value()[1] == 5.0);
    }
    SUBCASE("single point per voxel passes through") {
        const std::vector<Index> vox{7, 2, 30};
        const Tensor f({3, 2}, {1, 2, 3, 4, 5, 6});
        const VoxelizedCloud v = scatter_max(Var(f), vox, cfg);
        // output sorted by voxel id: 2, 7, 30
        CHECK(v.features.value().data() == Tensor({3, 2}, {3, 4, 1, 2, 5, 6}).data());
        CHECK(v.coords[0] == cfg.coord_of(2));
    }
    SUBCASE("all dropped") {
        const std::vector<Index> vox{-1, -1};
        CHECK_THROWS_AS(scatter_max(Var(Tensor::zeros({2, 3})), vox, cfg), EmptyCloudError);
    }
    SUBCASE("random group-by oracle, permutation invariance, gradient") {
        Rng rng(17);
        const Index n = 200, d = 5;
        std::uniform_int_distribution<Index> pick(-1, cfg.voxel_count() - 1);
        std::vector<Index> vox(n);
        for (auto& v : vox) v = pick(rng);
        const Tensor f = normal({n, d}, 1.0, rng);
        const VoxelizedCloud out = scatter_max(Var(f), vox, cfg);

        std::map<Index, std::vector<double>> groups;
        for (Index i = 0; i < n; ++i) {
            if (vox[static_cast<std::size_t>(i)] < 0) continue;
            auto [it, fresh] = groups.try_emplace(vox[static_cast<std::size_t>(i)], std::vector<double>(d, -INFINITY));
            for (Index j = 0; j < d; ++j) it->second[static_cast<std::size_t>(j)] = std::max(it->second[static_cast<std::size_t>(j)], f[i * d + j]);
        }
        std::vector<Index> sorted(vox.begin(), vox.end());
        sorted.erase(std::remove(sorted.begin(), sorted.end(), -1), sorted.end());
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        REQUIRE(out.coords.size() == sorted.size());
        REQUIRE(groups.size() == sorted.size());
        Index r = 0;
        for (const auto& [voxel, mx] : groups) {
            CHECK(out.coords[static_cast<std::size_t>(r)] == cfg.coord_of(voxel));
            for (Index j = 0; j < d; ++j) CHECK(out.features.value()[r * d + j] == mx[static_cast<std::size_t>(j)]);
            ++r;
        }

        // permuting the points leaves the result unchanged (distinct values)
        std::vector<Index> perm(n);
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor fp({n, d});
        std::vector<Index> vp(n);
        for (Index i = 0; i < n; ++i) {
            fp.matrix().row(i) = f.matrix().row(perm[static_cast<std::size_t>(i)]);
            vp[static_cast<std::size_t>(i)] = vox[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        }
        CHECK(scatter_max(Var(fp), vp, cfg).features.value().data() == out.features.value().data());

        const double err =
            gradient_check([&](auto v) { return scatter_max(v[0], vox, cfg).features; }, {f}).max_rel_error;
        CHECK(err < 1e-6);
    }
    SUBCASE("ties route the gradient to the first point") {
        const std::vector<Index> vox{4, 4};
        Var f(Tensor({2, 1}, {2.0, 2.0}), true);
        Gradients g = backward(sum(scatter_max(f, vox, cfg).features));
        CHECK((*g.of(f))[0] == 1.0);
        CHECK((*g.of(f))[1] == 0.0);
    }
}

TEST_CASE("cylindrical encoder") {
    Rng rng(3);
    CylGridConfig cfg;
    cfg.bins = {6, 8, 4};
    cfg.r_max = 20;
    CylindricalEncoder enc("pc", cfg, 32, 8, rng);
    PointCloud cloud;
    cloud.points = random_points(300, 15.0, 4);
    const VoxelizedCloud v = enc(cloud);
    CHECK(v.features.dim(1) == 8);
    CHECK(static_cast<Index>(v.coords.size()) == v.features.dim(0));
    CHECK(v.dropped_count >= 0);

    PointCloud far;
    far.points.resize(1, 3);
    far.points << 100, 0, 0;
    CHECK_THROWS_AS(enc(far), EmptyCloudError);
}
