#include <doctest.h>

#include "unloc/dataset.hpp"
#include "unloc/synth.hpp"

#include <Eigen/Geometry>

#include <numbers>

using namespace unloc;

namespace {

constexpr double kPi = std::numbers::pi;

World single_landmark(const Eigen::Vector3d& p, double refl = 1.0) {
    Points3<double> l(1, 3);
    l.row(0) = p.transpose();
    return make_world(l, Eigen::VectorXd::Constant(1, refl), Eigen::AlignedBox3d(Eigen::Vector3d::Constant(-50), Eigen::Vector3d::Constant(50)));
}

World empty_world() {
    // A single landmark far out of every sensor's reach.
    return single_landmark(Eigen::Vector3d(49, 49, 49), 0.5);
}

Eigen::Vector3d centroid(const Points3<double>& p) { return p.colwise().mean().transpose(); }

std::pair<double, double> blob_centroid(const Tensor& image, Index h, Index w) {
    double su = 0, sv = 0, s = 0;
    for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) {
            const double v = image[r * w + c];
            su += v * static_cast<double>(c), sv += v * static_cast<double>(r), s += v;
        }
    return {su / s, sv / s};
}

Index hottest_azimuth(const RadarPolarScan& s) {
    Index r, c;
    s.power.maxCoeff(&r, &c);
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "unloc_test_synth" / name;
    fs::remove_all(dir);
    return dir;
}

SynthConfig small_config() {
    SynthConfig c;
    c.world.landmarks = 120;
    c.duration = 2.0;
    return c;
}

}  // namespace

TEST_CASE("render_pointcloud frame algebra") {
    const World w = single_landmark({1, 0, 0});
    Rng rng(1);
    const PointCloud at_origin = render_pointcloud(w, Pose6DoF{}, 10.0, 0.0, rng);
    CHECK(at_origin.size() == World::kClusterSize);
    CHECK((centroid(at_origin.points) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
    REQUIRE(at_origin.intensity.has_value());
    CHECK(at_origin.intensity->isApproxToConstant(1.0));

    Pose6DoF shifted;
    shifted.translation = {1, 0, 0};
    const PointCloud moved = render_pointcloud(w, shifted, 10.0, 0.0, rng);
    for (Index i = 0; i < moved.size(); ++i)
        CHECK((moved.points.row(i) - at_origin.points.row(i) - Eigen::RowVector3d(-1, 0, 0)).norm() < 1e-15);

    CHECK_THROWS_AS(render_pointcloud(w, Pose6DoF{}, 0.5, 0.0, rng), EmptyCloudError);
    CHECK_THROWS_AS(render_pointcloud(w, Pose6DoF{}, 0.0, 0.0, rng), ConfigError);

    SUBCASE("noise is isotropic with the requested sigma") {
        Rng g(2);
        const PointCloud clean = render_pointcloud(w, Pose6DoF{}, 10.0, 0.0, g);
        Eigen::Vector3d sum2 = Eigen::Vector3d::Zero();
        const int reps = 4000;
        for (int k = 0; k < reps; ++k) {
            const PointCloud noisy = render_pointcloud(w, Pose6DoF{}, 10.0, 0.1, g);
            sum2 += (noisy.points - clean.points).colwise().squaredNorm().transpose();
        }
        const Eigen::Vector3d sigma = (sum2 / (reps * World::kClusterSize)).cwiseSqrt();
        for (int c = 0; c < 3; ++c) CHECK(sigma[c] == doctest::Approx(0.1).epsilon(0.03));
    }
}

TEST_CASE("point-set registration recovers the relative pose") {
    const World w = make_world(WorldConfig{}, 11);
    Rng rng(3);
    const Trajectory traj = make_trajectory(TrajectoryConfig{}, 11);
    for (double t : {0.3, 4.1, 13.7}) {
        const Pose6DoF a = traj.at(t), b = traj.at(t + 2.5);
        const PointCloud ca = render_pointcloud(w, a, 1e3, 0.0, rng), cb = render_pointcloud(w, b, 1e3, 0.0, rng);
        REQUIRE(ca.size() == cb.size());
        const Eigen::Matrix4d m = Eigen::umeyama(cb.points.transpose(), ca.points.transpose(), false);
        Eigen::Isometry3d iso(m);
        const Pose6DoF est = Pose6DoF::from_isometry(iso), truth = relative_pose(a, b);
        CHECK((est.translation - truth.translation).norm() < 1e-6);
        CHECK(geodesic_angle(est, truth) < 1e-6);
    }
}

TEST_CASE("render_radar geometry") {
    RadarConfig cfg;
    cfg.speckle = 0.0;
    Rng rng(4);
    SUBCASE("landmark dead ahead") {
        for (double r : {3.2, 10.0, 17.7, 30.49}) {
            const RadarPolarScan s = render_radar(single_landmark({r, 0, 1.0}), Pose6DoF{}, cfg, rng);
            Index a, b;
            s.power.maxCoeff(&a, &b);
            CHECK(a == 0);
            CHECK(b == static_cast<Index>(std::lround(r / cfg.range_resolution)));
        }
    }
    SUBCASE("empty world and the noise floor") {
        const RadarPolarScan s = render_radar(empty_world(), Pose6DoF{}, cfg, rng);
        CHECK(s.power.isZero(0.0));
        RadarConfig noisy = cfg;
        noisy.speckle = 0.3;
        const RadarPolarScan n = render_radar(empty_world(), Pose6DoF{}, noisy, rng);
        CHECK(n.power.minCoeff() >= 0.0);
        CHECK(n.power.maxCoeff() <= 1.0);
        CHECK(n.power.maxCoeff() > 0.0);
    }
    SUBCASE("yawing the sensor shifts the hot azimuth bin") {
        const World w = single_landmark({12, 0, 1});
        const double bin = 2 * kPi / static_cast<double>(cfg.azimuths);
        for (double dtheta : {0.2, 0.9, 1.7, -2.3, 3.0}) {
            Pose6DoF p;
            p.rotation[0] = dtheta;
            const Index shift = static_cast<Index>(std::lround(dtheta / bin));
            const Index expected = ((-shift) % cfg.azimuths + cfg.azimuths) % cfg.azimuths;
            CHECK(hottest_azimuth(render_radar(w, p, cfg, rng)) == expected);
        }
    }
    SUBCASE("values clip at one") {
        Points3<double> l(3, 3);
        l << 10, 0, 0, 10, 0, 0.5, 10, 0, 1;
        const World w = make_world(l, Eigen::VectorXd::Ones(3), Eigen::AlignedBox3d(Eigen::Vector3d::Constant(-50), Eigen::Vector3d::Constant(50)));
        CHECK(render_radar(w, Pose6DoF{}, cfg, rng).power.maxCoeff() == 1.0);
    }
    RadarConfig bad = cfg;
    bad.azimuths = 3;
    CHECK_THROWS_AS(render_radar(empty_world(), Pose6DoF{}, bad, rng), ConfigError);
}

TEST_CASE("render_camera projection") {
    const CameraIntrinsics k;
    const Index plane = k.width * k.height;
    SUBCASE("optical axis hits the principal point") {
        const Tensor img = render_camera(single_landmark({8, 0, 0}), Pose6DoF{}, k);
        const auto [u, v] = blob_centroid(img, k.height, k.width);
        CHECK(u == doctest::Approx(k.cx).epsilon(1e-12));
        CHECK(v == doctest::Approx(k.cy).epsilon(1e-12));
        CHECK(img.shape() == Shape{3, 64, 64});
    }
    SUBCASE("behind the camera is not rendered") {
        const Tensor img = render_camera(single_landmark({-8, 0, 0}), Pose6DoF{}, k);
        CHECK(img.matrix().isZero(0.0));
    }
    SUBCASE("parallax between two poses") {
        const Eigen::Vector3d landmark(10, 1.5, 0.7);
        const World w = single_landmark(landmark);
        Pose6DoF a, b;
        b.translation = {2.0, -2.5, 0.6};
        b.rotation = {0.12, 0.02, -0.03};
        auto project = [&](const Pose6DoF& p) {
            const Eigen::Vector3d q = euler_to_matrix<double>(p.rotation).transpose() * (landmark - p.translation);
            return Eigen::Vector2d(k.cx - k.fx * q.y() / q.x(), k.cy - k.fy * q.z() / q.x());
        };
        const auto [ua, va] = blob_centroid(render_camera(w, a, k), k.height, k.width);
        const auto [ub, vb] = blob_centroid(render_camera(w, b, k), k.height, k.width);
        const Eigen::Vector2d predicted = project(b) - project(a);
        CHECK(std::abs((ub - ua) - predicted.x()) < 1.0);
        CHECK(std::abs((vb - va) - predicted.y()) < 1.0);
        CHECK(predicted.norm() > 3.0);
    }
    SUBCASE("brightness scales with reflectivity and tint") {
        const Tensor bright = render_camera(single_landmark({8, 0, 0}, 0.8), Pose6DoF{}, k);
        const Tensor dim = render_camera(single_landmark({8, 0, 0}, 0.4), Pose6DoF{}, k);
        for (Index i = 0; i < plane; ++i) CHECK(bright[i] == doctest::Approx(2 * dim[i]).epsilon(1e-12));
    }
    CameraIntrinsics bad = k;
    bad.width = 48;
    CHECK_THROWS_AS(render_camera(empty_world(), Pose6DoF{}, bad), ConfigError);
}

TEST_CASE("renders of one pose agree on the nearest landmark's bearing") {
    const Eigen::Vector3d landmark(0.5, 8.0, 1.0);
    const World w = single_landmark(landmark);
    Pose6DoF vehicle;
    vehicle.translation = {3, -2, 0.4};
    vehicle.rotation = {0.3, 0.0, 0.0};
    const Eigen::Vector3d world_point = vehicle.isometry() * landmark;
    const World placed = single_landmark(world_point);

    RadarConfig rc;
    rc.speckle = 0;
    Rng rng(6);
    const double bin = 2 * kPi / static_cast<double>(rc.azimuths);
    const RadarPolarScan scan = render_radar(placed, compose(vehicle, sensor_mount(SensorId::R)), rc, rng);
    const double radar_bearing = static_cast<double>(hottest_azimuth(scan)) * bin + rc.azimuth_0;

    const PointCloud cloud = render_pointcloud(placed, compose(vehicle, sensor_mount(SensorId::L1)), 50, 0.0, rng);
    const Eigen::Vector3d in_vehicle = sensor_mount(SensorId::L1).isometry() * centroid(cloud.points);
    const double cloud_bearing = std::atan2(in_vehicle.y(), in_vehicle.x());

    const CameraIntrinsics k;
    const Tensor img = render_camera(placed, compose(vehicle, sensor_mount(SensorId::C1)), k);
    Index r, c;
    img.matrix(3).row(0).maxCoeff(&c);
    r = c / k.width, c = c % k.width;
    const double camera_bearing = sensor_mount(SensorId::C1).rotation[0] + std::atan((k.cx - static_cast<double>(c)) / k.fx);

    const double truth = std::atan2(landmark.y(), landmark.x());
    CHECK(std::abs(wrap_angle(radar_bearing - truth)) <= bin);
    CHECK(std::abs(wrap_angle(cloud_bearing - truth)) < 1e-12);
    CHECK(std::abs(wrap_angle(camera_bearing - truth)) <= std::atan(1.0 / k.fx));
    CHECK(std::abs(wrap_angle(radar_bearing - camera_bearing)) <= bin + std::atan(1.0 / k.fx));
    (void)r;
}

TEST_CASE("trajectory") {
    const TrajectoryConfig cfg;
    const Trajectory t = make_trajectory(cfg, 5);
    CHECK(t.peak_speed() <= cfg.max_speed);
    CHECK((t.position(0.0) - t.position(cfg.period)).norm() < 1e-9);
    for (double s = 0.01; s < cfg.period; s += 0.37) {
        CHECK((t.position(s + 1e-7) - t.position(s)).norm() < 1e-5);
        const Eigen::Vector3d fd = (t.position(s + 1e-6) - t.position(s - 1e-6)) / 2e-6;
        CHECK((fd - t.velocity(s)).norm() < 1e-5);
        const Pose6DoF p = t.at(s);
        CHECK(std::abs(wrap_angle(p.rotation[0] - std::atan2(fd.y(), fd.x()))) < 1e-6);
        CHECK(std::abs(p.rotation[1]) <= 0.02);
    }
    TrajectoryConfig fast = cfg;
    fast.period = 1.0;
    CHECK_THROWS_AS(make_trajectory(fast, 5), ConfigError);
}

TEST_CASE("frame timestamps follow the rates") {
    CHECK(frame_times(4, 10).size() == 40);
    CHECK(frame_times(16, 10).size() == 160);
    CHECK(frame_times(20, 10).size() == 200);
    CHECK(frame_times(3, 1) == std::vector<Timestamp>{0, 333'333'333, 666'666'667});
    CHECK_THROWS_AS(frame_times(0, 1), ConfigError);
}

TEST_CASE("emit_dataset") {
    const SynthConfig cfg = small_config();
    const fs::path a = scratch("a"), b = scratch("b");
    const EmitSummary sa = emit_dataset(cfg, a);
    emit_dataset(cfg, b);

    CHECK(sa.frames.at(SensorId::R) == 8);
    CHECK(sa.frames.at(SensorId::C2) == 32);
    CHECK(sa.frames.at(SensorId::L1) + sa.empty_clouds >= 40);
    CHECK(sa.world_diameter == doctest::Approx(std::sqrt(80.0 * 80 * 2 + 9)));

    SUBCASE("byte-identical reruns") {
        std::size_t files = 0;
        for (const auto& e : fs::recursive_directory_iterator(a)) {
            if (!e.is_regular_file()) continue;
            const fs::path other = b / fs::relative(e.path(), a);
            REQUIRE(fs::exists(other));
            CHECK(read_file(e.path()) == read_file(other));
            ++files;
        }
        CHECK(files == 3 + 40 * 2 + 32 * 3 + 8);
    }
    SUBCASE("ground truth equals the trajectory bit-exactly") {
        const Trajectory traj = make_trajectory(cfg.trajectory, cfg.seed);
        const GroundTruthStream gt = read_ground_truth(a / "gt.csv");
        CHECK(gt.size() == 101);
        CHECK(gt.timestamps.back() == 2'000'000'000);
        for (std::size_t i = 0; i < gt.size(); ++i) CHECK(gt.poses[i] == traj.at(gt.timestamps[i]));
    }
    SUBCASE("sync succeeds with no coverage errors") {
        const SyncReport r = sync_dataset(a);
        CHECK(r.samples == 8);
        CHECK(r.dropped_radar == 0);
        CHECK(r.gap_filled == 0);
        const auto samples = load_samples(a, kAllSensors, 64, 64);
        CHECK(samples.size() == 8);
        CHECK(samples[3].frames.at(SensorId::R).image.shape() == Shape{1, 64, 64});
        CHECK(samples[3].frames.at(SensorId::C1).image.shape() == Shape{3, 64, 64});
        CHECK(samples[3].frames.at(SensorId::L2).cloud.size() > 0);
    }
    SUBCASE("different seeds differ") {
        SynthConfig other = cfg;
        other.seed = 2;
        const fs::path c = scratch("c");
        emit_dataset(other, c);
        CHECK(read_file(a / "gt.csv") != read_file(c / "gt.csv"));
    }
}

TEST_CASE("emit_dataset with a ground-truth gap") {
    SynthConfig cfg = small_config();
    cfg.duration = 4.0;
    cfg.gt_gaps = {{1.0, 2.5}};
    const fs::path root = scratch("gap");
    emit_dataset(cfg, root);
    const GroundTruthStream gt = read_ground_truth(root / "gt.csv");
    CHECK(gt.size() == 201 - 74);
    const SyncReport r = sync_dataset(root);
    CHECK(r.gap_filled == 74);
    CHECK(r.samples == 16);

    fs::remove(root / "odometry.csv");
    CHECK_THROWS_AS(sync_dataset(root), CoverageError);
}

TEST_CASE("sync names a missing sensor") {
    const fs::path root = scratch("missing");
    emit_dataset(small_config(), root);
    fs::remove_all(root / "C2");
    try {
        sync_dataset(root);
        FAIL("expected MissingSensorError");
    } catch (const MissingSensorError& e) {
        CHECK(std::string(e.what()).find("C2") != std::string::npos);
    }
}

TEST_CASE("synth config validation") {
    SynthConfig c = small_config();
    c.radar_rate = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.gt_gaps = {{2.0, 1.0}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
