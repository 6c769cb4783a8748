#include <doctest.h>

#include "unloc/init.hpp"
#include "unloc/io.hpp"

#include <cmath>
#include <fstream>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

using namespace unloc;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "unloc_test_io";
    fs::create_directories(dir);
    return dir / name;
}

Pose6DoF random_pose(std::mt19937_64& g) {
    std::uniform_real_distribution<double> u(-100, 100), a(-3.14159, 3.14159);
    Pose6DoF p;
    p.translation = Eigen::Vector3d(u(g), u(g), u(g));
    p.rotation = Eigen::Vector3d(a(g), a(g) * 0.1, a(g) * 0.1);
    return p;
}

}  // namespace

TEST_CASE("format_double round-trips bit-exactly") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    std::vector<double> vals{0.0, -0.0, 0.1, 1.0 / 3, 1e-300, 5e-324, std::numeric_limits<double>::max(), std::numbers::pi};
    for (int i = 0; i < 1000; ++i) vals.push_back(u(g) * std::pow(10.0, static_cast<double>(i % 40) - 20));
    for (double v : vals) {
        const std::string s = format_double(v);
        const double back = std::strtod(s.c_str(), nullptr);
        CHECK(std::memcmp(&v, &back, sizeof v) == 0);
    }
}

TEST_CASE("point cloud binary round trip") {
    std::mt19937_64 g(1);
    std::normal_distribution<double> n(0, 10);
    PointCloud c;
    c.points.resize(257, 3);
    for (Index i = 0; i < c.points.size(); ++i) c.points.data()[i] = static_cast<float>(n(g));

    SUBCASE("without intensity") {
        write_point_cloud(scratch("a.unlp"), c);
        const PointCloud r = read_point_cloud(scratch("a.unlp"));
        CHECK(r.points == c.points);
        CHECK_FALSE(r.intensity.has_value());
        CHECK(fs::file_size(scratch("a.unlp")) == 4 + 4 + 1 + 257 * 12);
    }
    SUBCASE("with intensity") {
        Eigen::VectorXd in(257);
        for (Index i = 0; i < 257; ++i) in[i] = static_cast<float>(i) / 256.0f;
        c.intensity = in;
        write_point_cloud(scratch("b.unlp"), c);
        const PointCloud r = read_point_cloud(scratch("b.unlp"));
        CHECK(r.points == c.points);
        REQUIRE(r.intensity.has_value());
        CHECK(*r.intensity == in);
    }
    SUBCASE("intensity count mismatch") {
        c.intensity = Eigen::VectorXd::Zero(3);
        CHECK_THROWS_AS(write_point_cloud(scratch("c.unlp"), c), DimensionError);
    }
    SUBCASE("bad magic and truncation") {
        write_point_cloud(scratch("d.unlp"), c);
        std::string bytes = read_file(scratch("d.unlp"));
        bytes[0] = 'X';
        write_file_atomic(scratch("e.unlp"), bytes);
        CHECK_THROWS_AS(read_point_cloud(scratch("e.unlp")), IoError);
        CHECK_THROWS_AS(read_raster(scratch("d.unlp")), IoError);
        bytes[0] = 'U';
        bytes.resize(bytes.size() - 5);
        write_file_atomic(scratch("f.unlp"), bytes);
        CHECK_THROWS_AS(read_point_cloud(scratch("f.unlp")), IoError);
        CHECK_THROWS_AS(read_point_cloud(scratch("missing.unlp")), IoError);
    }
}

TEST_CASE("raster binary round trip") {
    Rng rng(5);
    std::uniform_real_distribution<double> u01(0, 1);
    Tensor t({3, 7, 11});
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(u01(rng));
    write_raster(scratch("r.unri"), t);
    const Tensor r = read_raster(scratch("r.unri"));
    CHECK(r.shape() == t.shape());
    CHECK(r.matrix() == t.matrix());
    CHECK(fs::file_size(scratch("r.unri")) == 4 + 4 + 4 + 1 + 3 * 7 * 11 * 4);
    CHECK_THROWS_AS(write_raster(scratch("bad.unri"), Tensor({7, 11})), DimensionError);
}

TEST_CASE("ground truth and odometry CSV round trip bit-exactly") {
    std::mt19937_64 g(9);
    GroundTruthStream gt;
    for (int i = 0; i < 50; ++i) gt.push_back(i * 1'000'000 + 17, random_pose(g), i % 7 == 3);
    write_ground_truth(scratch("gt.csv"), gt);
    const GroundTruthStream r = read_ground_truth(scratch("gt.csv"));
    CHECK(r.timestamps == gt.timestamps);
    CHECK(r.filled == gt.filled);
    for (std::size_t i = 0; i < gt.size(); ++i) CHECK(r.poses[i] == gt.poses[i]);

    std::vector<OdometryIncrement> odo;
    for (int i = 0; i < 20; ++i) odo.push_back({i * 10, i * 10 + 10, random_pose(g)});
    write_odometry(scratch("odo.csv"), odo);
    const auto ro = read_odometry(scratch("odo.csv"));
    REQUIRE(ro.size() == odo.size());
    for (std::size_t i = 0; i < odo.size(); ++i) {
        CHECK(ro[i].t0 == odo[i].t0);
        CHECK(ro[i].t1 == odo[i].t1);
        CHECK(ro[i].delta == odo[i].delta);
    }

    SUBCASE("seven-column ground truth without source") {
        write_file_atomic(scratch("gt7.csv"), "timestamp_ns,x,y,z,yaw,roll,pitch\n5,1,2,3,0.1,0.2,0.3\n9,1,2,3,0.1,0.2,0.3\n");
        const GroundTruthStream s = read_ground_truth(scratch("gt7.csv"));
        CHECK(s.size() == 2);
        CHECK_FALSE(s.filled[0]);
        CHECK(s.poses[0].rotation[2] == 0.3);
    }
    SUBCASE("malformed rows") {
        write_file_atomic(scratch("bad1.csv"), "timestamp_ns,x,y,z,yaw,roll,pitch\n5,1,2,abc,0,0,0\n");
        CHECK_THROWS_AS(read_ground_truth(scratch("bad1.csv")), IoError);
        write_file_atomic(scratch("bad2.csv"), "t,x\n5,1\n");
        CHECK_THROWS_AS(read_ground_truth(scratch("bad2.csv")), IoError);
        write_file_atomic(scratch("bad3.csv"), "timestamp_ns,x,y,z,yaw,roll,pitch\n9,0,0,0,0,0,0\n5,0,0,0,0,0,0\n");
        CHECK_THROWS_AS(read_ground_truth(scratch("bad3.csv")), ConfigError);
    }
}

TEST_CASE("key-value files") {
    write_file_atomic(scratch("kv.txt"), "# header\nalpha = 1\n\nbeta=two words  # trailing\n");
    const auto kv = read_key_values(scratch("kv.txt"));
    CHECK(kv.size() == 2);
    CHECK(kv.at("alpha") == "1");
    CHECK(kv.at("beta") == "two words");
    write_key_values(scratch("kv2.txt"), kv);
    CHECK(read_key_values(scratch("kv2.txt")) == kv);

    write_file_atomic(scratch("kv3.txt"), "a=1\na=2\n");
    CHECK_THROWS_AS(read_key_values(scratch("kv3.txt")), ConfigError);
    write_file_atomic(scratch("kv4.txt"), "novalue\n");
    CHECK_THROWS_AS(read_key_values(scratch("kv4.txt")), ConfigError);
}

TEST_CASE("manifest round trip") {
    std::mt19937_64 g(4);
    std::vector<ManifestRecord> recs;
    for (int i = 0; i < 5; ++i) {
        ManifestRecord r;
        r.radar_timestamp = 250'000'000LL * i;
        r.pose = random_pose(g);
        for (SensorId s : kAllSensors) r.paths[s] = std::string(sensor_name(s)) + "/" + timestamp_stem(r.radar_timestamp + 3);
        recs.push_back(r);
    }
    write_manifest(scratch("m.csv"), recs);
    const auto back = read_manifest(scratch("m.csv"));
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].radar_timestamp == recs[i].radar_timestamp);
        CHECK(back[i].pose == recs[i].pose);
        CHECK(back[i].paths == recs[i].paths);
    }
    recs[0].paths.erase(SensorId::C3);
    CHECK_THROWS_AS(write_manifest(scratch("m2.csv"), recs), MissingSensorError);
}

TEST_CASE("timestamp stems sort like timestamps") {
    CHECK(timestamp_stem(42) == "0000000000000000042");
    CHECK(timestamp_stem(9) < timestamp_stem(10));
    CHECK(timestamp_stem(999'999'999) < timestamp_stem(1'000'000'000));
}

TEST_CASE("atomic write leaves no temporary file") {
    const fs::path p = scratch("sub/dir/file.bin");
    write_file_atomic(p, std::string("abc\0def", 7));
    CHECK(read_file(p) == std::string("abc\0def", 7));
    CHECK_FALSE(fs::exists(p.string() + ".tmp"));
    write_file_atomic(p, "x");
    CHECK(read_file(p) == "x");
}
