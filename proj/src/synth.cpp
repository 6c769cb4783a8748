#include "unloc/synth.hpp"

#include "unloc/errors.hpp"
#include "unloc/io.hpp"

#include <cmath>
#include <numbers>

namespace unloc {

namespace {

constexpr double kPi = std::numbers::pi;

/// Rigid offsets around a landmark; they sum to zero and span 3-D.
const std::array<Eigen::Vector3d, World::kClusterSize> kClusterTemplate{
    Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(-0.5, 0.8, 0.0), Eigen::Vector3d(-0.5, -0.8, 0.0),
    Eigen::Vector3d(0.0, 0.0, 0.9), Eigen::Vector3d(0.0, 0.0, -0.9)};

Points3<double> cluster_points(const Points3<double>& landmarks, double radius, Rng* rng) {
    const Index p = landmarks.rows();
    Points3<double> out(p * World::kClusterSize, 3);
    std::uniform_real_distribution<double> jitter(0.7, 1.3);
    for (Index i = 0; i < p; ++i) {
        const double scale = radius * (rng ? jitter(*rng) : 1.0);
        for (Index k = 0; k < World::kClusterSize; ++k)
            out.row(i * World::kClusterSize + k) = landmarks.row(i) + scale * kClusterTemplate[static_cast<std::size_t>(k)].transpose();
    }
    return out;
}

Timestamp seconds_to_ns(double s) { return static_cast<Timestamp>(std::llround(s * 1e9)); }

}  // namespace

void World::validate() const {
    if (landmarks.rows() < 1) throw ConfigError("world: no landmarks");
    if (reflectivity.size() != landmarks.rows() || tint.rows() != landmarks.rows() ||
        surface.rows() != landmarks.rows() * kClusterSize)
        throw DimensionError("world: landmark attribute counts differ");
    for (Index i = 0; i < landmarks.rows(); ++i) {
        if (!bounds.contains(landmarks.row(i).transpose())) throw ConfigError("world: landmark " + std::to_string(i) + " outside bounds");
        if (!(reflectivity[i] >= 0.0 && reflectivity[i] <= 1.0)) throw ConfigError("world: reflectivity outside [0, 1]");
    }
}

World make_world(const WorldConfig& cfg, std::uint64_t seed) {
    if (cfg.landmarks < 1) throw ConfigError("world: landmarks must be >= 1");
    if ((cfg.upper.array() <= cfg.lower.array()).any()) throw ConfigError("world: empty bounds");
    if (!(cfg.cluster_radius >= 0.0)) throw ConfigError("world: negative cluster radius");
    Rng rng(mix_seed(seed, 0x776f726c64));
    World w;
    w.bounds = Eigen::AlignedBox3d(cfg.lower, cfg.upper);
    w.landmarks.resize(cfg.landmarks, 3);
    w.reflectivity.resize(cfg.landmarks);
    w.tint.resize(cfg.landmarks, 3);
    std::uniform_real_distribution<double> u01(0.0, 1.0), refl(0.3, 1.0);
    for (Index i = 0; i < cfg.landmarks; ++i) {
        for (int k = 0; k < 3; ++k) w.landmarks(i, k) = cfg.lower[k] + (cfg.upper[k] - cfg.lower[k]) * u01(rng);
        w.reflectivity[i] = refl(rng);
        for (int k = 0; k < 3; ++k) w.tint(i, k) = refl(rng);
    }
    w.surface = cluster_points(w.landmarks, cfg.cluster_radius, &rng);
    w.validate();
    return w;
}

World make_world(const Points3<double>& landmarks, const Eigen::VectorXd& reflectivity, const Eigen::AlignedBox3d& bounds) {
    World w;
    w.landmarks = landmarks;
    w.reflectivity = reflectivity;
    w.tint = Points3<double>::Ones(landmarks.rows(), 3);
    w.surface = cluster_points(landmarks, WorldConfig{}.cluster_radius, nullptr);
    w.bounds = bounds;
    w.validate();
    return w;
}

Trajectory::Trajectory(std::vector<Eigen::Vector3d> control, double period, double max_speed, double tilt_amplitude)
    : control_(std::move(control)), period_(period), tilt_(tilt_amplitude) {
    if (control_.size() < 3) throw ConfigError("trajectory: need at least 3 control points");
    if (!(period_ > 0.0)) throw ConfigError("trajectory: period must be positive");
    if (!(max_speed > 0.0)) throw ConfigError("trajectory: max speed must be positive");
    const double peak = peak_speed();
    if (peak > max_speed)
        throw ConfigError("trajectory: peak speed " + std::to_string(peak) + " m/s exceeds the bound " + std::to_string(max_speed));
}

std::pair<std::size_t, double> Trajectory::locate(double seconds) const {
    double phase = std::fmod(seconds / period_, 1.0);
    if (phase < 0.0) phase += 1.0;
    const double u = phase * static_cast<double>(control_.size());
    auto seg = static_cast<std::size_t>(std::floor(u));
    if (seg >= control_.size()) seg = control_.size() - 1;
    return {seg, u - static_cast<double>(seg)};
}

Eigen::Vector3d Trajectory::position(double seconds) const {
    const auto [seg, s] = locate(seconds);
    const std::size_t n = control_.size();
    const Eigen::Vector3d &p0 = control_[(seg + n - 1) % n], &p1 = control_[seg], &p2 = control_[(seg + 1) % n],
                          &p3 = control_[(seg + 2) % n];
    return 0.5 * (2.0 * p1 + (p2 - p0) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s +
                  (3.0 * p1 - p0 - 3.0 * p2 + p3) * s * s * s);
}

Eigen::Vector3d Trajectory::velocity(double seconds) const {
    const auto [seg, s] = locate(seconds);
    const std::size_t n = control_.size();
    const Eigen::Vector3d &p0 = control_[(seg + n - 1) % n], &p1 = control_[seg], &p2 = control_[(seg + 1) % n],
                          &p3 = control_[(seg + 2) % n];
    const Eigen::Vector3d ds =
        0.5 * ((p2 - p0) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s + 3.0 * (3.0 * p1 - p0 - 3.0 * p2 + p3) * s * s);
    return ds * static_cast<double>(n) / period_;
}

double Trajectory::peak_speed() const {
    double peak = 0.0;
    const int samples = 64 * static_cast<int>(control_.size());
    for (int i = 0; i < samples; ++i) peak = std::max(peak, velocity(period_ * i / samples).norm());
    return peak;
}

Pose6DoF Trajectory::at(double seconds) const {
    Pose6DoF p;
    p.translation = position(seconds);
    const Eigen::Vector3d v = velocity(seconds);
    const double w = 2.0 * kPi * seconds / period_;
    p.rotation = Eigen::Vector3d(wrap_angle(std::atan2(v.y(), v.x())), tilt_ * std::sin(3.0 * w), tilt_ * std::cos(2.0 * w));
    return p;
}

Trajectory make_trajectory(const TrajectoryConfig& cfg, std::uint64_t seed) {
    if (cfg.control_points < 3) throw ConfigError("trajectory: control_points must be >= 3");
    if (!(cfg.radius > 0.0) || !(cfg.jitter >= 0.0) || cfg.jitter >= cfg.radius)
        throw ConfigError("trajectory: need radius > jitter >= 0");
    Rng rng(mix_seed(seed, 0x7472616a));
    std::uniform_real_distribution<double> j(-cfg.jitter, cfg.jitter), h(-0.2, 0.2);
    std::vector<Eigen::Vector3d> control;
    for (Index k = 0; k < cfg.control_points; ++k) {
        const double a = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(cfg.control_points);
        const double r = cfg.radius + j(rng);
        control.emplace_back(r * std::cos(a), r * std::sin(a), cfg.height + h(rng));
    }
    return Trajectory(std::move(control), cfg.period, cfg.max_speed);
}

PointCloud render_pointcloud(const World& world, const Pose6DoF& pose, double max_range, double noise_sigma, Rng& rng) {
    if (!(max_range > 0.0)) throw ConfigError("render_pointcloud: max_range must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("render_pointcloud: negative noise");
    const Eigen::Isometry3d to_sensor = pose.isometry().inverse();
    std::vector<Index> visible;
    for (Index i = 0; i < world.size(); ++i)
        if ((to_sensor * Eigen::Vector3d(world.landmarks.row(i).transpose())).norm() <= max_range) visible.push_back(i);
    if (visible.empty()) throw EmptyCloudError("render_pointcloud: no landmark within range");

    std::normal_distribution<double> noise(0.0, 1.0);
    PointCloud cloud;
    const Index n = static_cast<Index>(visible.size()) * World::kClusterSize;
    cloud.points.resize(n, 3);
    Eigen::VectorXd intensity(n);
    Index row = 0;
    for (Index i : visible) {
        for (Index k = 0; k < World::kClusterSize; ++k, ++row) {
            Eigen::Vector3d p = to_sensor * Eigen::Vector3d(world.surface.row(i * World::kClusterSize + k).transpose());
            if (noise_sigma > 0.0)
                for (int c = 0; c < 3; ++c) p[c] += noise_sigma * noise(rng);
            cloud.points.row(row) = p.transpose();
            intensity[row] = world.reflectivity[i];
        }
    }
    cloud.intensity = std::move(intensity);
    return cloud;
}

RadarPolarScan render_radar(const World& world, const Pose6DoF& pose, const RadarConfig& cfg, Rng& rng) {
    if (cfg.azimuths < 4 || cfg.range_bins < 4) throw ConfigError("render_radar: need at least 4 azimuths and 4 range bins");
    if (!(cfg.range_resolution > 0.0) || !(cfg.speckle >= 0.0)) throw ConfigError("render_radar: invalid resolution or speckle");
    RadarPolarScan scan;
    scan.azimuth_0 = cfg.azimuth_0;
    scan.range_resolution = cfg.range_resolution;
    scan.power = RowMatrixXd::Zero(cfg.azimuths, cfg.range_bins);
    const double bin = 2.0 * kPi / static_cast<double>(cfg.azimuths);
    const Eigen::Isometry3d to_sensor = pose.isometry().inverse();
    for (Index i = 0; i < world.size(); ++i) {
        const Eigen::Vector3d p = to_sensor * Eigen::Vector3d(world.landmarks.row(i).transpose());
        const double fr = std::hypot(p.x(), p.y()) / cfg.range_resolution;
        if (fr > static_cast<double>(cfg.range_bins - 1)) continue;
        double rel = std::fmod(std::atan2(p.y(), p.x()) - cfg.azimuth_0, 2.0 * kPi);
        if (rel < 0.0) rel += 2.0 * kPi;
        const double fa = rel / bin;
        const auto a0 = static_cast<Index>(std::floor(fa)) % cfg.azimuths;
        const Index a1 = (a0 + 1) % cfg.azimuths;
        const double wa = fa - std::floor(fa);
        const auto r0 = static_cast<Index>(std::floor(fr));
        const Index r1 = std::min(r0 + 1, cfg.range_bins - 1);
        const double wr = fr - static_cast<double>(r0);
        const double v = world.reflectivity[i];
        scan.power(a0, r0) += v * (1 - wa) * (1 - wr);
        scan.power(a0, r1) += v * (1 - wa) * wr;
        scan.power(a1, r0) += v * wa * (1 - wr);
        scan.power(a1, r1) += v * wa * wr;
    }
    if (cfg.speckle > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.speckle);
        for (Index k = 0; k < scan.power.size(); ++k) scan.power.data()[k] += noise(rng);
    }
    scan.power = scan.power.cwiseMax(0.0).cwiseMin(1.0);
    return scan;
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
    if (width < 32 || height < 32 || width % 32 != 0 || height % 32 != 0)
        throw ConfigError("camera: image size must be a positive multiple of 32");
    if (!(blob_sigma > 0.0) || !(near > 0.0)) throw ConfigError("camera: blob sigma and near plane must be positive");
}

Tensor render_camera(const World& world, const Pose6DoF& pose, const CameraIntrinsics& k) {
    k.validate();
    Tensor image({3, k.height, k.width});
    const Eigen::Isometry3d to_sensor = pose.isometry().inverse();
    const double reach = 3.0 * k.blob_sigma;
    const double inv2s2 = 1.0 / (2.0 * k.blob_sigma * k.blob_sigma);
    const Index plane = k.height * k.width;
    for (Index i = 0; i < world.size(); ++i) {
        const Eigen::Vector3d p = to_sensor * Eigen::Vector3d(world.landmarks.row(i).transpose());
        if (p.x() <= k.near) continue;
        const double u = k.cx - k.fx * p.y() / p.x(), v = k.cy - k.fy * p.z() / p.x();
        const auto c0 = std::max<Index>(0, static_cast<Index>(std::ceil(u - reach)));
        const auto c1 = std::min<Index>(k.width - 1, static_cast<Index>(std::floor(u + reach)));
        const auto r0 = std::max<Index>(0, static_cast<Index>(std::ceil(v - reach)));
        const auto r1 = std::min<Index>(k.height - 1, static_cast<Index>(std::floor(v + reach)));
        for (Index r = r0; r <= r1; ++r)
            for (Index c = c0; c <= c1; ++c) {
                const double du = static_cast<double>(c) - u, dv = static_cast<double>(r) - v;
                const double g = world.reflectivity[i] * std::exp(-(du * du + dv * dv) * inv2s2);
                for (Index ch = 0; ch < 3; ++ch) image[ch * plane + r * k.width + c] += g * world.tint(i, ch);
            }
    }
    for (Index i = 0; i < image.size(); ++i) image[i] = std::min(image[i], 1.0);
    return image;
}

Pose6DoF sensor_mount(SensorId s) {
    Pose6DoF m;
    switch (s) {
        case SensorId::L1: m.translation = {0.0, 0.5, 0.0}; break;
        case SensorId::L2: m.translation = {0.0, -0.5, 0.0}; break;
        case SensorId::C1: m.rotation[0] = kPi / 2; break;
        case SensorId::C2: m.rotation[0] = -kPi / 2; break;
        case SensorId::C3: m.rotation[0] = kPi; break;
        case SensorId::R: break;
    }
    return m;
}

void SynthConfig::validate() const {
    for (double r : {lidar_rate, camera_rate, radar_rate, gt_rate})
        if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("synth: rates must be positive, got " + std::to_string(r));
    if (!(duration > 0.0)) throw ConfigError("synth: duration must be positive");
    if (!(lidar_range > 0.0) || !(lidar_noise >= 0.0)) throw ConfigError("synth: invalid lidar range or noise");
    if (radar.azimuths < 4 || radar.range_bins < 4 || !(radar.range_resolution > 0.0) || !(radar.speckle >= 0.0))
        throw ConfigError("synth: invalid radar config");
    camera.validate();
    for (const auto& [a, b] : gt_gaps)
        if (!(b > a)) throw ConfigError("synth: ground-truth gap with end <= start");
}

double SynthConfig::rate(SensorId s) const {
    switch (modality_of(s)) {
        case Modality::point_cloud: return lidar_rate;
        case Modality::image: return camera_rate;
        case Modality::radar: return radar_rate;
    }
    return radar_rate;
}

std::vector<Timestamp> frame_times(double rate, double duration) {
    if (!(rate > 0.0)) throw ConfigError("frame_times: rate must be positive");
    const Timestamp end = seconds_to_ns(duration);
    std::vector<Timestamp> out;
    for (std::int64_t k = 0;; ++k) {
        const Timestamp t = static_cast<Timestamp>(std::llround(static_cast<double>(k) * 1e9 / rate));
        if (t >= end) break;
        out.push_back(t);
    }
    return out;
}

std::string frame_extension(SensorId s) { return modality_of(s) == Modality::point_cloud ? "unlp" : "unri"; }

EmitSummary emit_dataset(const World& world, const Trajectory& trajectory, const SynthConfig& cfg, const std::filesystem::path& root) {
    cfg.validate();
    world.validate();
    EmitSummary summary;
    summary.world_diameter = world.diameter();

    const Timestamp end = seconds_to_ns(cfg.duration);
    std::vector<Timestamp> grid = frame_times(cfg.gt_rate, cfg.duration);
    if (grid.back() != end) grid.push_back(end);

    GroundTruthStream gt;
    std::vector<OdometryIncrement> odometry;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Timestamp t = grid[i];
        bool dropped = false;
        for (const auto& [a, b] : cfg.gt_gaps) dropped |= t > seconds_to_ns(a) && t < seconds_to_ns(b);
        if (!dropped) gt.push_back(t, trajectory.at(t));
        if (i + 1 < grid.size()) odometry.push_back({t, grid[i + 1], relative_pose(trajectory.at(t), trajectory.at(grid[i + 1]))});
    }
    summary.gt_rows = static_cast<Index>(gt.size());
    write_ground_truth(root / "gt.csv", gt);
    write_odometry(root / "odometry.csv", odometry);

    for (SensorId s : kAllSensors) {
        const std::filesystem::path dir = root / std::string(sensor_name(s));
        std::filesystem::create_directories(dir);
        const Pose6DoF mount = sensor_mount(s);
        Index written = 0;
        for (Timestamp t : frame_times(cfg.rate(s), cfg.duration)) {
            const Pose6DoF pose = compose(trajectory.at(t), mount);
            Rng rng(mix_seed(mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(index_of(s))), static_cast<std::uint64_t>(t)));
            const std::filesystem::path file = dir / (timestamp_stem(t) + "." + frame_extension(s));
            switch (modality_of(s)) {
                case Modality::point_cloud:
                    try {
                        write_point_cloud(file, render_pointcloud(world, pose, cfg.lidar_range, cfg.lidar_noise, rng));
                    } catch (const EmptyCloudError&) {
                        ++summary.empty_clouds;
                        continue;
                    }
                    break;
                case Modality::image: write_raster(file, render_camera(world, pose, cfg.camera)); break;
                case Modality::radar: {
                    const RadarPolarScan scan = render_radar(world, pose, cfg.radar, rng);
                    Tensor t3({1, scan.azimuths(), scan.range_bins()});
                    t3.matrix(1) = Eigen::Map<const Eigen::RowVectorXd>(scan.power.data(), scan.power.size());
                    write_raster(file, t3);
                    break;
                }
            }
            ++written;
        }
        summary.frames[s] = written;
    }

    std::map<std::string, std::string> meta{
        {"seed", std::to_string(cfg.seed)},
        {"duration", format_double(cfg.duration)},
        {"lidar_rate", format_double(cfg.lidar_rate)},
        {"camera_rate", format_double(cfg.camera_rate)},
        {"radar_rate", format_double(cfg.radar_rate)},
        {"gt_rate", format_double(cfg.gt_rate)},
        {"radar_azimuths", std::to_string(cfg.radar.azimuths)},
        {"radar_range_bins", std::to_string(cfg.radar.range_bins)},
        {"radar_range_resolution", format_double(cfg.radar.range_resolution)},
        {"radar_azimuth_0", format_double(cfg.radar.azimuth_0)},
        {"image_height", std::to_string(cfg.camera.height)},
        {"image_width", std::to_string(cfg.camera.width)},
        {"landmarks", std::to_string(world.size())},
        {"world_diameter", format_double(summary.world_diameter)},
    };
    write_key_values(root / "meta.txt", meta);
    return summary;
}

EmitSummary emit_dataset(const SynthConfig& cfg, const std::filesystem::path& root) {
    cfg.validate();
    const World world = make_world(cfg.world, cfg.seed);
    const Trajectory trajectory = make_trajectory(cfg.trajectory, cfg.seed);
    return emit_dataset(world, trajectory, cfg, root);
}

}  // namespace unloc
