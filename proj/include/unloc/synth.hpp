#pragma once

#include "unloc/cylindrical.hpp"
#include "unloc/imaging.hpp"
#include "unloc/init.hpp"
#include "unloc/pose.hpp"
#include "unloc/sensors.hpp"
#include "unloc/sync.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <map>
#include <vector>

namespace unloc {

/// Landmarks with reflectivity and a per-landmark colour tint. Every landmark
/// also carries a rigid cluster of surface points around it.
struct World {
    Points3<double> landmarks;   // P x 3, metres
    Eigen::VectorXd reflectivity;  // P, in [0, 1]
    Points3<double> tint;        // P x 3, in [0, 1]
    Points3<double> surface;     // (P * kClusterSize) x 3, cluster of landmark i at rows [5i, 5i + 5)
    Eigen::AlignedBox3d bounds;

    static constexpr Index kClusterSize = 5;

    Index size() const { return landmarks.rows(); }
    /// Diagonal of the bounding box.
    double diameter() const { return bounds.diagonal().norm(); }
    void validate() const;
};

struct WorldConfig {
    Index landmarks = 400;
    Eigen::Vector3d lower{-40.0, -40.0, 0.0};
    Eigen::Vector3d upper{40.0, 40.0, 3.0};
    double cluster_radius = 0.25;
};

World make_world(const WorldConfig& cfg, std::uint64_t seed);
/// A world from explicit landmarks; clusters use the fixed template only.
World make_world(const Points3<double>& landmarks, const Eigen::VectorXd& reflectivity, const Eigen::AlignedBox3d& bounds);

/// Closed Catmull-Rom loop through control positions, traversed once per
/// `period` seconds at uniform parameter speed. Yaw follows the heading; roll
/// and pitch are small sinusoids.
class Trajectory {
public:
    Trajectory(std::vector<Eigen::Vector3d> control, double period, double max_speed, double tilt_amplitude = 0.02);

    Pose6DoF at(double seconds) const;
    Pose6DoF at(Timestamp t) const { return at(static_cast<double>(t) * 1e-9); }
    Eigen::Vector3d position(double seconds) const;
    Eigen::Vector3d velocity(double seconds) const;
    /// Largest speed over a dense sampling of one period.
    double peak_speed() const;
    double period() const { return period_; }

private:
    std::pair<std::size_t, double> locate(double seconds) const;

    std::vector<Eigen::Vector3d> control_;
    double period_;
    double tilt_;
};

struct TrajectoryConfig {
    Index control_points = 8;
    double radius = 20.0;
    double jitter = 4.0;
    double height = 0.5;
    double period = 20.0;  // seconds per loop
    double max_speed = 15.0;
};

Trajectory make_trajectory(const TrajectoryConfig& cfg, std::uint64_t seed);

/// Points within `max_range` of the sensor in the sensor frame: every in-range
/// landmark contributes its whole cluster plus isotropic noise of `noise_sigma`.
/// Throws EmptyCloudError when no landmark is in range.
PointCloud render_pointcloud(const World& world, const Pose6DoF& pose, double max_range, double noise_sigma, Rng& rng);

struct RadarConfig {
    Index azimuths = 64;
    Index range_bins = 48;
    double range_resolution = 1.0;
    double azimuth_0 = 0.0;
    double speckle = 0.02;  // std of additive noise
};

/// Bilinear splat of landmark reflectivity into (azimuth, range) bins using the
/// horizontal range, plus Gaussian speckle, clipped to [0, 1].
RadarPolarScan render_radar(const World& world, const Pose6DoF& pose, const RadarConfig& cfg, Rng& rng);

/// Pinhole camera looking along sensor +x with +y left and +z up:
/// u = cx - fx y / x, v = cy - fy z / x.
struct CameraIntrinsics {
    double fx = 32.0, fy = 32.0;
    double cx = 31.5, cy = 31.5;
    Index width = 64, height = 64;
    double blob_sigma = 1.0;  // pixels
    double near = 0.1;

    void validate() const;
};

/// (3, H, W) image of Gaussian blobs, brightness reflectivity * tint, clipped to 1.
Tensor render_camera(const World& world, const Pose6DoF& pose, const CameraIntrinsics& k);

/// Pose of each sensor in the vehicle frame.
Pose6DoF sensor_mount(SensorId s);

struct SynthConfig {
    WorldConfig world;
    TrajectoryConfig trajectory;
    RadarConfig radar;
    CameraIntrinsics camera;
    double lidar_range = 48.0;
    double lidar_noise = 0.02;
    double duration = 10.0;  // seconds
    double lidar_rate = 20.0, camera_rate = 16.0, radar_rate = 4.0, gt_rate = 50.0;
    /// Ground-truth rows strictly inside these (start, end) second intervals are dropped.
    std::vector<std::pair<double, double>> gt_gaps;
    std::uint64_t seed = 1;

    void validate() const;
    double rate(SensorId s) const;
};

struct EmitSummary {
    std::map<SensorId, Index> frames;
    Index empty_clouds = 0;  // LiDAR frames skipped for lack of landmarks
    Index gt_rows = 0;
    double world_diameter = 0.0;
};

/// Frame timestamps k * 1e9 / rate for k = 0, 1, ... below the duration.
std::vector<Timestamp> frame_times(double rate, double duration);

/// Writes gt.csv, odometry.csv, meta.txt and one directory per sensor with
/// zero-padded timestamp file names. Deterministic in the config.
EmitSummary emit_dataset(const World& world, const Trajectory& trajectory, const SynthConfig& cfg,
                         const std::filesystem::path& root);
/// make_world + make_trajectory + emit_dataset.
EmitSummary emit_dataset(const SynthConfig& cfg, const std::filesystem::path& root);

/// File extension of a sensor's frames.
std::string frame_extension(SensorId s);

}  // namespace unloc
