#pragma once

#include "unloc/cylindrical.hpp"
#include "unloc/imaging.hpp"
#include "unloc/sync.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace unloc {

namespace fs = std::filesystem;

/// "UNLP", u32 N, u8 has_intensity, N x 3 f32 xyz, then N f32 intensities if present.
void write_point_cloud(const fs::path& path, const PointCloud& cloud);
PointCloud read_point_cloud(const fs::path& path);

/// "UNRI", u32 rows, u32 cols, u8 channels, f32 data (channel, row, col).
/// In memory a raster is a (channels, rows, cols) tensor.
void write_raster(const fs::path& path, const Tensor& raster);
Tensor read_raster(const fs::path& path);

/// `timestamp_ns,x,y,z,yaw,roll,pitch`, optional trailing `source` column.
void write_ground_truth(const fs::path& path, const GroundTruthStream& gt);
GroundTruthStream read_ground_truth(const fs::path& path);

/// `t0_ns,t1_ns,dx,dy,dz,dyaw,droll,dpitch`.
void write_odometry(const fs::path& path, const std::vector<OdometryIncrement>& odo);
std::vector<OdometryIncrement> read_odometry(const fs::path& path);

/// Flat `key=value` lines; '#' starts a comment. Duplicate keys and lines
/// without '=' raise ConfigError.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source = "config");
std::map<std::string, std::string> read_key_values(const fs::path& path);
/// Sorted `key=value` lines.
std::string key_values_text(const std::map<std::string, std::string>& kv);
void write_key_values(const fs::path& path, const std::map<std::string, std::string>& kv);

/// One aligned sample: shared pose plus a relative path per sensor.
struct ManifestRecord {
    Timestamp radar_timestamp = 0;
    Pose6DoF pose;
    std::map<SensorId, std::string> paths;
};
void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const fs::path& path);

/// Zero-padded file stem for a timestamp.
std::string timestamp_stem(Timestamp t);
/// Writes `bytes` to path via a temporary file and rename.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);
/// Decimal text that parses back to the identical double.
std::string format_double(double v);

}  // namespace unloc
