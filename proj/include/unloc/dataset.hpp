#pragma once

#include "unloc/io.hpp"
#include "unloc/model.hpp"
#include "unloc/synth.hpp"
#include "unloc/sync.hpp"

#include <filesystem>
#include <map>
#include <vector>

namespace unloc {

/// Radar geometry and image size recorded in a dataset's meta.txt.
struct DatasetMeta {
    Index radar_azimuths = 0, radar_range_bins = 0;
    double radar_range_resolution = 1.0, radar_azimuth_0 = 0.0;
    Index image_height = 0, image_width = 0;
    double world_diameter = 0.0;
};

DatasetMeta read_meta(const fs::path& root);

/// Frame files of every sensor directory present under root, sorted by time.
/// File stems are the timestamps in nanoseconds.
std::map<SensorId, SensorStream> scan_streams(const fs::path& root);

struct SyncOptions {
    /// Ground-truth spacing above this is filled from odometry and treated as a hole by align.
    Timestamp max_gap_ns = 200'000'000;
};

struct SyncReport {
    std::size_t samples = 0;
    std::size_t dropped_radar = 0;
    std::size_t gap_filled = 0;
    bool dead_reckoned = false;
};

inline const char* kManifestName = "manifest.csv";

/// gt.csv (+ odometry.csv when present) -> gap_fill -> align -> manifest.csv.
/// Throws MissingSensorError naming an absent sensor and CoverageError for
/// radar frames that remain uncovered.
SyncReport sync_dataset(const fs::path& root, const SyncOptions& opt = {});

/// Reads one frame; radar scans are rasterized to (1, H, W) Cartesian images.
SensorFrame load_frame(const fs::path& root, SensorId sensor, const std::string& relative_path, const DatasetMeta& meta,
                       Index image_h, Index image_w);

/// Every manifest record as a sample holding the requested sensors. A
/// requested sensor without a directory raises MissingSensorError.
std::vector<SensorSample> load_samples(const fs::path& root, std::span<const SensorId> sensors, Index image_h, Index image_w);

}  // namespace unloc
