#include "unloc/dataset.hpp"

#include <charconv>

namespace unloc {

namespace {

std::string need(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError(path.string() + ": missing key '" + key + "'");
    return it->second;
}

double to_double(const std::string& s, const std::string& key) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError("meta: '" + key + "' is not a number: " + s);
    return v;
}

Index to_index(const std::string& s, const std::string& key) {
    Index v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError("meta: '" + key + "' is not an integer: " + s);
    return v;
}

}  // namespace

DatasetMeta read_meta(const fs::path& root) {
    const fs::path path = root / "meta.txt";
    const auto kv = read_key_values(path);
    auto d = [&](const std::string& k) { return to_double(need(kv, k, path), k); };
    auto i = [&](const std::string& k) { return to_index(need(kv, k, path), k); };
    DatasetMeta m;
    m.radar_azimuths = i("radar_azimuths");
    m.radar_range_bins = i("radar_range_bins");
    m.radar_range_resolution = d("radar_range_resolution");
    m.radar_azimuth_0 = d("radar_azimuth_0");
    m.image_height = i("image_height");
    m.image_width = i("image_width");
    m.world_diameter = d("world_diameter");
    return m;
}

std::map<SensorId, SensorStream> scan_streams(const fs::path& root) {
    std::map<SensorId, SensorStream> out;
    for (SensorId s : kAllSensors) {
        const fs::path dir = root / std::string(sensor_name(s));
        if (!fs::is_directory(dir)) continue;
        std::vector<std::pair<Timestamp, std::string>> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file() || e.path().extension() != "." + frame_extension(s)) continue;
            const std::string stem = e.path().stem().string();
            Timestamp t = 0;
            const auto [p, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), t);
            if (ec != std::errc() || p != stem.data() + stem.size())
                throw IoError(e.path().string() + ": file stem is not a timestamp");
            files.emplace_back(t, std::string(sensor_name(s)) + "/" + e.path().filename().string());
        }
        std::sort(files.begin(), files.end());
        SensorStream st;
        st.sensor = s;
        for (auto& [t, p] : files) {
            if (!st.timestamps.empty() && st.timestamps.back() == t)
                throw IoError(dir.string() + ": duplicate timestamp " + std::to_string(t));
            st.timestamps.push_back(t);
            st.paths.push_back(std::move(p));
        }
        out.emplace(s, std::move(st));
    }
    return out;
}

SyncReport sync_dataset(const fs::path& root, const SyncOptions& opt) {
    const auto streams = scan_streams(root);
    for (SensorId s : kAllSensors)
        if (!streams.count(s) || streams.at(s).timestamps.empty())
            throw MissingSensorError("sync: dataset has no frames for sensor " + std::string(sensor_name(s)) + " under " +
                                     (root / std::string(sensor_name(s))).string());

    GroundTruthStream gt = read_ground_truth(root / "gt.csv");
    SyncReport report;
    if (fs::exists(root / "odometry.csv")) {
        GapFillResult filled = gap_fill(gt, read_odometry(root / "odometry.csv"), opt.max_gap_ns);
        report.gap_filled = filled.filled;
        report.dead_reckoned = filled.dead_reckoned;
        gt = std::move(filled.stream);
    }
    const AlignResult aligned = align(streams, gt, AlignOptions{opt.max_gap_ns});
    report.samples = aligned.samples.size();
    report.dropped_radar = aligned.dropped_radar;

    std::vector<ManifestRecord> records;
    for (const AlignedSample& a : aligned.samples) {
        ManifestRecord r;
        r.radar_timestamp = a.radar_timestamp;
        r.pose = a.pose;
        for (const auto& [s, idx] : a.frame) r.paths[s] = streams.at(s).paths[idx];
        records.push_back(std::move(r));
    }
    write_manifest(root / kManifestName, records);
    return report;
}

SensorFrame load_frame(const fs::path& root, SensorId sensor, const std::string& relative_path, const DatasetMeta& meta,
                       Index image_h, Index image_w) {
    const fs::path path = root / relative_path;
    SensorFrame f;
    switch (modality_of(sensor)) {
        case Modality::point_cloud: f.cloud = read_point_cloud(path); break;
        case Modality::image:
            f.image = read_raster(path);
            if (f.image.shape() != Shape{3, image_h, image_w})
                throw DimensionError(path.string() + ": camera frame is " + shape_str(f.image.shape()) + ", model expects (3, " +
                                     std::to_string(image_h) + ", " + std::to_string(image_w) + ")");
            break;
        case Modality::radar: {
            const Tensor raw = read_raster(path);
            if (raw.shape() != Shape{1, meta.radar_azimuths, meta.radar_range_bins})
                throw DimensionError(path.string() + ": radar scan shape " + shape_str(raw.shape()) + " disagrees with meta.txt");
            RadarPolarScan scan;
            scan.power = raw.matrix(meta.radar_azimuths);
            scan.azimuth_0 = meta.radar_azimuth_0;
            scan.range_resolution = meta.radar_range_resolution;
            f.image = polar_to_cartesian(scan, image_h, image_w);
            break;
        }
    }
    return f;
}

std::vector<SensorSample> load_samples(const fs::path& root, std::span<const SensorId> sensors, Index image_h, Index image_w) {
    const DatasetMeta meta = read_meta(root);
    const fs::path manifest = root / kManifestName;
    if (!fs::exists(manifest)) throw IoError(manifest.string() + ": no aligned manifest, run sync first");
    std::vector<std::string> absent;
    for (SensorId id : sensors)
        if (!fs::is_directory(root / std::string(sensor_name(id)))) absent.emplace_back(sensor_name(id));
    if (!absent.empty()) {
        std::string names;
        for (const std::string& n : absent) names += (names.empty() ? "" : ", ") + n;
        throw MissingSensorError("dataset " + root.string() + " has no directory for sensor(s) " + names);
    }
    std::vector<SensorSample> out;
    for (const ManifestRecord& r : read_manifest(manifest)) {
        SensorSample s;
        s.pose = r.pose;
        s.timestamp = r.radar_timestamp;
        for (SensorId id : sensors) s.frames[id] = load_frame(root, id, r.paths.at(id), meta, image_h, image_w);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace unloc
