#include "unloc/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace unloc {

namespace {

class ByteWriter {
public:
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    template <typename T>
    void put(T v) {
        raw(&v, sizeof v);
    }
    std::string& str() { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string data, fs::path path) : data_(std::move(data)), path_(std::move(path)) {}
    void raw(void* p, std::size_t n) {
        if (pos_ + n > data_.size()) throw IoError(path_.string() + ": truncated file");
        std::memcpy(p, data_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T get() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
    void expect_magic(const char* magic) {
        char m[4];
        raw(m, 4);
        if (std::memcmp(m, magic, 4) != 0) throw IoError(path_.string() + ": bad magic, expected " + magic);
    }
    void expect_end() const {
        if (pos_ != data_.size()) throw IoError(path_.string() + ": trailing bytes");
    }

private:
    std::string data_;
    fs::path path_;
    std::size_t pos_ = 0;
};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const fs::path& path, std::size_t line) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw IoError(path.string() + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
    return v;
}

/// Non-empty, non-comment lines after the header, with their line numbers.
std::vector<std::pair<std::size_t, std::string>> csv_rows(const fs::path& path, const std::string& header) {
    std::istringstream is(read_file(path));
    std::string line;
    std::vector<std::pair<std::size_t, std::string>> rows;
    std::size_t n = 0;
    bool seen_header = false;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            if (line.rfind(header, 0) != 0) throw IoError(path.string() + ": expected header '" + header + "'");
            seen_header = true;
            continue;
        }
        rows.emplace_back(n, line);
    }
    if (!seen_header) throw IoError(path.string() + ": missing header '" + header + "'");
    return rows;
}

Pose6DoF parse_pose(const std::vector<std::string>& f, std::size_t first, const fs::path& path, std::size_t line) {
    Pose6DoF p;
    for (int k = 0; k < 3; ++k) {
        p.translation[k] = parse_double(f[first + static_cast<std::size_t>(k)], path, line);
        p.rotation[k] = parse_double(f[first + 3 + static_cast<std::size_t>(k)], path, line);
    }
    return p;
}

void append_pose(std::string& s, const Pose6DoF& p) {
    for (int k = 0; k < 3; ++k) s += ',' + format_double(p.translation[k]);
    for (int k = 0; k < 3; ++k) s += ',' + format_double(p.rotation[k]);
}

constexpr const char* kGtHeader = "timestamp_ns,x,y,z,yaw,roll,pitch";
constexpr const char* kOdoHeader = "t0_ns,t1_ns,dx,dy,dz,dyaw,droll,dpitch";
constexpr const char* kManifestHeader = "radar_timestamp_ns,x,y,z,yaw,roll,pitch,L1,L2,C1,C2,C3,R";

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string timestamp_stem(Timestamp t) {
    std::ostringstream os;
    os << std::setw(19) << std::setfill('0') << t;
    return os.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.parent_path().string() + ": cannot create directory: " + ec.message());
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp.string() + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError(tmp.string() + ": write failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError(path.string() + ": rename failed: " + ec.message());
}

void write_point_cloud(const fs::path& path, const PointCloud& cloud) {
    ByteWriter w;
    w.raw("UNLP", 4);
    const Index n = cloud.size();
    const bool has_i = cloud.intensity.has_value();
    if (has_i && cloud.intensity->size() != n) throw DimensionError("write_point_cloud: intensity count differs from point count");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
    w.put<std::uint8_t>(has_i ? 1 : 0);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) w.put<float>(static_cast<float>(cloud.points(i, k)));
    if (has_i)
        for (Index i = 0; i < n; ++i) w.put<float>(static_cast<float>((*cloud.intensity)[i]));
    write_file_atomic(path, w.str());
}

PointCloud read_point_cloud(const fs::path& path) {
    ByteReader r(read_file(path), path);
    r.expect_magic("UNLP");
    const auto n = static_cast<Index>(r.get<std::uint32_t>());
    const auto has_i = r.get<std::uint8_t>();
    PointCloud c;
    c.points.resize(n, 3);
    for (Index i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) c.points(i, k) = r.get<float>();
    if (has_i) {
        Eigen::VectorXd in(n);
        for (Index i = 0; i < n; ++i) in[i] = r.get<float>();
        c.intensity = std::move(in);
    }
    r.expect_end();
    return c;
}

void write_raster(const fs::path& path, const Tensor& raster) {
    if (raster.rank() != 3 || raster.dim(0) > 255) throw DimensionError("write_raster: expected (channels, rows, cols)");
    ByteWriter w;
    w.raw("UNRI", 4);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(raster.dim(1)));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(raster.dim(2)));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(raster.dim(0)));
    for (Index i = 0; i < raster.size(); ++i) w.put<float>(static_cast<float>(raster[i]));
    write_file_atomic(path, w.str());
}

Tensor read_raster(const fs::path& path) {
    ByteReader r(read_file(path), path);
    r.expect_magic("UNRI");
    const auto rows = static_cast<Index>(r.get<std::uint32_t>());
    const auto cols = static_cast<Index>(r.get<std::uint32_t>());
    const auto ch = static_cast<Index>(r.get<std::uint8_t>());
    if (rows < 1 || cols < 1 || ch < 1) throw IoError(path.string() + ": empty raster");
    Tensor t({ch, rows, cols});
    for (Index i = 0; i < t.size(); ++i) t[i] = r.get<float>();
    r.expect_end();
    return t;
}

void write_ground_truth(const fs::path& path, const GroundTruthStream& gt) {
    std::string s = std::string(kGtHeader) + ",source\n";
    for (std::size_t i = 0; i < gt.size(); ++i) {
        s += std::to_string(gt.timestamps[i]);
        append_pose(s, gt.poses[i]);
        s += gt.filled[i] ? ",odometry\n" : ",primary\n";
    }
    write_file_atomic(path, s);
}

GroundTruthStream read_ground_truth(const fs::path& path) {
    GroundTruthStream gt;
    for (const auto& [n, line] : csv_rows(path, kGtHeader)) {
        const auto f = split(line, ',');
        if (f.size() != 7 && f.size() != 8) throw IoError(path.string() + ":" + std::to_string(n) + ": expected 7 or 8 fields");
        gt.push_back(parse_int(f[0], path, n), parse_pose(f, 1, path, n), f.size() == 8 && f[7] == "odometry");
    }
    gt.validate();
    return gt;
}

void write_odometry(const fs::path& path, const std::vector<OdometryIncrement>& odo) {
    std::string s = std::string(kOdoHeader) + "\n";
    for (const OdometryIncrement& o : odo) {
        s += std::to_string(o.t0) + ',' + std::to_string(o.t1);
        append_pose(s, o.delta);
        s += '\n';
    }
    write_file_atomic(path, s);
}

std::vector<OdometryIncrement> read_odometry(const fs::path& path) {
    std::vector<OdometryIncrement> out;
    for (const auto& [n, line] : csv_rows(path, kOdoHeader)) {
        const auto f = split(line, ',');
        if (f.size() != 8) throw IoError(path.string() + ":" + std::to_string(n) + ": expected 8 fields");
        out.push_back({parse_int(f[0], path, n), parse_int(f[1], path, n), parse_pose(f, 2, path, n)});
    }
    return out;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) { return parse_key_values(read_file(path), path.string()); }

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
    std::istringstream is(text);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t n = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(is, line)) {
        ++n;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(n) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(n) + ": empty key");
        if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
            throw ConfigError(source + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    }
    return kv;
}

std::string key_values_text(const std::map<std::string, std::string>& kv) {
    std::string s;
    for (const auto& [k, v] : kv) s += k + '=' + v + '\n';
    return s;
}

void write_key_values(const fs::path& path, const std::map<std::string, std::string>& kv) { write_file_atomic(path, key_values_text(kv)); }

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
    std::string s = std::string(kManifestHeader) + "\n";
    for (const ManifestRecord& r : records) {
        s += std::to_string(r.radar_timestamp);
        append_pose(s, r.pose);
        for (SensorId id : kAllSensors) {
            const auto it = r.paths.find(id);
            if (it == r.paths.end()) throw MissingSensorError("manifest record has no " + std::string(sensor_name(id)) + " frame");
            s += ',' + it->second;
        }
        s += '\n';
    }
    write_file_atomic(path, s);
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
    std::vector<ManifestRecord> out;
    for (const auto& [n, line] : csv_rows(path, kManifestHeader)) {
        const auto f = split(line, ',');
        if (f.size() != 13) throw IoError(path.string() + ":" + std::to_string(n) + ": expected 13 fields");
        ManifestRecord r;
        r.radar_timestamp = parse_int(f[0], path, n);
        r.pose = parse_pose(f, 1, path, n);
        for (std::size_t i = 0; i < 6; ++i) r.paths[kAllSensors[i]] = f[7 + i];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace unloc
