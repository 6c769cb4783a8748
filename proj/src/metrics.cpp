#include "unloc/metrics.hpp"

#include "unloc/errors.hpp"
#include "unloc/io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <numbers>

namespace unloc {

MetricsReport compute_metrics(std::span<const Pose6DoF> predicted, std::span<const Pose6DoF> truth, std::string label) {
    if (predicted.size() != truth.size()) throw DimensionError("metrics: prediction and ground-truth counts differ");
    if (predicted.empty()) throw ConfigError("metrics: empty evaluation split");
    constexpr double deg = 180.0 / std::numbers::pi;
    MetricsReport r;
    r.label = std::move(label);
    r.count = predicted.size();
    Eigen::Vector3d t_sq = Eigen::Vector3d::Zero(), r_sq = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const Eigen::Vector3d dt = predicted[i].translation - truth[i].translation;
        Eigen::Vector3d dr;
        for (int k = 0; k < 3; ++k) dr[k] = std::abs(wrap_angle(predicted[i].rotation[k] - truth[i].rotation[k])) * deg;
        r.mean_translation += dt.norm();
        r.mean_rotation_deg += dr.mean();
        r.mean_geodesic_deg += geodesic_angle(predicted[i], truth[i]) * deg;
        r.translation_mae += dt.cwiseAbs();
        t_sq += dt.cwiseAbs2();
        r.rotation_mae_deg += dr;
        r_sq += dr.cwiseAbs2();
    }
    const double n = static_cast<double>(r.count);
    r.mean_translation /= n;
    r.mean_rotation_deg /= n;
    r.mean_geodesic_deg /= n;
    r.translation_mae /= n;
    r.rotation_mae_deg /= n;
    r.translation_rmse = (t_sq / n).cwiseSqrt();
    r.rotation_rmse_deg = (r_sq / n).cwiseSqrt();
    return r;
}

std::string metrics_csv(std::span<const MetricsReport> reports) {
    std::string s =
        "sensors,count,mean_translation_m,mean_rotation_deg,mean_geodesic_deg,"
        "mae_x_m,mae_y_m,mae_z_m,rmse_x_m,rmse_y_m,rmse_z_m,"
        "mae_yaw_deg,mae_roll_deg,mae_pitch_deg,rmse_yaw_deg,rmse_roll_deg,rmse_pitch_deg\n";
    for (const MetricsReport& r : reports) {
        s += '"' + r.label + "\"," + std::to_string(r.count) + ',' + format_double(r.mean_translation) + ',' +
             format_double(r.mean_rotation_deg) + ',' + format_double(r.mean_geodesic_deg);
        for (const Eigen::Vector3d* v : {&r.translation_mae, &r.translation_rmse, &r.rotation_mae_deg, &r.rotation_rmse_deg})
            for (int k = 0; k < 3; ++k) s += ',' + format_double((*v)[k]);
        s += '\n';
    }
    return s;
}

std::string metrics_table(std::span<const MetricsReport> reports) {
    std::string s;
    char line[512];
    std::snprintf(line, sizeof line, "%-20s %6s %9s %9s %9s | %24s | %24s\n", "sensors", "n", "trans(m)", "rot(deg)",
                  "geo(deg)", "RMSE x/y/z (cm)", "RMSE yaw/roll/pitch (deg)");
    s += line;
    for (const MetricsReport& r : reports) {
        std::snprintf(line, sizeof line, "%-20s %6zu %9.3f %9.3f %9.3f | %7.1f %7.1f %8.1f | %7.2f %7.2f %8.2f\n",
                      r.label.c_str(), r.count, r.mean_translation, r.mean_rotation_deg, r.mean_geodesic_deg,
                      100 * r.translation_rmse[0], 100 * r.translation_rmse[1], 100 * r.translation_rmse[2],
                      r.rotation_rmse_deg[0], r.rotation_rmse_deg[1], r.rotation_rmse_deg[2]);
        s += line;
    }
    return s;
}

std::string metrics_mae_table(std::span<const MetricsReport> reports) {
    std::string s;
    char line[512];
    std::snprintf(line, sizeof line, "%-20s %6s | %26s | %26s\n", "sensors", "n", "MAE x/y/z (m)", "MAE yaw/roll/pitch (deg)");
    s += line;
    for (const MetricsReport& r : reports) {
        std::snprintf(line, sizeof line, "%-20s %6zu | %8.3f %8.3f %8.3f | %8.3f %8.3f %8.3f\n", r.label.c_str(), r.count,
                      r.translation_mae[0], r.translation_mae[1], r.translation_mae[2], r.rotation_mae_deg[0],
                      r.rotation_mae_deg[1], r.rotation_mae_deg[2]);
        s += line;
    }
    return s;
}

std::vector<MetricsReport> parse_metrics_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("sensors,count,", 0) != 0) throw IoError(source + ": not a metrics table");
    std::vector<MetricsReport> out;
    for (int row = 2; std::getline(in, line); ++row) {
        if (line.empty()) continue;
        const auto fail = [&](const std::string& what) { return IoError(source + " row " + std::to_string(row) + ": " + what); };
        if (line.front() != '"') throw fail("label must be quoted");
        const std::size_t close = line.find('"', 1);
        if (close == std::string::npos || close + 1 >= line.size() || line[close + 1] != ',') throw fail("bad label");
        MetricsReport r;
        r.label = line.substr(1, close - 1);
        std::vector<double> v;
        for (std::size_t pos = close + 2; pos <= line.size();) {
            const std::size_t end = std::min(line.find(',', pos), line.size());
            double x = 0.0;
            const auto res = std::from_chars(line.data() + pos, line.data() + end, x);
            if (res.ec != std::errc{} || res.ptr != line.data() + end) throw fail("bad number");
            v.push_back(x);
            pos = end + 1;
        }
        if (v.size() != 16) throw fail("expected 16 numeric fields, got " + std::to_string(v.size()));
        r.count = static_cast<std::size_t>(v[0]);
        r.mean_translation = v[1];
        r.mean_rotation_deg = v[2];
        r.mean_geodesic_deg = v[3];
        Eigen::Vector3d* vecs[] = {&r.translation_mae, &r.translation_rmse, &r.rotation_mae_deg, &r.rotation_rmse_deg};
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 3; ++k) (*vecs[j])[k] = v[static_cast<std::size_t>(4 + 3 * j + k)];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace unloc
