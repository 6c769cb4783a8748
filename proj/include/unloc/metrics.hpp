#pragma once

#include "unloc/pose.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace unloc {

/// Errors over an evaluation split. Rotation errors are absolute wrapped Euler
/// differences in degrees, per axis in (yaw, roll, pitch) order.
struct MetricsReport {
    std::string label;  // sensor subset
    std::size_t count = 0;
    double mean_translation = 0.0;     // metres, Euclidean
    double mean_rotation_deg = 0.0;    // mean over samples and the three axes
    double mean_geodesic_deg = 0.0;    // angle of R_pred^T R_gt
    Eigen::Vector3d translation_mae = Eigen::Vector3d::Zero();   // metres per axis
    Eigen::Vector3d translation_rmse = Eigen::Vector3d::Zero();  // metres per axis
    Eigen::Vector3d rotation_mae_deg = Eigen::Vector3d::Zero();
    Eigen::Vector3d rotation_rmse_deg = Eigen::Vector3d::Zero();
};

MetricsReport compute_metrics(std::span<const Pose6DoF> predicted, std::span<const Pose6DoF> truth, std::string label);

/// Header plus one row per report.
std::string metrics_csv(std::span<const MetricsReport> reports);
/// Fixed-width text table: mean translation (m) and rotation (deg), then RMSE
/// translation (cm) and rotation (deg) per axis.
std::string metrics_table(std::span<const MetricsReport> reports);
/// Per-axis mean absolute errors: translation (m) and rotation (deg).
std::string metrics_mae_table(std::span<const MetricsReport> reports);
/// Inverse of metrics_csv. Malformed text raises IoError naming `source`.
std::vector<MetricsReport> parse_metrics_csv(const std::string& text, const std::string& source = "metrics");

}  // namespace unloc
