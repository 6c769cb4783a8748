#pragma once

#include "unloc/cylindrical.hpp"
#include "unloc/fusion.hpp"
#include "unloc/imaging.hpp"
#include "unloc/objective.hpp"
#include "unloc/slotfilter.hpp"
#include "unloc/sparse3d.hpp"

#include <map>
#include <optional>

namespace unloc {

struct ModelConfig {
    CylGridConfig grid;
    Index point_hidden = 32;
    Index voxel_features = 16;
    bool azimuth_wrap = true;

    Index image_h = 64, image_w = 64;
    Index feature_channels = 64;  // residual stack output
    Index feature_dim = 128;      // D_feat, also the token width
    Index slots = 8;
    Index iterations = 3;
    SoftmaxAxis softmax_axis = SoftmaxAxis::slots;

    bool rotation_norm = true;   // layer norm in the rotation branch
    bool rotation_scale = true;  // head predicts angles / pi
    Eigen::Vector3d translation_offset = Eigen::Vector3d::Zero();
    Eigen::Vector3d translation_scale = Eigen::Vector3d::Ones();
    FusionMode fusion = FusionMode::pose;
    LossMode loss_mode = LossMode::stable;

    void validate() const;
    /// Divisor applied to the (32, 64, 128, 256, 512) backbone widths.
    Index backbone_divisor() const { return 1024 / feature_dim; }
    double rotation_period() const;
};

/// One frame of one sensor: a point cloud for L1/L2, a (3, H, W) image for
/// cameras, a (1, H, W) Cartesian radar image for R.
struct SensorFrame {
    PointCloud cloud;
    Tensor image;
};

/// Synchronized frames sharing one ground-truth pose.
struct SensorSample {
    std::map<SensorId, SensorFrame> frames;
    Pose6DoF pose;
    std::int64_t timestamp = 0;
};

struct Prediction {
    std::map<SensorId, Pose6DoF> per_sensor;
    Pose6DoF fused;
};

class UnlocModel {
public:
    explicit UnlocModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamList parameters();

    /// Feature vector (D_feat) of one sensor before modality encoding.
    Var features(const SensorFrame& frame, SensorId sensor, std::uint64_t noise_seed) const;
    /// Encoded features through the regression head, in normalized units.
    HeadOutput forward(const SensorFrame& frame, SensorId sensor, std::uint64_t noise_seed) const;

    /// Per-sensor losses for every sensor in `sensors`; sample must contain them.
    std::map<SensorId, PoseLoss> sensor_losses(const SensorSample& sample, std::span<const SensorId> sensors,
                                               std::uint64_t noise_seed) const;

    /// On-demand inference with any nonempty subset of sensors.
    Prediction predict(const SensorSample& sample, std::span<const SensorId> active, std::uint64_t noise_seed) const;

    Pose6DoF to_pose(const Tensor& translation, const Tensor& rotation) const;
    std::pair<Tensor, Tensor> to_targets(const Pose6DoF& pose) const;

    CylindricalEncoder point_encoder;
    SparseBackbone backbone;
    ImageStream camera_stream, radar_stream;
    RadarBroadcast radar_broadcast;
    SlotParams camera_slots, radar_slots;
    ModalityEncoding encoding;
    RegressionHead head;
    BalanceFactors balance;

private:
    const SensorFrame& frame_of(const SensorSample& sample, SensorId s) const;

    ModelConfig cfg_;
};

}  // namespace unloc
