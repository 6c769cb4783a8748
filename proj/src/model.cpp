#include "unloc/model.hpp"

#include <numbers>

namespace unloc {

void ModelConfig::validate() const {
    grid.validate();
    if (point_hidden < 1 || voxel_features < 1) throw ConfigError("model: point MLP widths must be positive");
    if (feature_dim < 32 || 1024 % feature_dim != 0) throw ConfigError("model: feature_dim must divide 1024 and be >= 32");
    if (image_h % 32 != 0 || image_w % 32 != 0 || image_h < 32 || image_w < 32)
        throw ConfigError("model: image size must be a positive multiple of 32");
    if (feature_channels < 4 || feature_channels % 4 != 0) throw ConfigError("model: feature_channels must be a multiple of 4");
    SlotConfig{slots, feature_dim, iterations, softmax_axis}.validate();
    if (!((translation_scale.array() > 0).all() && translation_scale.allFinite() && translation_offset.allFinite()))
        throw ConfigError("model: translation scale must be positive and finite");
}

double ModelConfig::rotation_period() const { return rotation_scale ? 2.0 : 2.0 * std::numbers::pi; }

UnlocModel::UnlocModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    point_encoder = CylindricalEncoder("lidar.points", cfg.grid, cfg.point_hidden, cfg.voxel_features, rng);
    backbone = SparseBackbone("lidar.backbone", cfg.voxel_features, cfg.backbone_divisor(), cfg.azimuth_wrap, rng);
    camera_stream = ImageStream("camera", cfg.image_h, cfg.image_w, cfg.feature_channels, cfg.feature_dim, rng);
    radar_broadcast = RadarBroadcast("radar.broadcast", rng);
    radar_stream = ImageStream("radar", cfg.image_h, cfg.image_w, cfg.feature_channels, cfg.feature_dim, rng);
    const SlotConfig sc{cfg.slots, cfg.feature_dim, cfg.iterations, cfg.softmax_axis};
    camera_slots = SlotParams("camera.slots", sc, rng);
    radar_slots = SlotParams("radar.slots", sc, rng);
    encoding = ModalityEncoding("modality", cfg.feature_dim, rng);
    head = RegressionHead("head", cfg.feature_dim, cfg.rotation_norm, rng);
}

ParamList UnlocModel::parameters() {
    ParamList out;
    point_encoder.mlp.collect(out);
    backbone.collect(out);
    camera_stream.collect(out);
    radar_broadcast.collect(out);
    radar_stream.collect(out);
    camera_slots.collect(out);
    radar_slots.collect(out);
    encoding.collect(out);
    head.collect(out);
    balance.collect(out);
    return out;
}

Var UnlocModel::features(const SensorFrame& frame, SensorId sensor, std::uint64_t noise_seed) const {
    switch (modality_of(sensor)) {
        case Modality::point_cloud: {
            const VoxelizedCloud v = point_encoder(frame.cloud);
            const auto& b = cfg_.grid.bins;
            return pool_concat(backbone(make_sparse({b[0], b[1], b[2]}, v.coords, v.features)));
        }
        case Modality::image:
            validate_image(frame.image, 3);
            return slot_filter(camera_stream(Var(frame.image)), camera_slots, noise_seed);
        case Modality::radar:
            validate_image(frame.image, 1);
            return slot_filter(radar_stream(radar_broadcast(Var(frame.image))), radar_slots, noise_seed);
    }
    throw ConfigError("unknown modality");
}

HeadOutput UnlocModel::forward(const SensorFrame& frame, SensorId sensor, std::uint64_t noise_seed) const {
    return head(encoding(features(frame, sensor, noise_seed), sensor));
}

const SensorFrame& UnlocModel::frame_of(const SensorSample& sample, SensorId s) const {
    const auto it = sample.frames.find(s);
    if (it == sample.frames.end()) throw MissingSensorError("sample has no frame for sensor " + std::string(sensor_name(s)));
    return it->second;
}

std::map<SensorId, PoseLoss> UnlocModel::sensor_losses(const SensorSample& sample, std::span<const SensorId> sensors,
                                                       std::uint64_t noise_seed) const {
    const auto [gt_t, gt_r] = to_targets(sample.pose);
    std::map<SensorId, PoseLoss> out;
    for (SensorId s : sensors) {
        const HeadOutput h = forward(frame_of(sample, s), s, mix_seed(noise_seed, static_cast<std::uint64_t>(index_of(s))));
        const Modality m = modality_of(s);
        out[s] = pose_loss(h.translation, h.rotation, gt_t, gt_r, balance.alpha(m).var(), balance.beta(m).var(),
                           cfg_.loss_mode, cfg_.rotation_period());
    }
    return out;
}

Prediction UnlocModel::predict(const SensorSample& sample, std::span<const SensorId> active, std::uint64_t noise_seed) const {
    if (active.empty()) throw ConfigError("predict: no active sensors");
    std::vector<SensorId> sensors(active.begin(), active.end());
    std::sort(sensors.begin(), sensors.end());
    sensors.erase(std::unique(sensors.begin(), sensors.end()), sensors.end());
    for (SensorId s : sensors) frame_of(sample, s);

    Prediction out;
    std::vector<Var> encoded;
    for (SensorId s : sensors) {
        const Var f =
            encoding(features(frame_of(sample, s), s, mix_seed(noise_seed, static_cast<std::uint64_t>(index_of(s)))), s);
        const HeadOutput h = head(f);
        out.per_sensor[s] = to_pose(h.translation.value(), h.rotation.value());
        encoded.push_back(f);
    }
    if (sensors.size() == 1) {
        out.fused = out.per_sensor.begin()->second;
    } else if (cfg_.fusion == FusionMode::pose) {
        std::vector<Pose6DoF> poses;
        for (const auto& [s, p] : out.per_sensor) poses.push_back(p);
        out.fused = fuse_poses(poses);
    } else {
        Var acc = encoded.front();
        for (std::size_t i = 1; i < encoded.size(); ++i) acc = acc + encoded[i];
        const HeadOutput h = head(scale(acc, 1.0 / static_cast<double>(encoded.size())));
        out.fused = to_pose(h.translation.value(), h.rotation.value());
    }
    return out;
}

Pose6DoF UnlocModel::to_pose(const Tensor& translation, const Tensor& rotation) const {
    Pose6DoF p;
    const double k = cfg_.rotation_scale ? std::numbers::pi : 1.0;
    for (int i = 0; i < 3; ++i) {
        p.translation[i] = cfg_.translation_offset[i] + cfg_.translation_scale[i] * translation[i];
        p.rotation[i] = wrap_angle(k * rotation[i]);
    }
    return p;
}

std::pair<Tensor, Tensor> UnlocModel::to_targets(const Pose6DoF& pose) const {
    Tensor t({3}), r({3});
    const double k = cfg_.rotation_scale ? std::numbers::pi : 1.0;
    for (int i = 0; i < 3; ++i) {
        t[i] = (pose.translation[i] - cfg_.translation_offset[i]) / cfg_.translation_scale[i];
        r[i] = wrap_angle(pose.rotation[i]) / k;
    }
    return {t, r};
}

}  // namespace unloc
