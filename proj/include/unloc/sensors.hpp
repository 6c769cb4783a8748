#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace unloc {

enum class SensorId { L1, L2, C1, C2, C3, R };
enum class Modality { point_cloud, image, radar };

inline constexpr std::array<SensorId, 6> kAllSensors{SensorId::L1, SensorId::L2, SensorId::C1,
                                                     SensorId::C2, SensorId::C3, SensorId::R};

constexpr Modality modality_of(SensorId s) {
    switch (s) {
        case SensorId::L1:
        case SensorId::L2: return Modality::point_cloud;
        case SensorId::R: return Modality::radar;
        default: return Modality::image;
    }
}

constexpr int index_of(SensorId s) { return static_cast<int>(s); }
constexpr int index_of(Modality m) { return static_cast<int>(m); }

std::string_view sensor_name(SensorId s);
std::string_view modality_name(Modality m);
/// Throws ConfigError on an unknown name.
SensorId parse_sensor(std::string_view name);
/// Comma-separated list, returned sorted in canonical order without duplicates.
std::vector<SensorId> parse_sensor_list(std::string_view list);
std::string sensor_list_string(const std::vector<SensorId>& sensors);

}  // namespace unloc
