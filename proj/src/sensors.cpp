#include "unloc/sensors.hpp"

#include "unloc/errors.hpp"

#include <algorithm>

namespace unloc {

std::string_view sensor_name(SensorId s) {
    static constexpr std::array<std::string_view, 6> names{"L1", "L2", "C1", "C2", "C3", "R"};
    return names[static_cast<std::size_t>(index_of(s))];
}

std::string_view modality_name(Modality m) {
    static constexpr std::array<std::string_view, 3> names{"point_cloud", "image", "radar"};
    return names[static_cast<std::size_t>(index_of(m))];
}

SensorId parse_sensor(std::string_view name) {
    for (SensorId s : kAllSensors)
        if (sensor_name(s) == name) return s;
    throw ConfigError("unknown sensor '" + std::string(name) + "' (expected one of L1,L2,C1,C2,C3,R)");
}

std::vector<SensorId> parse_sensor_list(std::string_view list) {
    std::vector<SensorId> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t end = std::min(list.find(',', start), list.size());
        std::string_view item = list.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.push_back(parse_sensor(item));
        start = end + 1;
    }
    if (out.empty()) throw ConfigError("sensor list is empty");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string sensor_list_string(const std::vector<SensorId>& sensors) {
    std::string s;
    for (SensorId id : sensors) {
        if (!s.empty()) s += ',';
        s += sensor_name(id);
    }
    return s;
}

}  // namespace unloc
