#pragma once

#include "unloc/adam.hpp"
#include "unloc/dataset.hpp"
#include "unloc/model.hpp"
#include "unloc/synth.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace unloc {

using KeyValues = std::map<std::string, std::string>;

struct TrainSettings {
    Index batch_size = 6;
    Index steps = 500;             // total optimizer steps; 0 means `epochs` full passes
    Index epochs = 0;
    bool normalize_translation = true;  // per-axis offset/scale from the training poses
};

/// Everything a command needs, as flat `key=value` text. Keys are listed by
/// run_config_keys(); unknown keys and malformed values raise ConfigError.
struct RunConfig {
    std::string dataset = "dataset";
    std::vector<SensorId> sensors{kAllSensors.begin(), kAllSensors.end()};
    std::uint64_t seed = 1;
    SynthConfig synth;
    ModelConfig model;
    AdamConfig adam;
    TrainSettings train;
    SyncOptions sync;

    RunConfig();

    void validate() const;
    /// `synth` with the run seed and a camera matching the model image size.
    SynthConfig synth_config() const;
    KeyValues to_key_values() const;
    static RunConfig from_key_values(const KeyValues& kv);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

std::vector<std::string> run_config_keys();
/// Canonical text form: one `key=value` line per key, sorted.
std::string serialize(const RunConfig& cfg);
RunConfig parse_run_config(const std::string& text);

/// Every ModelConfig field, including translation normalization.
KeyValues model_key_values(const ModelConfig& m);
ModelConfig model_from_key_values(const KeyValues& kv);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace unloc
