#pragma once

#include "unloc/adam.hpp"
#include "unloc/model.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace unloc {

/// Worker threads: UNLOC_THREADS when set, else the hardware concurrency.
int worker_threads();

struct StepStats {
    Index step = 0;  // index of the step just taken
    double loss = 0.0;  // mean net loss over the batch
    std::map<SensorId, double> sensor_loss;  // batch mean per sensor
};

/// Per-axis offset (mean) and scale (standard deviation, floored at 1e-3) of
/// the training translations.
void fit_translation_normalization(ModelConfig& cfg, std::span<const SensorSample> samples);

/// Sample indices of batch `step`: each epoch is a seeded permutation of the
/// dataset split into consecutive batches, the last one possibly short.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, Index batch_size, Index step, std::uint64_t seed);
Index steps_per_epoch(std::size_t dataset_size, Index batch_size);

/// Slot-noise seed of a sample: fixed per (run seed, sample timestamp).
std::uint64_t sample_noise_seed(std::uint64_t seed, const SensorSample& sample);

class Trainer {
public:
    Trainer(UnlocModel& model, const AdamConfig& adam, std::uint64_t seed);

    /// Net loss of every sample (all six sensors), backward per sample in
    /// parallel, gradients summed in sample order and divided by the batch
    /// size, then one Adam update. Non-finite loss or gradient raises
    /// NumericError naming the step.
    StepStats step(std::span<const SensorSample* const> batch);
    /// Mean net loss of the batch without updating anything.
    double evaluate_loss(std::span<const SensorSample* const> batch) const;

    Index steps_taken() const { return step_; }
    Adam& optimizer() { return adam_; }
    const Adam& optimizer() const { return adam_; }
    std::uint64_t seed() const { return seed_; }
    void restore(Index step) { step_ = step; }

private:
    UnlocModel& model_;
    Adam adam_;
    std::uint64_t seed_;
    Index step_ = 0;
};

/// "UNCK" | u32 version | u64 model-config hash | model config text |
/// u64 seed | i64 step | parameters (name, shape, f64 data) | Adam state.
struct Checkpoint {
    ModelConfig model;
    std::uint64_t seed = 0;
    Index step = 0;
    std::vector<std::pair<std::string, Tensor>> parameters;
    std::int64_t adam_step = 0;
    std::vector<std::pair<std::string, Adam::Moments>> moments;

    static constexpr std::uint32_t kVersion = 1;
};

Checkpoint capture(UnlocModel& model, const Adam& adam, Index step, std::uint64_t seed);
/// Copies parameter values into `model` (and Adam state when given). Every
/// parameter must be present with the same shape.
void restore(const Checkpoint& ckpt, UnlocModel& model, Adam* adam);
/// Written through a temporary file and rename.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);
std::uint64_t model_config_hash(const ModelConfig& m);

}  // namespace unloc
