#include "unloc/training.hpp"

#include "unloc/config.hpp"
#include "unloc/io.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <numeric>
#include <thread>

namespace unloc {

int worker_threads() {
    if (const char* env = std::getenv("UNLOC_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1) throw ConfigError("UNLOC_THREADS must be a positive integer, got '" + std::string(env) + "'");
        return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void fit_translation_normalization(ModelConfig& cfg, std::span<const SensorSample> samples) {
    if (samples.empty()) throw ConfigError("normalization: no training samples");
    Eigen::Vector3d mean = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
    for (const SensorSample& s : samples) mean += s.pose.translation;
    mean /= static_cast<double>(samples.size());
    for (const SensorSample& s : samples) sq += (s.pose.translation - mean).cwiseAbs2();
    cfg.translation_offset = mean;
    cfg.translation_scale = (sq / static_cast<double>(samples.size())).cwiseSqrt().cwiseMax(1e-3);
}

Index steps_per_epoch(std::size_t dataset_size, Index batch_size) {
    if (dataset_size == 0 || batch_size < 1) throw ConfigError("batching: empty dataset or batch size < 1");
    return (static_cast<Index>(dataset_size) + batch_size - 1) / batch_size;
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, Index batch_size, Index step, std::uint64_t seed) {
    const Index per_epoch = steps_per_epoch(dataset_size, batch_size);
    const Index epoch = step / per_epoch, within = step % per_epoch;
    std::vector<std::size_t> perm(dataset_size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(mix_seed(seed, 0x65706f6368), static_cast<std::uint64_t>(epoch)));
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto lo = static_cast<std::size_t>(within * batch_size);
    const auto hi = std::min(dataset_size, lo + static_cast<std::size_t>(batch_size));
    return {perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi)};
}

namespace {

struct SampleResult {
    double loss = 0.0;
    std::map<SensorId, double> sensor_loss;
    Gradients grads;
    std::exception_ptr error;
};

/// Runs `work(i)` for i in [0, n) over up to worker_threads() threads.
template <typename F>
void parallel_for(std::size_t n, F work) {
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(worker_threads()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) work(i);
        });
    for (std::thread& th : pool) th.join();
}

}  // namespace

std::uint64_t sample_noise_seed(std::uint64_t seed, const SensorSample& sample) {
    return mix_seed(seed, static_cast<std::uint64_t>(sample.timestamp));
}

Trainer::Trainer(UnlocModel& model, const AdamConfig& adam, std::uint64_t seed) : model_(model), adam_(adam), seed_(seed) {}

StepStats Trainer::step(std::span<const SensorSample* const> batch) {
    if (batch.empty()) throw ConfigError("train_step: empty batch");
    const Index step = step_;
    std::vector<SampleResult> results(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) {
        try {
            const auto losses = model_.sensor_losses(*batch[i], kAllSensors, sample_noise_seed(seed_, *batch[i]));
            std::map<SensorId, Var> totals;
            for (const auto& [s, l] : losses) {
                totals[s] = l.total;
                results[i].sensor_loss[s] = l.total.value()[0];
            }
            const Var net = net_loss(totals);
            results[i].loss = net.value()[0];
            if (!std::isfinite(results[i].loss)) throw NumericError("non-finite loss");
            results[i].grads = backward(net);
        } catch (...) {
            results[i].error = std::current_exception();
        }
    });

    StepStats stats;
    stats.step = step;
    for (SampleResult& r : results) {
        if (r.error) {
            try {
                std::rethrow_exception(r.error);
            } catch (const NumericError& e) {
                throw NumericError("training step " + std::to_string(step) + ": " + e.what());
            }
        }
    }

    const ParamList params = model_.parameters();
    for (Parameter* p : params) p->zero_grad();
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const SampleResult& r : results) {
        for (Parameter* p : params) p->accumulate(r.grads);
        stats.loss += r.loss * inv;
        for (const auto& [s, v] : r.sensor_loss) stats.sensor_loss[s] += v * inv;
    }
    for (Parameter* p : params) p->grad.data() *= inv;
    try {
        adam_.step(params);
    } catch (const NumericError& e) {
        throw NumericError("training step " + std::to_string(step) + ": " + e.what());
    }
    ++step_;
    return stats;
}

double Trainer::evaluate_loss(std::span<const SensorSample* const> batch) const {
    std::vector<double> loss(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) {
        std::map<SensorId, Var> totals;
        for (const auto& [s, l] : model_.sensor_losses(*batch[i], kAllSensors, sample_noise_seed(seed_, *batch[i]))) totals[s] = l.total;
        loss[i] = net_loss(totals).value()[0];
    });
    return std::accumulate(loss.begin(), loss.end(), 0.0) / static_cast<double>(batch.size());
}

std::uint64_t model_config_hash(const ModelConfig& m) { return fnv1a(key_values_text(model_key_values(m))); }

Checkpoint capture(UnlocModel& model, const Adam& adam, Index step, std::uint64_t seed) {
    Checkpoint c;
    c.model = model.config();
    c.seed = seed;
    c.step = step;
    for (const Parameter* p : model.parameters()) c.parameters.emplace_back(p->name(), p->value());
    c.adam_step = adam.steps();
    c.moments = adam.moments();
    return c;
}

void restore(const Checkpoint& ckpt, UnlocModel& model, Adam* adam) {
    if (model_config_hash(ckpt.model) != model_config_hash(model.config()))
        throw ConfigError("checkpoint: model configuration differs from the checkpoint's");
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [n, t] : ckpt.parameters) by_name[n] = &t;
    const ParamList params = model.parameters();
    if (params.size() != ckpt.parameters.size())
        throw ConfigError("checkpoint: holds " + std::to_string(ckpt.parameters.size()) + " parameters, model has " +
                          std::to_string(params.size()));
    for (Parameter* p : params) {
        const auto it = by_name.find(p->name());
        if (it == by_name.end()) throw ConfigError("checkpoint: no parameter '" + p->name() + "'");
        if (it->second->shape() != p->shape())
            throw DimensionError("checkpoint: parameter '" + p->name() + "' has shape " + shape_str(it->second->shape()));
        p->mutable_value() = *it->second;
    }
    if (adam) adam->restore(ckpt.adam_step, ckpt.moments);
}

namespace {

class Writer {
public:
    template <typename T>
    void put(T v) {
        bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        put<std::uint64_t>(s.size());
        bytes += s;
    }
    void tensor(const Tensor& t) {
        put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (Index d : t.shape()) put<std::int64_t>(d);
        bytes.append(reinterpret_cast<const char*>(t.data().data()), static_cast<std::size_t>(t.size()) * sizeof(double));
    }
    std::string bytes;
};

class Reader {
public:
    Reader(std::string b, std::string path) : bytes_(std::move(b)), path_(std::move(path)) {}
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof v);
        return v;
    }
    std::string str() {
        const auto n = get<std::uint64_t>();
        if (n > bytes_.size()) fail("string length out of range");
        std::string s(n, '\0');
        take(s.data(), n);
        return s;
    }
    Tensor tensor() {
        const auto rank = get<std::uint32_t>();
        if (rank > 8) fail("tensor rank out of range");
        Shape shape(rank);
        for (auto& d : shape) {
            d = get<std::int64_t>();
            if (d < 0) fail("negative tensor dimension");
        }
        Tensor t = Tensor::zeros(shape);
        take(t.data().data(), static_cast<std::size_t>(t.size()) * sizeof(double));
        return t;
    }
    void take(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) fail("truncated");
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& what) const { throw IoError(path_ + ": checkpoint " + what); }

private:
    std::string bytes_, path_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    Writer w;
    w.bytes = "UNCK";
    w.put<std::uint32_t>(Checkpoint::kVersion);
    w.put<std::uint64_t>(model_config_hash(ckpt.model));
    w.str(key_values_text(model_key_values(ckpt.model)));
    w.put<std::uint64_t>(ckpt.seed);
    w.put<std::int64_t>(ckpt.step);
    w.put<std::uint64_t>(ckpt.parameters.size());
    for (const auto& [name, t] : ckpt.parameters) w.str(name), w.tensor(t);
    w.put<std::int64_t>(ckpt.adam_step);
    w.put<std::uint64_t>(ckpt.moments.size());
    for (const auto& [name, m] : ckpt.moments) w.str(name), w.tensor(m.m), w.tensor(m.v);
    write_file_atomic(path, w.bytes);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(read_file(path), path.string());
    char magic[4];
    r.take(magic, 4);
    if (std::memcmp(magic, "UNCK", 4) != 0) r.fail("has bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != Checkpoint::kVersion) r.fail("version " + std::to_string(version) + " is not supported");
    const auto hash = r.get<std::uint64_t>();
    Checkpoint c;
    c.model = model_from_key_values(parse_key_values(r.str(), path.string()));
    if (model_config_hash(c.model) != hash) r.fail("config hash does not match its config");
    c.seed = r.get<std::uint64_t>();
    c.step = r.get<std::int64_t>();
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string name = r.str();
        c.parameters.emplace_back(std::move(name), r.tensor());
    }
    c.adam_step = r.get<std::int64_t>();
    const auto nm = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < nm; ++i) {
        std::string name = r.str();
        Adam::Moments m;
        m.m = r.tensor();
        m.v = r.tensor();
        c.moments.emplace_back(std::move(name), std::move(m));
    }
    if (!r.done()) r.fail("has trailing bytes");
    return c;
}

}  // namespace unloc
