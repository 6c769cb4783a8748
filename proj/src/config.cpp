#include "unloc/config.hpp"

#include "unloc/io.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace unloc {

namespace {

double to_double(const std::string& key, const std::string& s) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ConfigError("config: '" + key + "' expects a finite number, got '" + s + "'");
    return v;
}

template <typename I>
I to_integer(const std::string& key, const std::string& s) {
    I v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + s + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

Eigen::Vector3d to_vec3(const std::string& key, const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 3) throw ConfigError("config: '" + key + "' expects three comma-separated numbers");
    return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

std::string from_vec3(const Eigen::Vector3d& v) {
    return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

template <typename C>
struct Field {
    std::string key;
    std::function<std::string(const C&)> get;
    std::function<void(C&, const std::string&)> set;
};

/// Field over a double reached through `access`.
template <typename C, typename F>
Field<C> real_field(std::string key, F access) {
    return {key, [access](const C& c) { return format_double(access(c)); },
            [access, key](C& c, const std::string& s) { access(c) = to_double(key, s); }};
}

template <typename C, typename F>
Field<C> index_field(std::string key, F access) {
    return {key, [access](const C& c) { return std::to_string(access(c)); },
            [access, key](C& c, const std::string& s) { access(c) = to_integer<Index>(key, s); }};
}

template <typename C, typename F>
Field<C> bool_field(std::string key, F access) {
    return {key, [access](const C& c) { return from_bool(access(c)); },
            [access, key](C& c, const std::string& s) { access(c) = to_bool(key, s); }};
}

std::vector<Field<ModelConfig>> model_fields() {
    using M = ModelConfig;
    return {
        real_field<M>("grid_r_min", [](auto& m) -> auto& { return m.grid.r_min; }),
        real_field<M>("grid_r_max", [](auto& m) -> auto& { return m.grid.r_max; }),
        real_field<M>("grid_z_min", [](auto& m) -> auto& { return m.grid.z_min; }),
        real_field<M>("grid_z_max", [](auto& m) -> auto& { return m.grid.z_max; }),
        {"grid_bins",
         [](const M& m) {
             return std::to_string(m.grid.bins[0]) + "," + std::to_string(m.grid.bins[1]) + "," + std::to_string(m.grid.bins[2]);
         },
         [](M& m, const std::string& s) {
             const auto parts = split(s, ',');
             if (parts.size() != 3) throw ConfigError("config: 'grid_bins' expects three comma-separated integers");
             for (std::size_t i = 0; i < 3; ++i) m.grid.bins[i] = to_integer<Index>("grid_bins", parts[i]);
         }},
        index_field<M>("point_hidden", [](auto& m) -> auto& { return m.point_hidden; }),
        index_field<M>("voxel_features", [](auto& m) -> auto& { return m.voxel_features; }),
        bool_field<M>("azimuth_wrap", [](auto& m) -> auto& { return m.azimuth_wrap; }),
        index_field<M>("image_height", [](auto& m) -> auto& { return m.image_h; }),
        index_field<M>("image_width", [](auto& m) -> auto& { return m.image_w; }),
        index_field<M>("feature_channels", [](auto& m) -> auto& { return m.feature_channels; }),
        index_field<M>("feature_dim", [](auto& m) -> auto& { return m.feature_dim; }),
        index_field<M>("slots", [](auto& m) -> auto& { return m.slots; }),
        index_field<M>("iterations", [](auto& m) -> auto& { return m.iterations; }),
        {"softmax_axis", [](const M& m) { return std::string(m.softmax_axis == SoftmaxAxis::slots ? "slots" : "inputs"); },
         [](M& m, const std::string& s) {
             if (s == "slots") m.softmax_axis = SoftmaxAxis::slots;
             else if (s == "inputs") m.softmax_axis = SoftmaxAxis::inputs;
             else throw ConfigError("config: 'softmax_axis' expects slots or inputs, got '" + s + "'");
         }},
        bool_field<M>("rotation_norm", [](auto& m) -> auto& { return m.rotation_norm; }),
        bool_field<M>("rotation_scale", [](auto& m) -> auto& { return m.rotation_scale; }),
        {"fusion", [](const M& m) { return std::string(m.fusion == FusionMode::pose ? "pose" : "feature"); },
         [](M& m, const std::string& s) {
             if (s == "pose") m.fusion = FusionMode::pose;
             else if (s == "feature") m.fusion = FusionMode::feature;
             else throw ConfigError("config: 'fusion' expects pose or feature, got '" + s + "'");
         }},
        {"sign_mode", [](const M& m) { return std::string(m.loss_mode == LossMode::stable ? "stable" : "paper_literal"); },
         [](M& m, const std::string& s) {
             if (s == "stable") m.loss_mode = LossMode::stable;
             else if (s == "paper_literal") m.loss_mode = LossMode::paper_literal;
             else throw ConfigError("config: 'sign_mode' expects stable or paper_literal, got '" + s + "'");
         }},
    };
}

std::vector<Field<RunConfig>> run_fields() {
    using R = RunConfig;
    std::vector<Field<R>> f{
        {"dataset", [](const R& r) { return r.dataset; },
         [](R& r, const std::string& s) {
             if (s.empty()) throw ConfigError("config: 'dataset' must not be empty");
             r.dataset = s;
         }},
        {"sensors", [](const R& r) { return sensor_list_string(r.sensors); },
         [](R& r, const std::string& s) { r.sensors = parse_sensor_list(s); }},
        {"seed", [](const R& r) { return std::to_string(r.seed); },
         [](R& r, const std::string& s) { r.seed = to_integer<std::uint64_t>("seed", s); }},

        real_field<R>("synth_duration", [](auto& r) -> auto& { return r.synth.duration; }),
        index_field<R>("synth_landmarks", [](auto& r) -> auto& { return r.synth.world.landmarks; }),
        real_field<R>("world_half_extent", [](auto& r) -> auto& { return r.synth.world.upper[0]; }),
        real_field<R>("world_height", [](auto& r) -> auto& { return r.synth.world.upper[2]; }),
        real_field<R>("lidar_rate", [](auto& r) -> auto& { return r.synth.lidar_rate; }),
        real_field<R>("camera_rate", [](auto& r) -> auto& { return r.synth.camera_rate; }),
        real_field<R>("radar_rate", [](auto& r) -> auto& { return r.synth.radar_rate; }),
        real_field<R>("gt_rate", [](auto& r) -> auto& { return r.synth.gt_rate; }),
        real_field<R>("lidar_range", [](auto& r) -> auto& { return r.synth.lidar_range; }),
        real_field<R>("lidar_noise", [](auto& r) -> auto& { return r.synth.lidar_noise; }),
        index_field<R>("radar_azimuths", [](auto& r) -> auto& { return r.synth.radar.azimuths; }),
        index_field<R>("radar_range_bins", [](auto& r) -> auto& { return r.synth.radar.range_bins; }),
        real_field<R>("radar_range_resolution", [](auto& r) -> auto& { return r.synth.radar.range_resolution; }),
        real_field<R>("radar_speckle", [](auto& r) -> auto& { return r.synth.radar.speckle; }),
        real_field<R>("trajectory_radius", [](auto& r) -> auto& { return r.synth.trajectory.radius; }),
        real_field<R>("trajectory_jitter", [](auto& r) -> auto& { return r.synth.trajectory.jitter; }),
        real_field<R>("trajectory_period", [](auto& r) -> auto& { return r.synth.trajectory.period; }),
        real_field<R>("trajectory_max_speed", [](auto& r) -> auto& { return r.synth.trajectory.max_speed; }),
        {"gt_gaps",
         [](const R& r) {
             if (r.synth.gt_gaps.empty()) return std::string("none");
             std::string s;
             for (const auto& [a, b] : r.synth.gt_gaps) s += (s.empty() ? "" : ",") + format_double(a) + ":" + format_double(b);
             return s;
         },
         [](R& r, const std::string& s) {
             r.synth.gt_gaps.clear();
             if (s == "none") return;
             for (const std::string& part : split(s, ',')) {
                 const auto ab = split(part, ':');
                 if (ab.size() != 2) throw ConfigError("config: 'gt_gaps' expects start:end pairs, got '" + part + "'");
                 r.synth.gt_gaps.emplace_back(to_double("gt_gaps", ab[0]), to_double("gt_gaps", ab[1]));
             }
         }},

        real_field<R>("lr", [](auto& r) -> auto& { return r.adam.lr; }),
        real_field<R>("weight_decay", [](auto& r) -> auto& { return r.adam.weight_decay; }),
        real_field<R>("beta1", [](auto& r) -> auto& { return r.adam.beta1; }),
        real_field<R>("beta2", [](auto& r) -> auto& { return r.adam.beta2; }),
        real_field<R>("adam_eps", [](auto& r) -> auto& { return r.adam.eps; }),
        index_field<R>("batch_size", [](auto& r) -> auto& { return r.train.batch_size; }),
        index_field<R>("steps", [](auto& r) -> auto& { return r.train.steps; }),
        index_field<R>("epochs", [](auto& r) -> auto& { return r.train.epochs; }),
        bool_field<R>("normalize_translation", [](auto& r) -> auto& { return r.train.normalize_translation; }),
        {"sync_max_gap", [](const R& r) { return format_double(static_cast<double>(r.sync.max_gap_ns) * 1e-9); },
         [](R& r, const std::string& s) {
             const double v = to_double("sync_max_gap", s);
             if (v < 0) throw ConfigError("config: 'sync_max_gap' must be >= 0");
             r.sync.max_gap_ns = static_cast<Timestamp>(std::llround(v * 1e9));
         }},
    };
    for (const Field<ModelConfig>& m : model_fields())
        f.push_back({m.key, [g = m.get](const R& r) { return g(r.model); }, [s = m.set](R& r, const std::string& v) { s(r.model, v); }});
    return f;
}

template <typename C>
void apply(C& c, const std::vector<Field<C>>& fields, const KeyValues& kv) {
    std::map<std::string, const Field<C>*> by_key;
    for (const Field<C>& f : fields) by_key[f.key] = &f;
    for (const auto& [k, v] : kv) {
        const auto it = by_key.find(k);
        if (it == by_key.end()) throw ConfigError("config: unknown key '" + k + "'");
        it->second->set(c, v);
    }
}

}  // namespace

RunConfig::RunConfig() {
    synth.world.lower = Eigen::Vector3d(-40, -40, 0);
    synth.world.upper = Eigen::Vector3d(40, 40, 3);
}

SynthConfig RunConfig::synth_config() const {
    SynthConfig s = synth;
    s.seed = seed;
    s.world.lower = Eigen::Vector3d(-synth.world.upper[0], -synth.world.upper[0], 0.0);
    s.world.upper = Eigen::Vector3d(synth.world.upper[0], synth.world.upper[0], synth.world.upper[2]);
    s.camera.width = model.image_w;
    s.camera.height = model.image_h;
    s.camera.fx = s.camera.fy = 0.5 * static_cast<double>(model.image_w);
    s.camera.cx = 0.5 * static_cast<double>(model.image_w - 1);
    s.camera.cy = 0.5 * static_cast<double>(model.image_h - 1);
    return s;
}

void RunConfig::validate() const {
    if (dataset.empty()) throw ConfigError("config: empty dataset path");
    if (sensors.empty()) throw ConfigError("config: empty sensor set");
    if (!(synth.world.upper[0] > 0.0) || !(synth.world.upper[2] > 0.0)) throw ConfigError("config: world extent must be positive");
    synth_config().validate();
    model.validate();
    if (!(adam.lr >= 0.0) || !(adam.weight_decay >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0))
        throw ConfigError("config: invalid optimizer settings");
    if (train.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (train.steps < 0 || train.epochs < 0 || (train.steps == 0 && train.epochs == 0))
        throw ConfigError("config: need steps > 0 or epochs > 0");
}

std::vector<std::string> run_config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : run_fields()) keys.push_back(f.key);
    return keys;
}

KeyValues RunConfig::to_key_values() const {
    KeyValues kv;
    for (const auto& f : run_fields()) kv[f.key] = f.get(*this);
    return kv;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
    RunConfig c;
    apply(c, run_fields(), kv);
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_key_values(read_key_values(path)); }

void RunConfig::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize(*this)); }

std::string serialize(const RunConfig& cfg) { return key_values_text(cfg.to_key_values()); }

RunConfig parse_run_config(const std::string& text) { return RunConfig::from_key_values(parse_key_values(text)); }

KeyValues model_key_values(const ModelConfig& m) {
    KeyValues kv;
    for (const auto& f : model_fields()) kv[f.key] = f.get(m);
    kv["translation_offset"] = from_vec3(m.translation_offset);
    kv["translation_scale"] = from_vec3(m.translation_scale);
    return kv;
}

ModelConfig model_from_key_values(const KeyValues& kv) {
    ModelConfig m;
    KeyValues rest = kv;
    if (const auto it = rest.find("translation_offset"); it != rest.end())
        m.translation_offset = to_vec3(it->first, it->second), rest.erase(it);
    if (const auto it = rest.find("translation_scale"); it != rest.end())
        m.translation_scale = to_vec3(it->first, it->second), rest.erase(it);
    apply(m, model_fields(), rest);
    m.validate();
    return m;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

}  // namespace unloc
