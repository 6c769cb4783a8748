#include "unloc/gradcheck_registry.hpp"

#include "unloc/cylindrical.hpp"
#include "unloc/fusion.hpp"
#include "unloc/imaging.hpp"
#include "unloc/init.hpp"
#include "unloc/layers.hpp"
#include "unloc/objective.hpp"
#include "unloc/slotfilter.hpp"
#include "unloc/sparse3d.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <random>

namespace unloc {

namespace {

/// Occupied sites of a random sparse grid, never empty.
std::shared_ptr<const SparseGeometry> random_geometry(Coord3 shape, double fill, Rng& rng) {
    std::bernoulli_distribution keep(fill);
    std::vector<Coord3> coords;
    for (Index h = 0; h < shape[0]; ++h)
        for (Index w = 0; w < shape[1]; ++w)
            for (Index l = 0; l < shape[2]; ++l)
                if (keep(rng)) coords.push_back({h, w, l});
    if (coords.empty()) coords.push_back({shape[0] / 2, shape[1] / 2, shape[2] / 2});
    return std::make_shared<const SparseGeometry>(shape, std::move(coords));
}

/// Zero-initialized biases put ReLUs of dead sites exactly on their kink;
/// random biases move the check to a generic point.
void randomize_biases(const ParamList& ps, Rng& rng) {
    for (Parameter* p : ps)
        if (p->name().ends_with(".bias")) p->mutable_value() = normal(p->shape(), 0.2, rng);
}

Tensor site_features(const SparseGeometry& g, Index channels, Rng& rng) {
    return normal({g.size(), channels}, 1.0, rng);
}

GradCheckEntry sparse_conv_entry(int stride, bool wrap) {
    return {std::string("sparse_conv3d(stride ") + std::to_string(stride) + (wrap ? ", wrap)" : ", no wrap)"), false,
            [=](const GradCheckOptions& opt) {
                Rng rng(mix_seed(11, static_cast<std::uint64_t>(stride * 2 + wrap)));
                const auto geom = random_geometry({4, 5, 3}, 0.4, rng);
                const Tensor f = site_features(*geom, 2, rng);
                const Tensor k = normal({3, 3, 3, 2, 3}, 0.3, rng), b = normal({3}, 0.5, rng);
                const auto op = [&](std::span<const Var> v) {
                    return sparse_conv3d(SparseTensor3D{geom, v[0]}, v[1], v[2], stride, wrap).features;
                };
                return gradient_check(op, {f, k, b}, {}, opt);
            }};
}

std::vector<GradCheckEntry> build_registry() {
    std::vector<GradCheckEntry> r;

    r.push_back({"linear", false, [](const GradCheckOptions& opt) {
                     Rng rng(1);
                     Linear lin("linear", 5, 4, rng);
                     lin.bias.mutable_value() = normal({4}, 0.5, rng);
                     ParamList ps;
                     lin.collect(ps);
                     return gradient_check([&](auto v) { return lin(v[0]); }, {normal({3, 5}, 1.0, rng)}, ps, opt);
                 }});

    r.push_back({"layer_norm", false, [](const GradCheckOptions& opt) {
                     Rng rng(2);
                     LayerNorm ln("ln", 6);
                     ln.gamma.mutable_value() = uniform({6}, 0.5, 1.5, rng);
                     ln.beta.mutable_value() = normal({6}, 0.5, rng);
                     ParamList ps;
                     ln.collect(ps);
                     return gradient_check([&](auto v) { return ln(v[0]); }, {normal({4, 6}, 1.0, rng)}, ps, opt);
                 }});

    r.push_back({"gru_cell", false, [](const GradCheckOptions& opt) {
                     Rng rng(3);
                     GruParams gru("gru", 6, rng);
                     ParamList ps;
                     gru.collect(ps);
                     const auto op = [&](std::span<const Var> v) { return gru_cell(v[0], v[1], gru); };
                     return gradient_check(op, {normal({3, 6}, 1.0, rng), normal({3, 6}, 1.0, rng)}, ps, opt);
                 }});

    r.push_back({"point_mlp", false, [](const GradCheckOptions& opt) {
                     Rng rng(4);
                     PointMlp mlp("mlp", 8, 4, rng);
                     ParamList ps;
                     mlp.collect(ps);
                     return gradient_check([&](auto v) { return mlp(v[0]); }, {normal({6, kPointInputDim}, 1.0, rng)}, ps,
                                           opt);
                 }});

    r.push_back({"scatter_max", true, [](const GradCheckOptions& opt) {
                     Rng rng(5);
                     CylGridConfig cfg;
                     cfg.bins = {2, 3, 2};
                     std::uniform_int_distribution<Index> pick(-1, cfg.voxel_count() - 1);
                     std::vector<Index> vox(20);
                     for (Index& v : vox) v = pick(rng);
                     const auto op = [&](std::span<const Var> v) { return scatter_max(v[0], vox, cfg).features; };
                     return gradient_check(op, {normal({20, 3}, 1.0, rng)}, {}, opt);
                 }});

    for (int stride : {1, 2})
        for (bool wrap : {false, true}) r.push_back(sparse_conv_entry(stride, wrap));

    r.push_back({"cb_block+pool_concat", true, [](const GradCheckOptions& opt) {
                     Rng rng(12);
                     CbBlock cb("cb", 2, 3, true, rng);
                     ParamList ps;
                     cb.collect(ps);
                     const auto geom = random_geometry({4, 5, 3}, 0.4, rng);
                     const auto op = [&](std::span<const Var> v) { return pool_concat(cb(SparseTensor3D{geom, v[0]})); };
                     return gradient_check(op, {site_features(*geom, 2, rng)}, ps, opt);
                 }});

    r.push_back({"cbd_block+pool_concat", true, [](const GradCheckOptions& opt) {
                     Rng rng(13);
                     CbdBlock cbd("cbd", 2, 3, false, rng);
                     ParamList ps;
                     cbd.collect(ps);
                     const auto geom = random_geometry({5, 4, 4}, 0.35, rng);
                     const auto op = [&](std::span<const Var> v) { return pool_concat(cbd(SparseTensor3D{geom, v[0]})); };
                     return gradient_check(op, {site_features(*geom, 2, rng)}, ps, opt);
                 }});

    r.push_back({"sparse_backbone+pool_concat", true, [](const GradCheckOptions& opt) {
                     Rng rng(14);
                     SparseBackbone bb("bb", 2, 32, true, rng);
                     ParamList ps;
                     bb.collect(ps);
                     randomize_biases(ps, rng);
                     const auto geom = random_geometry({8, 8, 8}, 0.15, rng);
                     const auto op = [&](std::span<const Var> v) { return pool_concat(bb(SparseTensor3D{geom, v[0]})); };
                     GradCheckOptions o = opt;
                     o.max_coords_per_tensor = 16;
                     return gradient_check(op, {site_features(*geom, 2, rng)}, ps, o);
                 }});

    r.push_back({"radar_broadcast", false, [](const GradCheckOptions& opt) {
                     Rng rng(15);
                     RadarBroadcast rb("rb", rng);
                     ParamList ps;
                     rb.collect(ps);
                     return gradient_check([&](auto v) { return rb(v[0]); }, {uniform({1, 6, 5}, 0.0, 1.0, rng)}, ps, opt);
                 }});

    r.push_back({"residual_stack", false, [](const GradCheckOptions& opt) {
                     Rng rng(16);
                     ResidualStack stack("stack", 4, rng);
                     ParamList ps;
                     stack.collect(ps);
                     GradCheckOptions o = opt;
                     o.max_coords_per_tensor = 24;
                     return gradient_check([&](auto v) { return stack(v[0]); }, {uniform({1, 3, 16, 16}, 0.0, 1.0, rng)},
                                           ps, o);
                 }});

    r.push_back({"finetune+positional_encoding", false, [](const GradCheckOptions& opt) {
                     Rng rng(17);
                     Finetune ft("ft", 3, 4, 1, 2, rng);
                     ft.encoding.mutable_value() = normal(ft.encoding.shape(), 0.5, rng);
                     ParamList ps;
                     ft.collect(ps);
                     return gradient_check([&](auto v) { return ft(v[0]); }, {uniform({1, 3, 4, 8}, 0.0, 1.0, rng)}, ps,
                                           opt);
                 }});

    for (SoftmaxAxis axis : {SoftmaxAxis::slots, SoftmaxAxis::inputs}) {
        const std::string suffix = axis == SoftmaxAxis::slots ? "(softmax over slots)" : "(softmax over inputs)";
        r.push_back({"slot_attention_step" + suffix, false, [axis](const GradCheckOptions& opt) {
                         Rng rng(18);
                         SlotParams p("slot", SlotConfig{3, 8, 1, axis}, rng);
                         ParamList ps;
                         p.collect(ps);
                         const auto op = [&](std::span<const Var> v) { return attention_step(v[0], v[1], p); };
                         return gradient_check(op, {normal({6, 8}, 1.0, rng), normal({3, 8}, 1.0, rng)}, ps, opt);
                     }});
        r.push_back({"slot_filter" + suffix, true, [axis](const GradCheckOptions& opt) {
                         Rng rng(19);
                         SlotParams p("slot", SlotConfig{3, 8, 2, axis}, rng);
                         ParamList ps;
                         p.collect(ps);
                         return gradient_check([&](auto v) { return slot_filter(v[0], p, 5); }, {normal({5, 8}, 1.0, rng)},
                                               ps, opt);
                     }});
    }

    r.push_back({"modality_encoding", false, [](const GradCheckOptions& opt) {
                     Rng rng(20);
                     ModalityEncoding enc("enc", 6, rng);
                     ParamList ps;
                     enc.collect(ps);
                     const auto op = [&](std::span<const Var> v) {
                         const std::array<Var, 3> parts{enc(v[0], SensorId::L1), enc(v[0], SensorId::C2),
                                                        enc(v[0], SensorId::R)};
                         return concat(parts);
                     };
                     return gradient_check(op, {normal({6}, 1.0, rng)}, ps, opt);
                 }});

    for (bool norm : {true, false}) {
        r.push_back({norm ? "regression_head(rotation norm)" : "regression_head(no norm)", false,
                     [norm](const GradCheckOptions& opt) {
                         Rng rng(21);
                         RegressionHead head("head", 16, norm, rng);
                         ParamList ps;
                         head.collect(ps);
                         const auto op = [&](std::span<const Var> v) {
                             const HeadOutput h = head(v[0]);
                             const std::array<Var, 2> parts{h.translation, h.rotation};
                             return concat(parts);
                         };
                         return gradient_check(op, {normal({16}, 1.0, rng)}, ps, opt);
                     }});
    }

    for (LossMode mode : {LossMode::stable, LossMode::paper_literal}) {
        r.push_back({mode == LossMode::stable ? "pose_loss(stable)" : "pose_loss(literal)", false,
                     [mode](const GradCheckOptions& opt) {
                         Rng rng(22);
                         const Tensor gt = normal({3}, 1.0, rng), gr = uniform({3}, -0.9, 0.9, rng);
                         const auto op = [&](std::span<const Var> v) {
                             return pose_loss(v[0], v[1], gt, gr, v[2], v[3], mode, 2.0).total;
                         };
                         const Tensor pt = normal({3}, 1.0, rng), pr = uniform({3}, -0.5, 0.5, rng);
                         return gradient_check(op, {pt, pr, Tensor::scalar(0.3), Tensor::scalar(-0.4)}, {}, opt);
                     }});
    }
    return r;
}

}  // namespace

const std::vector<GradCheckEntry>& gradcheck_registry() {
    static const std::vector<GradCheckEntry> registry = build_registry();
    return registry;
}

GradCheckEntry sign_flip_fixture() {
    GradCheckEntry linear = gradcheck_registry().front();
    return {"sign_flip_fixture(" + linear.name + ")", linear.pooling, [run = linear.run](const GradCheckOptions& opt) {
                GradCheckOptions o = opt;
                o.tamper = [](Tensor& g) { g.data() = -g.data(); };
                return run(o);
            }};
}

GradCheckRecord run_gradcheck(const GradCheckEntry& entry, const GradCheckOptions& opt) {
    GradCheckRecord rec;
    rec.name = entry.name;
    rec.tolerance = entry.tolerance();
    const auto t0 = std::chrono::steady_clock::now();
    rec.result = entry.run(opt);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.passed = std::isfinite(rec.result.max_rel_error) && rec.result.max_rel_error <= rec.tolerance;
    return rec;
}

std::string format_record(const GradCheckRecord& r) {
    char line[384];
    std::snprintf(line, sizeof line, "%s %-40s max_rel_error %.3e (tol %.0e) worst %s[%lld] %.2fs",
                  r.passed ? "PASS" : "FAIL", r.name.c_str(), r.result.max_rel_error, r.tolerance,
                  r.result.worst_tensor.c_str(), static_cast<long long>(r.result.worst_index), r.seconds);
    return line;
}

}  // namespace unloc
