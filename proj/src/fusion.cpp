#include "unloc/fusion.hpp"

namespace unloc {

ModalityEncoding::ModalityEncoding(const std::string& name, Index dim, Rng& rng) {
    for (Modality m : {Modality::point_cloud, Modality::image, Modality::radar})
        vector(m) = Parameter(name + "." + std::string(modality_name(m)), normal({dim}, 0.02, rng));
}

Var ModalityEncoding::operator()(const Var& feature, SensorId sensor) const {
    const Parameter& e = vectors[static_cast<std::size_t>(index_of(modality_of(sensor)))];
    if (feature.value().shape() != e.shape())
        throw DimensionError("modality encoding: feature " + shape_str(feature.value().shape()) + " vs encoding " +
                             shape_str(e.shape()));
    return feature + e.var();
}

void ModalityEncoding::collect(ParamList& out) {
    for (Parameter& p : vectors) out.push_back(&p);
}

RegressionHead::RegressionHead(const std::string& name, Index d, bool rotation_norm_, Rng& rng)
    : use_rotation_norm(rotation_norm_) {
    if (d < 4 || d % 4 != 0) throw ConfigError("regression head: feature size must be a positive multiple of 4");
    shared[0] = Linear(name + ".shared1", d, d, rng);
    shared[1] = Linear(name + ".shared2", d, d, rng);
    const std::array<Index, 5> w{d, d, d / 2, d / 4, 3};
    for (std::size_t i = 0; i < 4; ++i) {
        translation[i] = Linear(name + ".translation" + std::to_string(i + 1), w[i], w[i + 1], rng);
        rotation[i] = Linear(name + ".rotation" + std::to_string(i + 1), w[i], w[i + 1], rng);
    }
    rotation_norm = LayerNorm(name + ".rotation_norm", d / 4);
}

HeadOutput RegressionHead::operator()(const Var& feature) const {
    const Index d = shared[0].in_features();
    if (feature.value().size() != d)
        throw DimensionError("regression head: expected feature of length " + std::to_string(d) + ", got " +
                             shape_str(feature.value().shape()));
    Var h = reshape(feature, {1, d});
    for (const Linear& l : shared) h = relu(l(h));
    Var t = h, r = h;
    for (std::size_t i = 0; i < 3; ++i) t = relu(translation[i](t)), r = relu(rotation[i](r));
    if (use_rotation_norm) r = rotation_norm(r);
    return {reshape(translation[3](t), {3}), reshape(rotation[3](r), {3})};
}

void RegressionHead::collect(ParamList& out) {
    for (Linear& l : shared) l.collect(out);
    for (Linear& l : translation) l.collect(out);
    for (Linear& l : rotation) l.collect(out);
    if (use_rotation_norm) rotation_norm.collect(out);
}

std::vector<Index> RegressionHead::branch_trace() const {
    std::vector<Index> w{shared[1].out_features()};
    for (const Linear& l : translation) {
        if (l.in_features() != w.back()) throw DimensionError("regression head: broken translation branch");
        w.push_back(l.out_features());
    }
    for (std::size_t i = 0; i < 4; ++i)
        if (rotation[i].out_features() != translation[i].out_features())
            throw DimensionError("regression head: branches differ in width");
    return w;
}

}  // namespace unloc
