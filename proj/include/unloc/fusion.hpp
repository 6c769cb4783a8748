#pragma once

#include "unloc/layers.hpp"
#include "unloc/pose.hpp"
#include "unloc/sensors.hpp"

namespace unloc {

/// One learnable vector per modality, added to that modality's features.
struct ModalityEncoding {
    ModalityEncoding() = default;
    ModalityEncoding(const std::string& name, Index dim, Rng& rng);

    /// feature (D) + e_modality(sensor).
    Var operator()(const Var& feature, SensorId sensor) const;
    void collect(ParamList& out);
    Parameter& vector(Modality m) { return vectors[static_cast<std::size_t>(index_of(m))]; }

    std::array<Parameter, 3> vectors;
};

/// Translation and rotation outputs of the head, each of length 3.
struct HeadOutput {
    Var translation;
    Var rotation;
};

/// Two shared D -> D layers, then translation and rotation branches of widths
/// D, D/2, D/4, 3. The rotation branch optionally layer-normalizes its
/// penultimate activations.
struct RegressionHead {
    RegressionHead() = default;
    RegressionHead(const std::string& name, Index dim, bool rotation_norm, Rng& rng);

    HeadOutput operator()(const Var& feature) const;
    void collect(ParamList& out);
    /// Widths of the translation branch, input first.
    std::vector<Index> branch_trace() const;

    std::array<Linear, 2> shared;
    std::array<Linear, 4> translation, rotation;
    LayerNorm rotation_norm;
    bool use_rotation_norm = true;
};

enum class FusionMode { pose, feature };

}  // namespace unloc
