#pragma once

#include "unloc/layers.hpp"

namespace unloc {

/// Radar power in polar form: one row per azimuth, one column per range bin.
/// Azimuth row a points at azimuth_0 + a * 2pi / A, range bin b sits at b * range_resolution.
struct RadarPolarScan {
    RowMatrixXd power;
    double azimuth_0 = 0.0;
    double range_resolution = 1.0;

    Index azimuths() const { return power.rows(); }
    Index range_bins() const { return power.cols(); }
    double max_range() const { return static_cast<double>(range_bins() - 1) * range_resolution; }
    void validate() const;
};

/// Rasterizes a polar scan into a (1, H, W) grey image centred on the sensor.
/// Columns run along +u, rows along -v, the centre sits at ((W-1)/2, (H-1)/2)
/// and the inscribed circle reaches max_range. Bilinear in (range, azimuth),
/// azimuth wraps, pixels beyond max range are 0.
Tensor polar_to_cartesian(const RadarPolarScan& scan, Index height, Index width);

/// Checks a (C, H, W) image for finite values and H, W divisible by 32.
void validate_image(const Tensor& image, Index channels);

/// Learnable 1 -> 3 channel 3x3 convolution applied to radar images.
struct RadarBroadcast {
    RadarBroadcast() = default;
    RadarBroadcast(const std::string& name, Rng& rng) : conv(name + ".conv", 1, 3, 3, 1, 1, rng) {}

    /// x is (1, H, W) or (1, 1, H, W); returns (1, 3, H, W).
    Var operator()(const Var& x) const;
    void collect(ParamList& out) { conv.collect(out); }

    Conv2d conv;
};

/// Two 3x3 convolutions with a parameter-free shortcut (strided subsample and
/// zero channel padding when the shape changes).
struct ResidualBlock {
    ResidualBlock() = default;
    ResidualBlock(const std::string& name, Index in, Index out, int stride, Rng& rng);

    Var operator()(const Var& x) const;
    void collect(ParamList& out) { first.collect(out), second.collect(out); }
    Shape output_shape(const Shape& in) const { return second.output_shape(first.output_shape(in)); }

    Conv2d first, second;
    Index out_channels = 0;
    int stride = 1;
};

/// Stride-2 stem followed by three stages of two residual blocks; overall /8.
/// Channels ramp C/4, C/4, C/2, C.
struct ResidualStack {
    ResidualStack() = default;
    ResidualStack(const std::string& name, Index feature_channels, Rng& rng);

    /// x is (1, 3, H, W) with H, W divisible by 8.
    Var operator()(const Var& x) const;
    void collect(ParamList& out);
    Shape output_shape(const Shape& in) const;
    Index feature_channels() const { return blocks.back().out_channels; }

    Conv2d stem;
    std::array<ResidualBlock, 6> blocks;
};

/// Two stride-2 convolutions to token width, additive positional encoding,
/// flatten to tokens and a per-token linear layer.
struct Finetune {
    Finetune() = default;
    /// grid_h, grid_w: token grid, i.e. image H/32, W/32.
    Finetune(const std::string& name, Index feature_channels, Index token_dim, Index grid_h, Index grid_w, Rng& rng);

    /// features (1, C, H/8, W/8) -> (N, D) with N = (H/32)(W/32).
    Var operator()(const Var& features, bool with_encoding = true) const;
    void collect(ParamList& out);
    Index token_dim() const { return encoding.shape()[2]; }

    Conv2d down1, down2;
    Parameter encoding;  // grid_h x grid_w x D
    Linear project;
};

/// Shared 2-D stream: residual stack then fine-tuning module.
struct ImageStream {
    ImageStream() = default;
    ImageStream(const std::string& name, Index image_h, Index image_w, Index feature_channels, Index token_dim, Rng& rng);

    /// image (3, H, W) or (1, 3, H, W) -> tokens (N, D).
    Var operator()(const Var& image) const;
    void collect(ParamList& out) { stack.collect(out), finetune.collect(out); }

    ResidualStack stack;
    Finetune finetune;
    Index height = 0, width = 0;
};

}  // namespace unloc
