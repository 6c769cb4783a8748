#include "unloc/imaging.hpp"

#include <cmath>
#include <numbers>

namespace unloc {

namespace {

Var as_batch(const Var& x, Index channels, const char* what) {
    const Shape& s = x.value().shape();
    if (s.size() == 3 && s[0] == channels) return reshape(x, {1, s[0], s[1], s[2]});
    if (s.size() == 4 && s[0] == 1 && s[1] == channels) return x;
    throw DimensionError(std::string(what) + ": expected " + std::to_string(channels) + " channel image, got " +
                         shape_str(s));
}

}  // namespace

void RadarPolarScan::validate() const {
    if (azimuths() < 4) throw DimensionError("radar scan: need at least 4 azimuths");
    if (range_bins() < 2) throw DimensionError("radar scan: need at least 2 range bins");
    if (!(range_resolution > 0.0)) throw ConfigError("radar scan: range resolution must be positive");
    if (!power.allFinite()) throw NumericError("radar scan: non-finite power");
}

Tensor polar_to_cartesian(const RadarPolarScan& scan, Index height, Index width) {
    if (height < 1 || width < 1) throw DimensionError("polar_to_cartesian: output size must be positive");
    scan.validate();
    const Index na = scan.azimuths(), nr = scan.range_bins();
    const double max_r = scan.max_range();
    const double metres_per_px = max_r / (0.5 * static_cast<double>(std::min(height, width)));
    const double bin_angle = 2.0 * std::numbers::pi / static_cast<double>(na);
    const double cu = 0.5 * static_cast<double>(width - 1), cv = 0.5 * static_cast<double>(height - 1);

    Tensor out({1, height, width});
    auto img = out.matrix(height);
    for (Index i = 0; i < height; ++i) {
        for (Index j = 0; j < width; ++j) {
            const double u = (static_cast<double>(j) - cu) * metres_per_px;
            const double v = (cv - static_cast<double>(i)) * metres_per_px;
            const double r = std::hypot(u, v);
            if (r > max_r) {
                img(i, j) = 0.0;
                continue;
            }
            const double fr = std::min(r / scan.range_resolution, static_cast<double>(nr - 1));
            const Index r0 = std::min(static_cast<Index>(fr), nr - 2);
            const double tr = fr - static_cast<double>(r0);

            double fa = (std::atan2(v, u) - scan.azimuth_0) / bin_angle;
            fa -= std::floor(fa / static_cast<double>(na)) * static_cast<double>(na);
            Index a0 = static_cast<Index>(fa);
            double ta = fa - static_cast<double>(a0);
            if (a0 >= na) a0 = 0, ta = 0.0;
            const Index a1 = (a0 + 1) % na;

            const auto& p = scan.power;
            img(i, j) = (1 - ta) * ((1 - tr) * p(a0, r0) + tr * p(a0, r0 + 1)) + ta * ((1 - tr) * p(a1, r0) + tr * p(a1, r0 + 1));
        }
    }
    return out;
}

void validate_image(const Tensor& image, Index channels) {
    const Shape& s = image.shape();
    if (s.size() != 3 || s[0] != channels)
        throw DimensionError("image: expected " + std::to_string(channels) + " x H x W, got " + shape_str(s));
    if (s[1] % 32 != 0 || s[2] % 32 != 0) throw DimensionError("image: H and W must be divisible by 32, got " + shape_str(s));
    if (!image.all_finite()) throw NumericError("image: non-finite pixel");
}

Var RadarBroadcast::operator()(const Var& x) const { return conv(as_batch(x, 1, "radar_broadcast")); }

ResidualBlock::ResidualBlock(const std::string& name, Index in, Index out, int stride_, Rng& rng)
    : first(name + ".conv1", in, out, 3, stride_, 1, rng),
      second(name + ".conv2", out, out, 3, 1, 1, rng),
      out_channels(out),
      stride(stride_) {}

Var ResidualBlock::operator()(const Var& x) const {
    const Var body = second(relu(first(x)));
    const bool same = stride == 1 && x.dim(1) == out_channels;
    return relu(body + (same ? x : subsample_pad_channels(x, out_channels, stride)));
}

ResidualStack::ResidualStack(const std::string& name, Index c, Rng& rng) {
    if (c < 4 || c % 4 != 0) throw ConfigError("residual stack: feature channels must be a positive multiple of 4");
    stem = Conv2d(name + ".stem", 3, c / 4, 3, 2, 1, rng);
    const std::array<Index, 6> width{c / 4, c / 4, c / 2, c / 2, c, c};
    Index in = c / 4;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const int stride = (i == 2 || i == 4) ? 2 : 1;
        blocks[i] = ResidualBlock(name + ".block" + std::to_string(i), in, width[i], stride, rng);
        in = width[i];
    }
}

Var ResidualStack::operator()(const Var& x) const {
    const Shape& s = x.value().shape();
    if (s.size() != 4 || s[1] != 3) throw DimensionError("residual stack: expected (1, 3, H, W), got " + shape_str(s));
    if (s[2] % 8 != 0 || s[3] % 8 != 0) throw DimensionError("residual stack: H and W must be divisible by 8, got " + shape_str(s));
    Var h = relu(stem(x));
    for (const ResidualBlock& b : blocks) h = b(h);
    return h;
}

void ResidualStack::collect(ParamList& out) {
    stem.collect(out);
    for (ResidualBlock& b : blocks) b.collect(out);
}

Shape ResidualStack::output_shape(const Shape& in) const {
    if (in.size() != 4 || in[2] % 8 != 0 || in[3] % 8 != 0)
        throw DimensionError("residual stack: H and W must be divisible by 8, got " + shape_str(in));
    Shape s = stem.output_shape(in);
    for (const ResidualBlock& b : blocks) s = b.output_shape(s);
    return s;
}

Finetune::Finetune(const std::string& name, Index c, Index d, Index grid_h, Index grid_w, Rng& rng)
    : down1(name + ".down1", c, d, 3, 2, 1, rng),
      down2(name + ".down2", d, d, 3, 2, 1, rng),
      encoding(name + ".encoding", normal({grid_h, grid_w, d}, 0.02, rng)),
      project(name + ".project", d, d, rng) {}

Var Finetune::operator()(const Var& features, bool with_encoding) const {
    const Var y = down2(relu(down1(features)));
    const Shape& s = y.value().shape();
    const Shape& pe = encoding.shape();
    if (s[2] != pe[0] || s[3] != pe[1] || s[1] != pe[2])
        throw DimensionError("finetune: feature map " + shape_str(s) + " does not match encoding " + shape_str(pe));
    const Index d = s[1], n = s[2] * s[3];
    Var tokens = transpose(reshape(y, {d, n}));
    if (with_encoding) tokens = tokens + reshape(encoding.var(), {n, d});
    return project(tokens);
}

void Finetune::collect(ParamList& out) {
    down1.collect(out), down2.collect(out);
    out.push_back(&encoding);
    project.collect(out);
}

ImageStream::ImageStream(const std::string& name, Index h, Index w, Index c, Index d, Rng& rng) : height(h), width(w) {
    if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0)
        throw ConfigError("image stream: H and W must be positive multiples of 32");
    stack = ResidualStack(name + ".stack", c, rng);
    finetune = Finetune(name + ".finetune", c, d, h / 32, w / 32, rng);
}

Var ImageStream::operator()(const Var& image) const {
    const Var x = as_batch(image, 3, "image stream");
    if (x.dim(2) != height || x.dim(3) != width)
        throw DimensionError("image stream: configured for " + std::to_string(height) + "x" + std::to_string(width) +
                             ", got " + shape_str(x.value().shape()));
    return finetune(stack(x));
}

}  // namespace unloc
