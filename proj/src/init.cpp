#include "unloc/init.hpp"

#include <cmath>

namespace unloc {

double xavier_bound(Index fan_in, Index fan_out) {
    if (fan_in <= 0 || fan_out <= 0) throw DimensionError("xavier_uniform: fans must be positive");
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, Rng& rng) {
    const double a = xavier_bound(fan_in, fan_out);
    return uniform(shape, -a, a, rng);
}

Tensor xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, std::uint64_t seed) {
    Rng rng(seed);
    return xavier_uniform(shape, fan_in, fan_out, rng);
}

Tensor normal(const Shape& shape, double stddev, Rng& rng) {
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng) {
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace unloc
