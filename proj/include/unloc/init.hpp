#pragma once

#include "unloc/tensor.hpp"

#include <cstdint>
#include <random>

namespace unloc {

using Rng = std::mt19937_64;

/// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, Rng& rng);
Tensor xavier_uniform(const Shape& shape, Index fan_in, Index fan_out, std::uint64_t seed);
double xavier_bound(Index fan_in, Index fan_out);

Tensor normal(const Shape& shape, double stddev, Rng& rng);
Tensor uniform(const Shape& shape, double lo, double hi, Rng& rng);

/// Derives an independent stream from a base seed and a tag (SplitMix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace unloc
