#pragma once

#include <stdexcept>
#include <string>

namespace unloc {

/// Raised on any shape disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised on NaN/Inf where a finite value is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A point cloud or sparse tensor with nothing left to reduce.
struct EmptyCloudError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or an unusable request (empty sensor set, bad rate).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A sensor required by the request has no data.
struct MissingSensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Query outside the time span covered by ground truth.
struct OutOfRangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Radar frames that ground truth cannot cover, even after gap filling.
struct CoverageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace unloc
