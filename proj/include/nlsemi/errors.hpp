#pragma once

#include <stdexcept>
#include <string>

namespace nlsemi {

struct InvalidGrid : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GridMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SizeGuard : std::length_error {
    using std::length_error::length_error;
};

/// Too many non-finite samples in a Monte-Carlo estimate.
struct EstimateAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nlsemi
