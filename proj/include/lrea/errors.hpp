#pragma once

#include <stdexcept>
#include <string>

namespace lrea {

// Shape/dimension mismatch between matrices. Message names both shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Id lookups outside the valid vocabulary range.
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Metric is undefined for the given inputs (e.g. single-class labels).
struct MetricError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A scalar evaluation produced a non-finite value.
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or missing input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested user has no record in the state store.
struct CacheMissError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stored state was built from a different parameter version than the
// checkpoint in hand. Scoring against it would be silently wrong.
struct StaleCacheError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lrea
