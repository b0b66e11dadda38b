#pragma once

#include <stdexcept>
#include <string>

namespace lmc {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parameter vector / layout shape mismatches.
struct LayoutError : Error {
    using Error::Error;
};

// Non-finite values encountered during evaluation. Carries the index of the
// offending example (or -1 when not example-specific).
struct NumericError : Error {
    long example_index = -1;
    NumericError(const std::string& msg, long idx = -1)
        : Error(msg), example_index(idx) {}
};

// Bad configuration values (unknown layer names, invalid hyperparameters, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Metric requested on a network that cannot provide it.
struct UnsupportedMetricError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    int epoch = -1;
    long batch = -1;
    DivergenceError(const std::string& msg, int ep, long b)
        : Error(msg), epoch(ep), batch(b) {}
};

// File-format problems, each kind distinct so callers can react.
struct IoError : Error {
    using Error::Error;
};
struct ParseError : IoError {
    long byte_offset = -1;
    ParseError(const std::string& msg, long off = -1)
        : IoError(msg), byte_offset(off) {}
};
struct ChecksumError : IoError {
    using IoError::IoError;
};
struct VersionError : IoError {
    using IoError::IoError;
};
struct TruncationError : IoError {
    using IoError::IoError;
};
struct BoundsError : Error {
    using Error::Error;
};

}  // namespace lmc
