#pragma once

#include <stdexcept>
#include <string>

namespace lcgap {

// Error taxonomy, mirrored by CLI exit codes: config=2, data=3, numeric=4.

// Invalid or inconsistent configuration (unknown descriptor kind, bad grid, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Problems with dataset or model files: parse failures, missing properties,
// coincident atoms, neighborhood occupancy overflow, corrupt model payloads.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure, chiefly covariance factorization breaking down even at
// the maximum jitter level.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lcgap
