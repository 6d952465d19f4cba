#pragma once

#include <stdexcept>
#include <string>

namespace amdcn {

// Shape or contract violation (mismatched dims, invalid layer spec).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable, corrupt or inconsistent input data / files.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (training abort).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-facing arguments; the CLI maps these to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace amdcn
