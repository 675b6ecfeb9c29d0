#pragma once

#include <stdexcept>
#include <string>

namespace ecrank {

/// Malformed or inconsistent input data (files, records, shapes).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numeric failure during computation (non-finite loss, violated bound).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ecrank
