#pragma once

#include <stdexcept>
#include <string>

namespace argox {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input data (CSV rows, registry entries).
class DataError : public Error {
public:
    using Error::Error;
};

/// A solve could not be completed (non-convergence, non-PD system).
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace argox
