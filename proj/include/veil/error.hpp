#pragma once

#include <stdexcept>
#include <string>

namespace veil {

// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller-supplied parameter violates its documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Two rasters that must share dimensions do not.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// A file could not be read, decoded, or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace veil
