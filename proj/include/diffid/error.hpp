#pragma once

#include <stdexcept>
#include <string>

namespace diffid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands whose dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value outside the documented domain of an operation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Face detection / alignment / parsing failed (e.g. no face found).
class PreprocessError : public Error {
public:
    using Error::Error;
};

/// The generator backend (encoders or generator) failed.
class BackendError : public Error {
public:
    using Error::Error;
};

/// File-system or codec failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace diffid
