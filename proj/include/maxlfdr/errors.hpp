#pragma once

#include <stdexcept>
#include <string>

namespace maxlfdr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A nominal level outside (0, 1].
class LevelError : public Error {
public:
    using Error::Error;
};

/// A sample with no p-values.
class EmptySampleError : public Error {
public:
    EmptySampleError() : Error("empty sample") {}
};

/// A model precondition (monotonicity, differentiability, ...) fails.
class AssumptionError : public Error {
public:
    using Error::Error;
};

/// Invalid simulation or CLI configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace maxlfdr
