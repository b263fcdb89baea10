#pragma once

#include <stdexcept>
#include <string>

namespace flexitac {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input-side problems: bad arguments, bad configuration, malformed data.
// The CLI maps these to exit code 3.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IndexError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ContractViolation : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EncodingError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Decode failures. The stream decoder counts these instead of throwing.
class DecodeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class FramingError : public DecodeError {
public:
    using DecodeError::DecodeError;
};

class ProtocolError : public DecodeError {
public:
    using DecodeError::DecodeError;
};

class CorruptionError : public DecodeError {
public:
    using DecodeError::DecodeError;
};

// Runtime problems (exit code 4).
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

class TransportError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

class UnidentifiableError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

}  // namespace flexitac
