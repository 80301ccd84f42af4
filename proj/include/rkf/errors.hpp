#pragma once

#include <stdexcept>
#include <string>

namespace rkf {

// Bad input: dimensions, ranges, non-PSD covariances, malformed configs.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The model is valid but outside what an operation supports
// (e.g. rLS.IO with a singular observation matrix).
class UnsupportedModelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A solver could not produce a trustworthy answer (no bracket, no sign change,
// post-condition check failed).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rkf
