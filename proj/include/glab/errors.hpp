#pragma once

#include <stdexcept>
#include <string>

namespace glab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by its inputs.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A linear solve missed its residual contract or a coefficient was non-finite.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Malformed scenario, table or command-line input.
class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace glab
