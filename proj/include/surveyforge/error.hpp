#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace surveyforge {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string &source, std::size_t line, const std::string &message)
        : Error(source + ":" + std::to_string(line) + ": " + message), line_{line} {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Counts or totals that contradict each other.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A PPS unit whose size-proportional probability exceeds one; the caller
/// must treat it as a certainty selection.
class CertaintyUnitError : public Error {
public:
    using Error::Error;
};

/// Iterative procedure failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Raking failed to converge; keeps the margins from the last sweep.
class RakeConvergenceError : public ConvergenceError {
public:
    RakeConvergenceError(const std::string &message, std::vector<std::vector<double>> margins)
        : ConvergenceError(message), margins_{std::move(margins)} {}

    const std::vector<std::vector<double>> &last_margins() const noexcept { return margins_; }

private:
    std::vector<std::vector<double>> margins_;
};

/// Design matrix without full column rank.
class RankError : public Error {
public:
    RankError(const std::string &message, std::vector<std::string> columns)
        : Error(message), columns_{std::move(columns)} {}

    const std::vector<std::string> &columns() const noexcept { return columns_; }

private:
    std::vector<std::string> columns_;
};

/// Covariate tables that do not share a schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Sample structure incompatible with the requested adjustment
/// (e.g. an empty raking cell with a positive control total).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Numerical guard tripped (non-finite or vanishing weight, bad denominator).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace surveyforge
